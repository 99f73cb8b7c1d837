#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "gradcheck.hpp"
#include "slogan/neural.hpp"

using namespace slogan;

namespace {

Mat random_mat(int r, int c, Rng& rng, double scale = 1.0) {
    Mat m(r, c);
    rng.fill_normal(as_span(m));
    return scale * m;
}

double rel_err(double a, double f) { return gradcheck::rel_err(a, f, 1e-5); }

double gradient_check(Mlp& net, const Mat& x, const Mat& dy) { return gradcheck::network_error(net, x, dy); }

}  // namespace

TEST_CASE("identity linear layer") {
    NetSpec s{3, {{3, Activation::Linear, false, false}}};
    Rng rng(1);
    Mlp net = Mlp::build(s, rng);
    net.layers()[0].w = Mat::Identity(3, 3);
    const Mat x = random_mat(4, 3, rng);
    CHECK((net.forward(x, Mode::Eval) - x).norm() == 0.0);

    ForwardTape tape;
    net.layers()[0].w = random_mat(3, 3, rng);
    net.forward(x, Mode::Train, &tape);
    const Mat dy = random_mat(4, 3, rng);
    const auto [g, dx] = net.backward(tape, dy);
    CHECK((dx - dy * net.layers()[0].w).norm() < 1e-14);
    CHECK((g.layers[0].w - dy.transpose() * x).norm() < 1e-12);
}

TEST_CASE("tanh output range and zero upstream gradient") {
    Rng rng(2);
    Mlp g = Mlp::build(synthetic_generator_spec(), rng);
    const Mat z = random_mat(32, 64, rng, 10.0);
    ForwardTape tape;
    const Mat x = g.forward(z, Mode::Train, &tape);
    CHECK(x.cwiseAbs().maxCoeff() < 1.0);
    const auto [grads, dz] = g.backward(tape, Mat::Zero(32, 2));
    CHECK(grads.squared_norm() == 0.0);
    CHECK(dz.norm() == 0.0);
}

TEST_CASE("forward matches an independent implementation") {
    Rng rng(3);
    NetSpec s{3, {{5, Activation::LeakyRelu, false, false}, {2, Activation::Tanh, false, false}}};
    Mlp net = Mlp::build(s, rng);
    const Mat x = random_mat(6, 3, rng);
    const Mat y = net.forward(x, Mode::Eval);
    const auto& l0 = net.layers()[0];
    const auto& l1 = net.layers()[1];
    for (int i = 0; i < 6; ++i) {
        Vec h = l0.w * x.row(i).transpose() + l0.b;
        for (int j = 0; j < h.size(); ++j) h(j) = h(j) > 0 ? h(j) : 0.2 * h(j);
        Vec o = l1.w * h + l1.b;
        for (int j = 0; j < o.size(); ++j) CHECK(y(i, j) == doctest::Approx(std::tanh(o(j))).epsilon(1e-14));
    }
}

TEST_CASE("architectures") {
    const NetSpec g = synthetic_generator_spec();
    CHECK(g.input_dim == 64);
    REQUIRE(g.layers.size() == 3);
    CHECK(g.layers[0].units == 128);
    CHECK(g.layers[0].batch_norm);
    CHECK(g.layers[0].activation == Activation::Relu);
    CHECK(g.layers[2].units == 2);
    CHECK(g.layers[2].activation == Activation::Tanh);

    const NetSpec e = synthetic_encoder_spec();
    CHECK(e.input_dim == 2);
    REQUIRE(e.layers.size() == 3);
    for (const auto& l : e.layers) CHECK(l.spectral_norm);
    CHECK(e.layers[1].activation == Activation::LeakyRelu);
    CHECK(e.layers[2].units == 64);
    CHECK(e.layers[2].activation == Activation::Linear);

    const NetSpec d = synthetic_discriminator_spec();
    CHECK(d.output_dim() == 1);
    for (const auto& l : d.layers) CHECK_FALSE((l.batch_norm || l.spectral_norm));

    Rng rng(4);
    CHECK_THROWS_AS(Mlp::build(NetSpec{0, {{2, Activation::Linear, false, false}}}, rng), BadSpec);
    CHECK_THROWS_AS(Mlp::build(NetSpec{2, {{0, Activation::Linear, false, false}}}, rng), BadSpec);
    CHECK_THROWS_AS(activation_from_string("swish"), BadSpec);
    CHECK(activation_from_string(to_string(Activation::LeakyRelu)) == Activation::LeakyRelu);
}

TEST_CASE("single affine map without hidden layers") {
    Rng rng(5);
    Mlp net = Mlp::build(NetSpec{2, {{2, Activation::Linear, false, false}}}, rng);
    net.layers()[0].w = Mat::Identity(2, 2);
    net.layers()[0].b = (Vec(2) << 1.0, -1.0).finished();
    Mat x(1, 2);
    x << 0.5, 0.25;
    const Mat y = net.forward(x, Mode::Eval);
    CHECK(y(0, 0) == 1.5);
    CHECK(y(0, 1) == -0.75);
}

TEST_CASE("input shape is checked") {
    Rng rng(6);
    Mlp net = Mlp::build(synthetic_discriminator_spec(), rng);
    CHECK_THROWS_AS(net.forward(Mat::Zero(3, 5), Mode::Eval), ShapeMismatch);
    ForwardTape tape;
    net.forward(Mat::Zero(3, 2), Mode::Train, &tape);
    CHECK_THROWS_AS(net.backward(tape, Mat::Zero(4, 1)), ShapeMismatch);
}

TEST_CASE("finite-difference gradient check on 100 random networks") {
    CHECK(gradcheck::random_networks_error(7) <= 1e-4);
}

TEST_CASE("finite-difference gradient check on the synthetic architectures") {
    Rng rng(8);
    for (const NetSpec& s : {synthetic_generator_spec(8, 2), synthetic_discriminator_spec(), synthetic_encoder_spec(2, 8)}) {
        Mlp net = Mlp::build(s, rng);
        const Mat x = random_mat(5, net.input_dim(), rng);
        const Mat dy = random_mat(5, net.output_dim(), rng);
        CHECK(gradient_check(net, x, dy) <= 1e-4);
    }
}

TEST_CASE("spectral normalization converges to unit norm") {
    Rng rng(9);
    Mlp e = Mlp::build(synthetic_encoder_spec(), rng);
    const Mat x = random_mat(8, 2, rng);
    for (int t = 0; t < 200; ++t) e.forward(x, Mode::Train);
    for (std::size_t i = 0; i < e.layers().size(); ++i) {
        const double s = e.effective_spectral_norm(i);
        CHECK(s >= 0.99);
        CHECK(s <= 1.01);
        // Independent check through the eigenvalues of W^T W.
        const auto& l = e.layers()[i];
        const double sigma_max = std::sqrt(sym_eigen(symmetrize(l.w.transpose() * l.w)).values.maxCoeff());
        const double sigma_used = l.sn_u.dot(l.w * l.sn_v);
        CHECK(sigma_max / sigma_used == doctest::Approx(1.0).epsilon(0.01));
    }
}

TEST_CASE("eval mode is deterministic and batch independent") {
    Rng rng(10);
    Mlp g = Mlp::build(synthetic_generator_spec(), rng);
    for (int t = 0; t < 20; ++t) g.forward(random_mat(16, 64, rng), Mode::Train);
    const Mat z = random_mat(10, 64, rng);
    const Mat a = g.forward(z, Mode::Eval);
    const Mat b = g.forward(z, Mode::Eval);
    CHECK((a - b).norm() == 0.0);

    Mat zp = z;
    for (int i = 0; i < 10; ++i) zp.row(i) = z.row(9 - i);
    const Mat c = g.forward(zp, Mode::Eval);
    for (int i = 0; i < 10; ++i) CHECK((c.row(i) - a.row(9 - i)).norm() <= 1e-12);
}

TEST_CASE("batch-norm running statistics follow the batch moments") {
    Rng rng(11);
    Mlp net = Mlp::build(NetSpec{3, {{3, Activation::Linear, true, false}}}, rng);
    net.layers()[0].w = Mat::Identity(3, 3);
    const Mat x = random_mat(64, 3, rng, 2.0).array() + 5.0;
    for (int t = 0; t < 300; ++t) net.forward(x, Mode::Train);
    const Vec mean = x.colwise().mean().transpose();
    CHECK((net.layers()[0].running_mean - mean).cwiseAbs().maxCoeff() < 1e-6);
    // Eval mode then standardizes with those statistics.
    const Mat y = net.forward(x, Mode::Eval);
    CHECK(y.colwise().mean().cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("input gradient of a scalar critic") {
    Rng rng(12);
    Mlp d = Mlp::build(synthetic_discriminator_spec(), rng);
    const Mat x = random_mat(7, 2, rng);
    ForwardTape tape;
    d.forward(x, Mode::Train, &tape);
    const Mat gx = d.input_gradient(tape);
    const Mat viab = d.backward(tape, Mat::Ones(7, 1)).second;
    CHECK((gx - viab).norm() < 1e-14);

    Mlp e = Mlp::build(synthetic_encoder_spec(), rng);
    ForwardTape te;
    e.forward(x, Mode::Train, &te);
    CHECK_THROWS_AS(e.input_gradient(te), ShapeMismatch);
    CHECK_THROWS_AS(e.input_gradient_param_grads(te, Mat::Zero(7, 2)), BadSpec);
}

TEST_CASE("double-backprop parameter gradient matches finite differences") {
    Rng rng(13);
    Mlp d = Mlp::build(synthetic_discriminator_spec(), rng);
    const Mat x = random_mat(6, 2, rng);
    const Mat r = random_mat(6, 2, rng);
    auto value = [&]() {
        ForwardTape t;
        d.forward(x, Mode::Train, &t, false);
        return (d.input_gradient(t).array() * r.array()).sum();
    };
    ForwardTape tape;
    d.forward(x, Mode::Train, &tape, false);
    const ParamGrads g = d.input_gradient_param_grads(tape, r);
    const auto gb = g.blocks();
    auto blocks = d.parameter_blocks();
    double worst = 0.0;
    const double h = 1e-6;
    for (std::size_t k = 0; k < blocks.size(); ++k)
        for (std::size_t i = 0; i < blocks[k].size(); ++i) {
            const double o = blocks[k][i];
            blocks[k][i] = o + h;
            const double up = value();
            blocks[k][i] = o - h;
            const double down = value();
            blocks[k][i] = o;
            worst = std::max(worst, rel_err(gb[k][i], (up - down) / (2 * h)));
        }
    CHECK(worst <= 1e-4);
}

TEST_CASE("from_layers round trip and validation") {
    Rng rng(14);
    Mlp e = Mlp::build(synthetic_encoder_spec(), rng);
    Mlp copy = Mlp::from_layers(e.spec(), e.layers());
    const Mat x = random_mat(4, 2, rng);
    CHECK((copy.forward(x, Mode::Eval) - e.forward(x, Mode::Eval)).norm() == 0.0);

    auto layers = e.layers();
    layers[1].w = Mat::Zero(3, 3);
    CHECK_THROWS_AS(Mlp::from_layers(e.spec(), layers), BadSpec);
    layers = e.layers();
    layers[0].sn_u = Vec();
    CHECK_THROWS_AS(Mlp::from_layers(e.spec(), layers), BadSpec);
}

TEST_CASE("network optimizer moves parameters against the gradient") {
    Rng rng(15);
    Mlp net = Mlp::build(NetSpec{2, {{1, Activation::Linear, false, false}}}, rng);
    const double w0 = net.layers()[0].w(0, 0);
    ParamGrads g = net.zero_grads();
    g.layers[0].w(0, 0) = 1.0;
    NetOptimizer opt;
    opt.step(net, g, 0.01);
    CHECK(net.layers()[0].w(0, 0) == doctest::Approx(w0 - 0.01));
    CHECK(opt.states().size() == 2);
}
