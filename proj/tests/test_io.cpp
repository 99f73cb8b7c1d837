#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "slogan/io.hpp"

using namespace slogan;

namespace {

TrainConfig tiny_config() {
    TrainConfig c = synthetic_preset();
    c.k = 3;
    c.latent_dim = 4;
    c.batch_b = 8;
    c.steps = 6;
    c.seed = 21;
    c.g_spec = synthetic_generator_spec(4, 2);
    c.e_spec = synthetic_encoder_spec(2, 4);
    return c;
}

const LabeledDataset& data() {
    static const LabeledDataset ds = make_synthetic_8gauss(4, {10, 10, 10, 10, 30, 30, 30, 30});
    return ds;
}

}  // namespace

TEST_CASE("prior round trip is exact") {
    Rng rng(1);
    MixturePrior p = init_prior(3, 5, rng);
    p.rho << 0.1, -0.3, 1.0 / 3.0;
    const MixturePrior q = prior_from_json(Json::parse(to_json(p).dump()));
    for (int c = 0; c < 3; ++c) {
        CHECK((p.mu[c] - q.mu[c]).norm() == 0.0);
        CHECK((p.sigma[c].full() - q.sigma[c].full()).norm() == 0.0);
    }
    CHECK((p.rho - q.rho).norm() == 0.0);
    Json bad = to_json(p);
    bad["mu"].erase(0);
    CHECK_THROWS_AS(prior_from_json(bad), ConfigError);
}

TEST_CASE("network and config round trips") {
    Rng rng(2);
    Mlp g = Mlp::build(synthetic_generator_spec(4, 2), rng);
    Mlp e = Mlp::build(synthetic_encoder_spec(2, 4), rng);
    const Mat z = Mat::Random(5, 4);
    g.forward(z, Mode::Train);
    Mlp g2 = net_from_json(Json::parse(to_json(g).dump()));
    Mlp e2 = net_from_json(Json::parse(to_json(e).dump()));
    CHECK((g2.forward(z, Mode::Eval) - g.forward(z, Mode::Eval)).norm() == 0.0);
    const Mat x = Mat::Random(5, 2);
    CHECK((e2.forward(x, Mode::Eval) - e.forward(x, Mode::Eval)).norm() == 0.0);

    TrainConfig c = tiny_config();
    c.loss.decay_scale = true;
    c.latent_grad_clip = 2.5;
    const TrainConfig c2 = train_config_from_json(to_json(c));
    CHECK(to_json(c2) == to_json(c));
    CHECK(c2.loss.decay_scale);
    CHECK(c2.g_spec.layers[0].batch_norm);
}

TEST_CASE("checkpoint resume reproduces an uninterrupted run") {
    const TrainConfig c = tiny_config();
    const TrainResult whole = train(c, data());

    TrainState st = init_state(c);
    train_more(st, data(), 3);
    const std::string text = checkpoint_to_json(st).dump();
    TrainState resumed = state_from_checkpoint(Json::parse(text));
    CHECK(resumed.step == 3);
    train_more(resumed, data(), 3);

    for (int k = 0; k < 3; ++k) CHECK((resumed.prior.mu[k] - whole.state.prior.mu[k]).norm() == 0.0);
    CHECK(checkpoint_to_json(resumed) == checkpoint_to_json(whole.state));
}

TEST_CASE("malformed checkpoints are rejected") {
    TrainState st = init_state(tiny_config());
    Json j = checkpoint_to_json(st);
    CHECK(j["format"] == "slogan-checkpoint-1");
    Json wrong = j;
    wrong["format"] = "something-else";
    CHECK_THROWS_AS(state_from_checkpoint(wrong), ConfigError);
    Json missing = j;
    missing.erase("prior");
    CHECK_THROWS_AS(state_from_checkpoint(missing), ConfigError);
    CHECK_THROWS_AS(state_from_checkpoint(Json::array()), ConfigError);
}

TEST_CASE("report serialization") {
    EvalReport r;
    r.ari = 0.5;
    r.nmi = 0.25;
    r.fid = 1.0;
    r.icfid = 2.0;
    r.icfid_detail.assignment = {1, 0};
    r.icfid_detail.per_class = {1.5, 2.5};
    r.pi = (Vec(2) << 0.3, 0.7).finished();
    const Json j = to_json(r);
    CHECK(j["ari"] == 0.5);
    CHECK(j["assignment"]["0"] == 1);
    CHECK(j["pi"][1] == 0.7);

    StepReport s;
    s.step = 4;
    s.pi = (Vec(1) << 1.0).finished();
    s.grad_norm_mu = {0.1};
    s.grad_norm_sigma = {0.2};
    const Json sj = to_json(s);
    CHECK(sj["step"] == 4);
    CHECK(sj.contains("grad_norms"));
}

TEST_CASE("json files") {
    const auto path = std::filesystem::temp_directory_path() / "slogan_io_test.json";
    const Json j = {{"a", 0.1}, {"b", {1, 2, 3}}};
    write_json_file(path.string(), j);
    CHECK(read_json_file(path.string()) == j);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(read_json_file("/nonexistent/file.json"), ConfigError);
}
