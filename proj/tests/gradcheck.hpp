#pragma once

// Finite-difference checks shared by the unit tests and the acceptance run.

#include <algorithm>
#include <cmath>
#include <vector>

#include "slogan/losses.hpp"
#include "slogan/neural.hpp"

namespace slogan::gradcheck {

inline Mat random_mat(int r, int c, Rng& rng, double scale = 1.0) {
    Mat m(r, c);
    rng.fill_normal(as_span(m));
    return scale * m;
}

inline double rel_err(double a, double f, double floor) {
    return std::abs(a - f) / std::max({std::abs(a), std::abs(f), floor});
}

// Fourth-order central difference; keeps roundoff and truncation well below
// the tolerance for small gradients.
template <class F>
double central_difference(F&& f, double x0, double h) {
    return (-f(x0 + 2 * h) + 8 * f(x0 + h) - 8 * f(x0 - h) + f(x0 - 2 * h)) / (12 * h);
}

inline NetSpec random_spec(Rng& rng) {
    static const Activation acts[] = {Activation::Relu, Activation::LeakyRelu, Activation::Tanh, Activation::Sigmoid,
                                      Activation::Linear};
    NetSpec s;
    s.input_dim = 1 + static_cast<int>(rng.below(16));
    const int n = 1 + static_cast<int>(rng.below(3));
    for (int i = 0; i < n; ++i) {
        LayerSpec l;
        l.units = 1 + static_cast<int>(rng.below(16));
        l.activation = acts[rng.below(5)];
        l.batch_norm = rng.uniform() < 0.3;
        l.spectral_norm = rng.uniform() < 0.3;
        s.layers.push_back(l);
    }
    return s;
}

// Scalar objective sum(dy .* net(x)) evaluated in train mode without touching
// running statistics or power-iteration vectors.
inline double objective(Mlp& net, const Mat& x, const Mat& dy) {
    return (net.forward(x, Mode::Train, nullptr, false).array() * dy.array()).sum();
}

/// Worst relative error over every parameter and input coordinate of `net`.
inline double network_error(Mlp& net, const Mat& x, const Mat& dy, double h = 1e-5) {
    ForwardTape tape;
    net.forward(x, Mode::Train, &tape, false);
    auto [grads, dx] = net.backward(tape, dy);
    double worst = 0.0;
    auto blocks = net.parameter_blocks();
    const auto gblocks = grads.blocks();
    for (std::size_t k = 0; k < blocks.size(); ++k) {
        for (std::size_t i = 0; i < blocks[k].size(); ++i) {
            const double orig = blocks[k][i];
            const double fd = central_difference([&](double v) {
                blocks[k][i] = v;
                return objective(net, x, dy);
            }, orig, h);
            blocks[k][i] = orig;
            worst = std::max(worst, rel_err(gblocks[k][i], fd, 1e-5));
        }
    }
    Mat xp = x;
    for (int r = 0; r < x.rows(); ++r)
        for (int c = 0; c < x.cols(); ++c) {
            const double fd = central_difference([&](double v) {
                xp(r, c) = v;
                return objective(net, xp, dy);
            }, x(r, c), h);
            xp(r, c) = x(r, c);
            worst = std::max(worst, rel_err(dx(r, c), fd, 1e-5));
        }
    return worst;
}

/// Worst error over `instances` random networks (up to three layers of at most
/// 16 units, random activations, batch norm and spectral norm).
inline double random_networks_error(std::uint64_t seed, int instances = 100) {
    Rng rng(seed);
    double worst = 0.0;
    for (int t = 0; t < instances; ++t) {
        Mlp net = Mlp::build(random_spec(rng), rng);
        // Nonzero biases keep dead ReLU inputs off the kink at exactly zero.
        for (auto& l : net.layers()) l.b = random_mat(static_cast<int>(l.b.size()), 1, rng, 0.1).col(0);
        // Batch norm over two rows saturates to +-1, leaving only roundoff-sized gradients.
        const int b = 3 + static_cast<int>(rng.below(4));
        const Mat x = random_mat(b, net.input_dim(), rng);
        const Mat dy = random_mat(b, net.output_dim(), rng);
        worst = std::max(worst, network_error(net, x, dy));
    }
    return worst;
}

/// Worst error of the contrastive-loss gradients (encodings and assigned
/// means) over random instances.
inline double contrastive_error(std::uint64_t seed, int instances = 100) {
    Rng rng(seed);
    const double h = 1e-6;
    double worst = 0.0;
    for (int t = 0; t < instances; ++t) {
        const int b = 2 + static_cast<int>(rng.below(5));
        const int d = 2 + static_cast<int>(rng.below(5));
        const double s = 0.5 + 3.0 * rng.uniform();
        const double m = 0.6 * rng.uniform();
        Mat e = random_mat(b, d, rng), mu = random_mat(b, d, rng);
        const ContrastiveResult r = contrastive_loss(e, mu, s, m);
        auto total = [&] { return contrastive_loss(e, mu, s, m).losses.sum(); };
        for (int i = 0; i < b; ++i)
            for (int j = 0; j < d; ++j) {
                const double o = e(i, j);
                const double fe = central_difference([&](double v) { e(i, j) = v; return total(); }, o, h);
                e(i, j) = o;
                worst = std::max(worst, rel_err(r.d_e(i, j), fe, 1e-6));
                const double p = mu(i, j);
                const double fm = central_difference([&](double v) { mu(i, j) = v; return total(); }, p, h);
                mu(i, j) = p;
                worst = std::max(worst, rel_err(r.d_mu_c(i, j), fm, 1e-6));
            }
    }
    return worst;
}

/// Worst error of the probe-loss gradients (encodings and means) over random
/// instances.
inline double probe_error(std::uint64_t seed, int instances = 100) {
    Rng rng(seed);
    const double h = 1e-6;
    double worst = 0.0;
    for (int t = 0; t < instances; ++t) {
        const int k = 2 + static_cast<int>(rng.below(3));
        const int d = 2 + static_cast<int>(rng.below(4));
        const double s = 0.5 + 3.0 * rng.uniform();
        const double m = 0.6 * rng.uniform();
        std::vector<Vec> mu;
        for (int c = 0; c < k; ++c) mu.push_back(random_mat(d, 1, rng).col(0));
        std::vector<ProbeSet> sets{{0, random_mat(3, d, rng)}, {k - 1, random_mat(2, d, rng)}};
        const ProbeResult r = probe_loss(sets, mu, s, m);
        auto total = [&] { return probe_loss(sets, mu, s, m).loss; };
        for (std::size_t p = 0; p < sets.size(); ++p)
            for (int i = 0; i < sets[p].encoded.rows(); ++i)
                for (int j = 0; j < d; ++j) {
                    double& x = sets[p].encoded(i, j);
                    const double o = x;
                    const double f = central_difference([&](double v) { x = v; return total(); }, o, h);
                    x = o;
                    worst = std::max(worst, rel_err(r.d_encoded[p](i, j), f, 1e-6));
                }
        for (int c = 0; c < k; ++c)
            for (int j = 0; j < d; ++j) {
                const double o = mu[c](j);
                const double f = central_difference([&](double v) { mu[c](j) = v; return total(); }, o, h);
                mu[c](j) = o;
                worst = std::max(worst, rel_err(r.d_mu[c](j), f, 1e-6));
            }
    }
    return worst;
}

}  // namespace slogan::gradcheck
