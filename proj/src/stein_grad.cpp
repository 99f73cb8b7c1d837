#include "slogan/stein_grad.hpp"

#include <cmath>

namespace slogan {

namespace {

void require_nonempty(std::span<const PerSampleGrad> batch, const char* who) {
    if (batch.empty()) throw EmptyBatch(std::string(who) + ": empty batch");
}

// Lower triangle with halved diagonal.
Mat phi(const Mat& m) {
    Mat out = m.triangularView<Eigen::Lower>();
    out.diagonal() *= 0.5;
    return out;
}

}  // namespace

Vec mu_contribution(const PerSampleGrad& s, int c) {
    return (s.delta(c) * s.pi(c)) * s.dz;
}

Mat sigma_contribution(const PerSampleGrad& s, int c, const MixturePrior& prior) {
    const Vec w = prior.sigma[c].solve(Vec(s.z - prior.mu[c]));
    const Mat outer = (s.delta(c) * s.pi(c)) * (w * s.dz.transpose());
    return -0.25 * (outer + outer.transpose());
}

Vec rho_contribution(const PerSampleGrad& s) {
    return (s.pi.array() * (s.delta.array() - 1.0) * s.adv_loss).matrix();
}

Vec grad_mu(std::span<const PerSampleGrad> batch, int c) {
    require_nonempty(batch, "grad_mu");
    Vec acc = Vec::Zero(batch.front().dz.size());
    for (const auto& s : batch) acc += (s.delta(c) * s.pi(c)) * s.dz;
    return acc / static_cast<double>(batch.size());
}

Mat grad_sigma(std::span<const PerSampleGrad> batch, int c, const MixturePrior& prior) {
    require_nonempty(batch, "grad_sigma");
    const int d = prior.dim();
    const int b = static_cast<int>(batch.size());
    // Stack weighted Sigma^{-1}(z - mu) columns and latent gradients, then a
    // single product forms sum_i S_i.
    Mat centered(d, b);
    Mat grads(b, d);
    for (int i = 0; i < b; ++i) {
        const auto& s = batch[static_cast<std::size_t>(i)];
        centered.col(i) = (s.delta(c) * s.pi(c)) * (s.z - prior.mu[c]);
        grads.row(i) = s.dz.transpose();
    }
    const Mat w = prior.sigma[c].solve(centered);
    const Mat sum_s = w * grads;
    Mat out = -(sum_s + sum_s.transpose()) / (4.0 * b);
    return symmetrize(out);
}

Vec grad_rho(std::span<const PerSampleGrad> batch) {
    require_nonempty(batch, "grad_rho");
    Vec acc = Vec::Zero(batch.front().pi.size());
    for (const auto& s : batch) acc += rho_contribution(s);
    return acc / static_cast<double>(batch.size());
}

PriorGradients estimate_prior_gradients(std::span<const PerSampleGrad> batch, const MixturePrior& prior) {
    require_nonempty(batch, "estimate_prior_gradients");
    const int k = prior.k();
    PriorGradients g;
    g.d_mu.resize(static_cast<std::size_t>(k));
    g.d_sigma.resize(static_cast<std::size_t>(k));
    parallel_for(static_cast<std::size_t>(k), [&](std::size_t c) {
        g.d_mu[c] = grad_mu(batch, static_cast<int>(c));
        g.d_sigma[c] = grad_sigma(batch, static_cast<int>(c), prior);
    });
    g.d_rho = grad_rho(batch);
    return g;
}

void apply_sigma_update(MixturePrior& prior, int c, const Mat& delta_sigma, double gamma_sigma) {
    const SpdMat& sigma = prior.sigma[static_cast<std::size_t>(c)];
    if (delta_sigma.rows() != sigma.dim() || delta_sigma.cols() != sigma.dim())
        throw ShapeMismatch("apply_sigma_update: shape mismatch");
    if (gamma_sigma == 0.0) return;
    const Mat correction = delta_sigma * sigma.solve(delta_sigma);
    Mat updated = sigma.full() + gamma_sigma * delta_sigma + (0.5 * gamma_sigma * gamma_sigma) * correction;
    prior.sigma[static_cast<std::size_t>(c)] = SpdMat::factor(symmetrize(updated));
}

void apply_mu_update(MixturePrior& prior, const PriorGradients& g, double lr) {
    if (lr == 0.0) return;
    for (int c = 0; c < prior.k(); ++c) prior.mu[c] -= lr * g.d_mu[c];
}

void apply_sigma_updates(MixturePrior& prior, const PriorGradients& g, double lr) {
    if (lr == 0.0) return;
    for (int c = 0; c < prior.k(); ++c) apply_sigma_update(prior, c, g.d_sigma[c], lr);
}

void apply_rho_update(MixturePrior& prior, const PriorGradients& g, double lr) {
    if (lr == 0.0) return;
    prior.rho -= lr * g.d_rho;
}

void clip_latent_gradients(std::vector<PerSampleGrad>& batch, double max_norm) {
    if (!(max_norm > 0.0)) return;
    for (auto& s : batch) {
        const double n = s.dz.norm();
        if (n > max_norm) s.dz *= max_norm / n;
    }
}

std::vector<PerSampleGrad> make_per_sample(const MixturePrior& prior, const LatentBatch& batch, const Vec& loss,
                                           const Vec& adv_loss, const Mat& dz) {
    const int b = batch.size();
    if (loss.size() != b || adv_loss.size() != b || dz.rows() != b || dz.cols() != prior.dim())
        throw ShapeMismatch("make_per_sample: shape mismatch");
    const Vec pi = prior.pi();
    std::vector<PerSampleGrad> out(static_cast<std::size_t>(b));
    for (int i = 0; i < b; ++i) {
        auto& s = out[static_cast<std::size_t>(i)];
        s.z = batch.z.row(i).transpose();
        s.loss = loss(i);
        s.adv_loss = adv_loss(i);
        s.dz = dz.row(i).transpose();
        s.delta = batch.delta.row(i).transpose();
        s.pi = pi;
    }
    return out;
}

PriorGradients explicit_reparam_grads(const MixturePrior& prior, int b, const LatentLoss& loss_fn, Rng& rng) {
    if (b < 1) throw EmptyBatch("explicit_reparam_grads: empty batch");
    const int k = prior.k();
    const int d = prior.dim();
    const Vec pi = prior.pi();
    PriorGradients g;
    g.d_mu.assign(static_cast<std::size_t>(k), Vec::Zero(d));
    std::vector<Mat> d_chol(static_cast<std::size_t>(k), Mat::Zero(d, d));
    g.d_rho = Vec::Zero(k);
    Vec eps(d), grad(d);
    for (int i = 0; i < b; ++i) {
        const auto c = static_cast<int>(rng.categorical(as_span(pi)));
        for (int j = 0; j < d; ++j) eps(j) = rng.normal();
        const Vec z = prior.mu[c] + prior.sigma[c].chol().triangularView<Eigen::Lower>() * eps;
        grad.setZero();
        const double l = loss_fn(z, grad);
        g.d_mu[c] += grad;
        d_chol[c] += grad * eps.transpose();
        // Score function of the categorical draw: d log pi_c / d rho_k = 1[c=k] - pi_k.
        for (int kk = 0; kk < k; ++kk) g.d_rho(kk) += ((kk == c ? 1.0 : 0.0) - pi(kk)) * l;
    }
    g.d_sigma.resize(static_cast<std::size_t>(k));
    for (int c = 0; c < k; ++c) {
        g.d_mu[c] /= b;
        const Mat lbar = (d_chol[c] / b).triangularView<Eigen::Lower>();
        // Map dL/dL_chol to the symmetric gradient w.r.t. Sigma = L L^T.
        const Mat& l = prior.sigma[c].chol();
        const Mat p = phi(l.transpose() * lbar);
        const Mat s = 0.5 * (p + p.transpose());
        Mat linv_t_s = l.transpose().triangularView<Eigen::Upper>().solve(s);
        Mat grad_sigma = l.transpose().triangularView<Eigen::Upper>().solve(Mat(linv_t_s.transpose()));
        // Delta Sigma convention: negative gradient.
        g.d_sigma[c] = -symmetrize(grad_sigma);
    }
    g.d_rho /= b;
    return g;
}

VarianceComparison compare_mu_estimator_variance(const MixturePrior& prior, int b, const LatentLoss& loss_fn,
                                                 Rng& rng) {
    if (b < 2) throw EmptyBatch("compare_mu_estimator_variance: need at least two samples");
    const int k = prior.k();
    const int d = prior.dim();
    const Vec pi = prior.pi();

    std::vector<Vec> sum_i(static_cast<std::size_t>(k), Vec::Zero(d)), sq_i(static_cast<std::size_t>(k), Vec::Zero(d));
    std::vector<Vec> sum_e(static_cast<std::size_t>(k), Vec::Zero(d)), sq_e(static_cast<std::size_t>(k), Vec::Zero(d));
    Vec eps(d), grad(d);

    // Implicit estimator on its own draws.
    const LatentBatch lb = sample(prior, b, rng);
    for (int i = 0; i < b; ++i) {
        grad.setZero();
        loss_fn(lb.z.row(i).transpose(), grad);
        for (int c = 0; c < k; ++c) {
            const Vec contrib = lb.resp(i, c) * grad;
            sum_i[c] += contrib;
            sq_i[c] += contrib.cwiseProduct(contrib);
        }
    }
    // Explicit estimator on independent draws.
    for (int i = 0; i < b; ++i) {
        const auto sel = static_cast<int>(rng.categorical(as_span(pi)));
        for (int j = 0; j < d; ++j) eps(j) = rng.normal();
        const Vec z = prior.mu[sel] + prior.sigma[sel].chol().triangularView<Eigen::Lower>() * eps;
        grad.setZero();
        loss_fn(z, grad);
        sum_e[sel] += grad;
        sq_e[sel] += grad.cwiseProduct(grad);
    }

    VarianceComparison out;
    const double n = static_cast<double>(b);
    for (int c = 0; c < k; ++c) {
        out.implicit_variance += ((sq_i[c] - sum_i[c].cwiseProduct(sum_i[c]) / n) / (n - 1.0)).sum();
        out.explicit_variance += ((sq_e[c] - sum_e[c].cwiseProduct(sum_e[c]) / n) / (n - 1.0)).sum();
    }
    return out;
}

}  // namespace slogan
