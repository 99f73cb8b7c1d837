#include "slogan/mixture_prior.hpp"

#include <cmath>

namespace slogan {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

}  // namespace

Vec MixturePrior::pi() const {
    return log_pi().array().exp();
}

Vec MixturePrior::log_pi() const {
    const double lse = log_sum_exp(rho);
    return rho.array() - lse;
}

void MixturePrior::validate() const {
    if (mu.empty()) throw ShapeMismatch("MixturePrior: no components");
    if (sigma.size() != mu.size() || static_cast<std::size_t>(rho.size()) != mu.size())
        throw ShapeMismatch("MixturePrior: mu/sigma/rho component counts differ");
    const auto d = mu.front().size();
    for (std::size_t c = 0; c < mu.size(); ++c) {
        if (mu[c].size() != d || sigma[c].dim() != d)
            throw ShapeMismatch("MixturePrior: component " + std::to_string(c) + " has wrong dimension");
    }
}

MixturePrior init_prior(int k, int dim, Rng& rng, const PriorInit& init) {
    if (k < 1 || dim < 1) throw ShapeMismatch("init_prior: k and dim must be positive");
    MixturePrior p;
    const double sd = std::sqrt(init.mu_variance);
    for (int c = 0; c < k; ++c) {
        Vec m(dim);
        for (int i = 0; i < dim; ++i) m(i) = sd * rng.normal();
        p.mu.push_back(std::move(m));
        p.sigma.push_back(SpdMat::identity(dim));
    }
    p.rho = Vec::Zero(k);
    return p;
}

Vec log_component_densities(const MixturePrior& prior, const Vec& z) {
    if (z.size() != prior.dim()) throw ShapeMismatch("log_component_densities: z has wrong dimension");
    const int k = prior.k();
    Vec out(k);
    for (int c = 0; c < k; ++c) {
        const Vec w = prior.sigma[c].solve_lower(z - prior.mu[c]);
        out(c) = -0.5 * (prior.dim() * kLog2Pi + prior.sigma[c].log_det() + w.squaredNorm());
    }
    return out;
}

Mat log_component_densities(const MixturePrior& prior, const Mat& z) {
    if (z.cols() != prior.dim()) throw ShapeMismatch("log_component_densities: z has wrong dimension");
    const int k = prior.k();
    Mat out(z.rows(), k);
    for (int c = 0; c < k; ++c) {
        Mat centered = (z.rowwise() - prior.mu[c].transpose()).transpose();
        prior.sigma[c].chol().triangularView<Eigen::Lower>().solveInPlace(centered);
        const Vec sq = centered.colwise().squaredNorm().transpose();
        out.col(c) = (-0.5 * (prior.dim() * kLog2Pi + prior.sigma[c].log_det()) - 0.5 * sq.array()).matrix();
    }
    return out;
}

double log_density(const MixturePrior& prior, const Vec& z) {
    const Vec terms = log_component_densities(prior, z) + prior.log_pi();
    return log_sum_exp(terms);
}

Responsibilities responsibilities(const MixturePrior& prior, const Vec& z) {
    const Vec lc = log_component_densities(prior, z);
    const Vec lp = prior.log_pi();
    const double lq = log_sum_exp(Vec(lc + lp));
    Responsibilities r;
    r.delta = (lc.array() - lq).exp();
    r.log_resp = (lc + lp).array() - lq;
    r.resp = r.log_resp.array().exp();
    return r;
}

Vec gumbel_softmax(const Vec& log_resp, const Vec& gumbel, double tau) {
    if (log_resp.size() != gumbel.size()) throw ShapeMismatch("gumbel_softmax: size mismatch");
    if (!(tau > 0.0)) throw ShapeMismatch("gumbel_softmax: tau must be positive");
    Vec logits = (log_resp + gumbel) / tau;
    const double lse = log_sum_exp(logits);
    return (logits.array() - lse).exp();
}

Vec gumbel_softmax_assign(const Vec& resp, double tau, Rng& rng) {
    Vec log_resp(resp.size());
    for (Eigen::Index c = 0; c < resp.size(); ++c)
        log_resp(c) = resp(c) > 0.0 ? std::log(resp(c)) : -745.0;
    Vec g(resp.size());
    for (Eigen::Index c = 0; c < resp.size(); ++c) g(c) = rng.gumbel();
    return gumbel_softmax(log_resp, g, tau);
}

Vec mixture_mean_of_assignment(const MixturePrior& prior, const Vec& comp_relaxed) {
    if (comp_relaxed.size() != prior.k()) throw ShapeMismatch("mixture_mean_of_assignment: size mismatch");
    Vec out = Vec::Zero(prior.dim());
    for (int c = 0; c < prior.k(); ++c) out += comp_relaxed(c) * prior.mu[c];
    return out;
}

LatentBatch annotate(const MixturePrior& prior, const Mat& z, Rng& rng, double tau) {
    const int b = static_cast<int>(z.rows());
    const int k = prior.k();
    LatentBatch out;
    out.z = z;
    out.log_comp_density = log_component_densities(prior, z);
    out.log_mix_density.resize(b);
    out.delta.resize(b, k);
    out.resp.resize(b, k);
    out.log_resp.resize(b, k);
    out.gumbel.resize(b, k);
    out.comp_relaxed.resize(b, k);
    out.comp_hard.assign(static_cast<std::size_t>(b), 0);
    out.ancestor.assign(static_cast<std::size_t>(b), -1);
    const Vec lp = prior.log_pi();
    for (int i = 0; i < b; ++i) {
        const Vec joint = out.log_comp_density.row(i).transpose() + lp;
        const double lq = log_sum_exp(joint);
        out.log_mix_density(i) = lq;
        int best = 0;
        for (int c = 0; c < k; ++c) {
            out.delta(i, c) = std::exp(out.log_comp_density(i, c) - lq);
            out.log_resp(i, c) = joint(c) - lq;
            out.resp(i, c) = std::exp(out.log_resp(i, c));
            if (out.log_resp(i, c) > out.log_resp(i, best)) best = c;
        }
        out.comp_hard[static_cast<std::size_t>(i)] = best;
        for (int c = 0; c < k; ++c) out.gumbel(i, c) = rng.gumbel();
        out.comp_relaxed.row(i) =
            gumbel_softmax(out.log_resp.row(i).transpose(), out.gumbel.row(i).transpose(), tau).transpose();
    }
    return out;
}

LatentBatch sample(const MixturePrior& prior, int b, Rng& rng, double tau) {
    if (b < 1) throw ShapeMismatch("sample: batch size must be positive");
    const Vec pi = prior.pi();
    const int d = prior.dim();
    Mat z(b, d);
    std::vector<int> anc(static_cast<std::size_t>(b));
    Vec eps(d);
    for (int i = 0; i < b; ++i) {
        const auto c = static_cast<int>(rng.categorical(as_span(pi)));
        anc[static_cast<std::size_t>(i)] = c;
        for (int j = 0; j < d; ++j) eps(j) = rng.normal();
        z.row(i) = (prior.mu[c] + prior.sigma[c].chol().triangularView<Eigen::Lower>() * eps).transpose();
    }
    LatentBatch out = annotate(prior, z, rng, tau);
    out.ancestor = std::move(anc);
    return out;
}

Mat sample_component(const MixturePrior& prior, int c, int n, Rng& rng) {
    if (c < 0 || c >= prior.k()) throw ShapeMismatch("sample_component: bad component index");
    const int d = prior.dim();
    Mat eps(n, d);
    rng.fill_normal(as_span(eps));
    Mat z = eps * prior.sigma[c].chol().transpose();
    z.rowwise() += prior.mu[c].transpose();
    return z;
}

}  // namespace slogan
