#include "slogan/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace slogan {

namespace {

constexpr double kMinNorm = 1e-12;

// Rows scaled to unit length; norms returned separately.
Mat unit_rows(const Mat& x, Vec& norms, const char* who) {
    norms = x.rowwise().norm();
    for (Eigen::Index i = 0; i < norms.size(); ++i)
        if (norms(i) < kMinNorm) throw DegenerateVector(std::string(who) + ": vector norm below 1e-12");
    return norms.cwiseInverse().asDiagonal() * x;
}

// Gradient w.r.t. raw rows from gradient w.r.t. their normalized versions.
Mat unnormalize_grad(const Mat& d_hat, const Mat& hat, const Vec& norms) {
    const Vec radial = d_hat.cwiseProduct(hat).rowwise().sum();
    Mat out = d_hat - radial.asDiagonal() * hat;
    return norms.cwiseInverse().asDiagonal() * out;
}

struct MarginCos {
    double value;
    double slope;  // d cos(theta + m) / d cos(theta)
};

MarginCos margin_cos(double c, double m) {
    if (m == 0.0) return {c, 1.0};
    const double cc = std::clamp(c, -1.0, 1.0);
    const double sin_t = std::sqrt(std::max(0.0, 1.0 - cc * cc));
    const double value = cc * std::cos(m) - sin_t * std::sin(m);
    const double slope = std::cos(m) + std::sin(m) * cc / std::max(sin_t, 1e-12);
    return {value, slope};
}

}  // namespace

void LossConfig::validate() const {
    if (!(lambda_c >= 0.0)) throw ConfigError("loss.lambda must be >= 0");
    if (!(scale_s > 0.0)) throw ConfigError("loss.scale must be > 0");
    if (!(margin_m >= 0.0 && margin_m < M_PI / 2)) throw ConfigError("loss.margin must be in [0, pi/2)");
    if (!(tau > 0.0)) throw ConfigError("loss.tau must be > 0");
    if (!(lp_coeff >= 0.0)) throw ConfigError("loss.lp_coeff must be >= 0");
}

LossConfig LossConfig::at_step(long step, long total) const {
    LossConfig out = *this;
    if (!linear_decay || total <= 0) return out;
    const double f = std::max(0.0, 1.0 - static_cast<double>(step) / static_cast<double>(total));
    out.margin_m = std::max(0.0, margin_m * f);
    out.lambda_c = std::max(0.0, lambda_c * f);
    if (decay_scale) out.scale_s = std::max(0.0, scale_s * f);
    return out;
}

double adv_loss_g(double d_of_gz) { return -d_of_gz; }

CriticLoss adv_loss_d(const Vec& d_real, const Vec& d_fake) {
    if (d_real.size() != d_fake.size() || d_real.size() == 0)
        throw ShapeMismatch("adv_loss_d: batches must be nonempty and equal in size");
    const double n = static_cast<double>(d_real.size());
    CriticLoss out;
    out.value = d_fake.mean() - d_real.mean();
    out.d_real = Vec::Constant(d_real.size(), -1.0 / n);
    out.d_fake = Vec::Constant(d_fake.size(), 1.0 / n);
    return out;
}

PenaltyResult lipschitz_penalty_at(Mlp& critic, const Mat& x_real, const Mat& x_fake, const Vec& u, double coeff) {
    if (x_real.rows() != x_fake.rows() || x_real.cols() != x_fake.cols() || u.size() != x_real.rows())
        throw ShapeMismatch("lipschitz_penalty: batch shapes differ");
    const Eigen::Index b = x_real.rows();
    Mat x_hat = u.asDiagonal() * x_real;
    x_hat += (1.0 - u.array()).matrix().asDiagonal() * x_fake;

    ForwardTape tape;
    critic.forward(x_hat, Mode::Train, &tape, false);
    const Mat grad_x = critic.input_gradient(tape);

    PenaltyResult out;
    out.grad_norms = grad_x.rowwise().norm();
    Mat r = Mat::Zero(b, grad_x.cols());
    double total = 0.0;
    for (Eigen::Index i = 0; i < b; ++i) {
        const double excess = out.grad_norms(i) - 1.0;
        if (excess > 0.0) {
            total += excess * excess;
            r.row(i) = (2.0 * coeff * excess / (static_cast<double>(b) * out.grad_norms(i))) * grad_x.row(i);
        }
    }
    out.value = coeff * total / static_cast<double>(b);
    out.grads = critic.input_gradient_param_grads(tape, r);
    return out;
}

PenaltyResult lipschitz_penalty(Mlp& critic, const Mat& x_real, const Mat& x_fake, Rng& rng, double coeff) {
    Vec u(x_real.rows());
    for (Eigen::Index i = 0; i < u.size(); ++i) u(i) = rng.uniform();
    return lipschitz_penalty_at(critic, x_real, x_fake, u, coeff);
}

ContrastiveResult contrastive_loss(const Mat& e_x, const Mat& mu_c, double scale_s, double margin_m) {
    if (e_x.rows() != mu_c.rows() || e_x.cols() != mu_c.cols() || e_x.rows() == 0)
        throw ShapeMismatch("contrastive_loss: e_x and mu_C must have equal nonempty shapes");
    const Eigen::Index b = e_x.rows();
    Vec ne, nm;
    const Mat eh = unit_rows(e_x, ne, "contrastive_loss");
    const Mat mh = unit_rows(mu_c, nm, "contrastive_loss");
    const Mat cos = eh * mh.transpose();

    Mat logits = scale_s * cos;
    Vec slope(b);
    for (Eigen::Index i = 0; i < b; ++i) {
        const MarginCos mc = margin_cos(cos(i, i), margin_m);
        logits(i, i) = scale_s * mc.value;
        slope(i) = mc.slope;
    }

    ContrastiveResult out;
    out.losses.resize(b);
    Mat d_cos(b, b);
    const double log_b = std::log(static_cast<double>(b));
    for (Eigen::Index i = 0; i < b; ++i) {
        const double mx = logits.row(i).maxCoeff();
        const Eigen::RowVectorXd ex = (logits.row(i).array() - mx).exp();
        const double sum = ex.sum();
        out.losses(i) = -logits(i, i) + mx + std::log(sum) - log_b;
        const Eigen::RowVectorXd p = ex / sum;
        d_cos.row(i) = scale_s * p;
        d_cos(i, i) = scale_s * (p(i) - 1.0) * slope(i);
    }
    out.d_e = unnormalize_grad(d_cos * mh, eh, ne);
    out.d_mu_c = unnormalize_grad(d_cos.transpose() * eh, mh, nm);
    return out;
}

ProbeResult probe_loss(const std::vector<ProbeSet>& probes, const std::vector<Vec>& mu, double scale_s,
                       double margin_m) {
    const int k = static_cast<int>(mu.size());
    if (k < 2) throw ShapeMismatch("probe_loss: needs at least two components");
    if (probes.empty()) throw EmptyProbeSet("probe_loss: no probe sets");
    const int d = static_cast<int>(mu.front().size());
    Mat m_raw(k, d);
    for (int c = 0; c < k; ++c) m_raw.row(c) = mu[c].transpose();
    Vec nm;
    const Mat mh = unit_rows(m_raw, nm, "probe_loss");

    Eigen::Index total = 0;
    for (const auto& ps : probes) {
        if (ps.encoded.rows() == 0) throw EmptyProbeSet("probe_loss: empty probe set");
        if (ps.component < 0 || ps.component >= k) throw ShapeMismatch("probe_loss: bad component index");
        if (ps.encoded.cols() != d) throw ShapeMismatch("probe_loss: encoded dimension mismatch");
        total += ps.encoded.rows();
    }
    const double inv_total = 1.0 / static_cast<double>(total);

    ProbeResult out;
    Mat d_mh = Mat::Zero(k, d);
    for (const auto& ps : probes) {
        Vec ne;
        const Mat eh = unit_rows(ps.encoded, ne, "probe_loss");
        const Mat cos = eh * mh.transpose();  // n x K
        Mat d_cos(cos.rows(), k);
        for (Eigen::Index i = 0; i < cos.rows(); ++i) {
            Eigen::RowVectorXd logits = scale_s * cos.row(i);
            const MarginCos mc = margin_cos(cos(i, ps.component), margin_m);
            logits(ps.component) = scale_s * mc.value;
            const double mx = logits.maxCoeff();
            const Eigen::RowVectorXd ex = (logits.array() - mx).exp();
            const double sum = ex.sum();
            out.loss += (-logits(ps.component) + mx + std::log(sum)) * inv_total;
            const Eigen::RowVectorXd p = ex / sum;
            d_cos.row(i) = (scale_s * inv_total) * p;
            d_cos(i, ps.component) = scale_s * inv_total * (p(ps.component) - 1.0) * mc.slope;
        }
        out.d_encoded.push_back(unnormalize_grad(d_cos * mh, eh, ne));
        d_mh += d_cos.transpose() * eh;
    }
    const Mat d_m = unnormalize_grad(d_mh, mh, nm);
    for (int c = 0; c < k; ++c) out.d_mu.push_back(d_m.row(c).transpose());
    return out;
}

Mat mixup_augment(const Mat& probes, int t_rounds, Rng& rng, double alpha) {
    if (t_rounds < 0) throw ShapeMismatch("mixup_augment: negative round count");
    const Eigen::Index m = probes.rows();
    Mat out(m * (t_rounds + 1), probes.cols());
    out.topRows(m) = probes;
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(m));
    for (int t = 1; t <= t_rounds; ++t) {
        std::iota(perm.begin(), perm.end(), 0);
        for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
        for (Eigen::Index i = 0; i < m; ++i) {
            const double lam = rng.beta(alpha, alpha);
            out.row(t * m + i) = lam * probes.row(i) + (1.0 - lam) * probes.row(perm[static_cast<std::size_t>(i)]);
        }
    }
    return out;
}

}  // namespace slogan
