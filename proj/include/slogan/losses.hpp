#pragma once

#include <vector>

#include "slogan/neural.hpp"

namespace slogan {

struct LossConfig {
    double lambda_c = 4.0;   // contrastive coefficient
    double scale_s = 2.0;    // feature scale
    double margin_m = 0.5;   // additive angular margin (radians)
    double tau = 0.01;       // Gumbel-Softmax temperature
    double lp_coeff = 10.0;  // Lipschitz penalty coefficient
    bool linear_decay = true;
    /// Also decay the feature scale s (off by default; margin and lambda are
    /// always the decayed pair when linear_decay is set).
    bool decay_scale = false;

    /// Throws ConfigError when a field is out of range.
    void validate() const;

    /// Values in effect at `step` of `total`: m and lambda (and optionally s)
    /// scaled by (1 - step / total), clamped at zero.
    LossConfig at_step(long step, long total) const;
};

double adv_loss_g(double d_of_gz);

struct CriticLoss {
    double value = 0.0;
    Vec d_real;  // d value / d D(x_real_i)
    Vec d_fake;
};

/// mean(d_fake) - mean(d_real).
CriticLoss adv_loss_d(const Vec& d_real, const Vec& d_fake);

struct PenaltyResult {
    double value = 0.0;
    ParamGrads grads;
    Vec grad_norms;
};

/// coeff * mean_i max(0, |grad_x D(x_hat_i)| - 1)^2 on random interpolates
/// x_hat_i = u_i x_real_i + (1 - u_i) x_fake_i.
PenaltyResult lipschitz_penalty(Mlp& critic, const Mat& x_real, const Mat& x_fake, Rng& rng, double coeff);

/// Same, with the interpolation weights supplied.
PenaltyResult lipschitz_penalty_at(Mlp& critic, const Mat& x_real, const Mat& x_fake, const Vec& u, double coeff);

struct ContrastiveResult {
    Vec losses;   // per-sample l^c
    Mat d_e;      // d (sum_i l^c_i) / d e_x
    Mat d_mu_c;   // d (sum_i l^c_i) / d mu_C
};

/// Contrastive loss with additive angular margin on the positive pair; the
/// denominator averages over the batch including the positive term.
ContrastiveResult contrastive_loss(const Mat& e_x, const Mat& mu_c, double scale_s, double margin_m);

struct ProbeSet {
    int component = 0;
    Mat encoded;  // E(x) for each probe of this component
};

struct ProbeResult {
    double loss = 0.0;
    std::vector<Mat> d_encoded;  // per probe set, gradient of the mean loss
    std::vector<Vec> d_mu;       // per component
};

/// Softmax cross-entropy over scaled cosine similarities to every mean, with
/// the margin on the target component.
ProbeResult probe_loss(const std::vector<ProbeSet>& probes, const std::vector<Vec>& mu, double scale_s,
                       double margin_m);

/// Appends t_rounds rounds of mixup between the probes and a random
/// permutation of themselves; mixing weights ~ Beta(alpha, alpha).
Mat mixup_augment(const Mat& probes, int t_rounds, Rng& rng, double alpha = 1.0);

}  // namespace slogan
