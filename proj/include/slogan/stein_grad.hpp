#pragma once

#include <functional>
#include <span>
#include <vector>

#include "slogan/mixture_prior.hpp"

namespace slogan {

/// Everything the prior-parameter estimators need from one latent sample.
/// `loss`/`dz` are the combined loss and its latent gradient (used for mu and
/// Sigma); `adv_loss` is the adversarial part alone (used for rho).
struct PerSampleGrad {
    Vec z;
    double loss = 0.0;
    double adv_loss = 0.0;
    Vec dz;
    Vec delta;
    Vec pi;
};

struct PriorGradients {
    std::vector<Vec> d_mu;
    std::vector<Mat> d_sigma;  // Delta Sigma_c, before the positive-definite correction
    Vec d_rho;
};

/// delta(z)_c pi_c dl/dz for a single sample.
Vec mu_contribution(const PerSampleGrad& s, int c);
/// -(S + S^T) / 4 with S = delta_c pi_c Sigma_c^{-1} (z - mu_c) dl/dz^T.
Mat sigma_contribution(const PerSampleGrad& s, int c, const MixturePrior& prior);
/// pi_c (delta_c - 1) l^a for every component.
Vec rho_contribution(const PerSampleGrad& s);

/// Batch mean of mu_contribution: estimate of dL/dmu_c.
Vec grad_mu(std::span<const PerSampleGrad> batch, int c);
/// Delta Sigma_c = -(1/4B) sum_i (S_i + S_i^T). Exactly symmetric.
Mat grad_sigma(std::span<const PerSampleGrad> batch, int c, const MixturePrior& prior);
/// Batch mean of rho_contribution, using adv_loss only.
Vec grad_rho(std::span<const PerSampleGrad> batch);

PriorGradients estimate_prior_gradients(std::span<const PerSampleGrad> batch, const MixturePrior& prior);

/// Sigma' = Sigma + g Delta + (g^2 / 2) Delta Sigma^{-1} Delta, re-factorized.
/// Throws NotPositiveDefinite only if the preconditions were violated.
void apply_sigma_update(MixturePrior& prior, int c, const Mat& delta_sigma, double gamma_sigma);

struct PriorLearningRates {
    double mu = 0.0;
    double sigma = 0.0;
    double rho = 0.0;
};

void apply_mu_update(MixturePrior& prior, const PriorGradients& g, double lr);
void apply_sigma_updates(MixturePrior& prior, const PriorGradients& g, double lr);
void apply_rho_update(MixturePrior& prior, const PriorGradients& g, double lr);

/// Rescales each per-sample dz to at most max_norm (no-op when max_norm <= 0).
void clip_latent_gradients(std::vector<PerSampleGrad>& batch, double max_norm);

/// Builds PerSampleGrad records from an annotated latent batch plus per-sample
/// losses and latent gradients.
std::vector<PerSampleGrad> make_per_sample(const MixturePrior& prior, const LatentBatch& batch,
                                           const Vec& loss, const Vec& adv_loss, const Mat& dz);

/// Loss with a latent gradient: returns l(z) and writes dl/dz into grad.
using LatentLoss = std::function<double(const Vec& z, Vec& grad)>;

/// Explicit (ancestral) reparameterization baseline. Each sample only updates
/// the component it was drawn from: mean via dl/dz, covariance via the chain
/// rule through the Cholesky factor, rho via the score function.
PriorGradients explicit_reparam_grads(const MixturePrior& prior, int b, const LatentLoss& loss_fn, Rng& rng);

/// Variance of the per-sample mean-gradient contributions of both estimators,
/// summed over components and coordinates, measured on independent draws of
/// size b.
struct VarianceComparison {
    double implicit_variance = 0.0;
    double explicit_variance = 0.0;
};

VarianceComparison compare_mu_estimator_variance(const MixturePrior& prior, int b, const LatentLoss& loss_fn,
                                                 Rng& rng);

}  // namespace slogan
