#pragma once

#include <string>
#include <vector>

#include "slogan/stein_grad.hpp"

namespace slogan {

/// l(z) = z^T A z + b^T z with A symmetric.
struct Quadratic {
    Mat a;
    Vec b;

    double value(const Vec& z) const { return z.dot(a * z) + b.dot(z); }
    Vec grad(const Vec& z) const { return 2.0 * (a * z) + b; }
    LatentLoss as_loss() const;
};

/// Symmetric A with N(0, 1/d) entries and N(0, 1) b.
Quadratic random_quadratic(int dim, Rng& rng);

/// Random test prior: means ~ N(0, spread^2 I), covariances R R^T / d + 0.5 I,
/// rho ~ N(0, 0.5^2).
MixturePrior random_prior(int k, int dim, Rng& rng, double spread = 1.0);

/// Closed-form gradients of L = E_q[l] = sum_c pi_c f_c with
/// f_c = tr(A Sigma_c) + mu_c^T A mu_c + b^T mu_c.
struct QuadraticOracle {
    std::vector<Vec> d_mu;     // pi_c (2 A mu_c + b)
    std::vector<Mat> d_sigma;  // pi_c A  (gradient, i.e. -Delta Sigma)
    Vec d_rho;                 // pi_c (f_c - L)
    Vec f;
    double expected_loss = 0.0;
};

QuadraticOracle quadratic_oracle(const MixturePrior& prior, const Quadratic& q);

enum class Fault { None, FlipMuSign, FlipSigmaSign, FlipRhoSign };

/// Monte-Carlo average of the batch estimators over n samples in batches of
/// batch_size, with standard errors from the spread of the batch means.
struct McEstimate {
    std::vector<Vec> d_mu, se_mu;
    std::vector<Mat> d_sigma, se_sigma;  // gradient (-Delta Sigma)
    Vec d_rho, se_rho;
    double max_rho_sum = 0.0;        // max over batches of |sum_c grad_rho|
    double max_sigma_asymmetry = 0.0;  // max over batches of max |D - D^T|
    long samples = 0;
};

McEstimate mc_stein_estimate(const MixturePrior& prior, const Quadratic& q, long n, Rng& rng, int batch_size = 1000,
                             Fault fault = Fault::None);

struct CheckRow {
    std::string name;
    double value = 0.0;      // measured error (relative unless noted in name)
    double tolerance = 0.0;
    double se = 0.0;         // standard error attached to the measurement, if any
    bool pass = false;
};

struct VerifyOptions {
    long n_large = 1000000;
    long n_small = 100000;
    std::vector<int> ks{1, 2, 4};
    std::vector<int> dims{2, 4, 8};
    double rel_tolerance = 0.02;
    int variance_trials = 100;
    int variance_batch = 1000;
    int variance_required = 95;
    std::uint64_t seed = 20240607;
    Fault fault = Fault::None;
};

struct VerifyReport {
    std::vector<CheckRow> rows;
    bool all_pass() const;
    std::string table() const;
};

/// Quadratic-oracle checks for the mean, covariance and mixing estimators on
/// every (K, d) pair, plus the implicit-vs-explicit variance comparison.
VerifyReport verify_gradients(const VerifyOptions& opts);

/// Wins of the implicit mean estimator (variance <= explicit) over seeded trials
/// on a K=4 overlapping prior.
int variance_wins(int trials, int batch, std::uint64_t seed, int dim = 4);

}  // namespace slogan
