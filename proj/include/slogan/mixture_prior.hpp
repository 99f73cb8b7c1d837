#pragma once

#include <vector>

#include "slogan/numerics.hpp"

namespace slogan {

/// Learnable latent distribution q(z) = sum_c pi_c N(z; mu_c, Sigma_c), with
/// pi = softmax(rho).
struct MixturePrior {
    std::vector<Vec> mu;
    std::vector<SpdMat> sigma;
    Vec rho;

    int k() const { return static_cast<int>(mu.size()); }
    int dim() const { return mu.empty() ? 0 : static_cast<int>(mu.front().size()); }

    Vec pi() const;
    Vec log_pi() const;

    /// Throws ShapeMismatch if the component lists disagree in size or dimension.
    void validate() const;
};

struct PriorInit {
    /// Variance of the N(0, v) draw for each mean coordinate.
    double mu_variance = 0.1;
};

MixturePrior init_prior(int k, int dim, Rng& rng, const PriorInit& init = {});

/// B latent samples with every per-sample quantity the estimators consume.
/// Matrices are B x K unless noted.
struct LatentBatch {
    Mat z;                 // B x d
    Mat log_comp_density;  // log q(z|c)
    Vec log_mix_density;   // log q(z)
    Mat delta;             // q(z|c) / q(z)
    Mat resp;              // q(c|z) = delta * pi
    Mat log_resp;
    Mat gumbel;            // noise used for the relaxed assignment
    Mat comp_relaxed;      // Gumbel-Softmax assignment C
    std::vector<int> comp_hard;  // argmax responsibility
    std::vector<int> ancestor;   // component chosen by ancestral sampling (-1 if z was supplied)

    int size() const { return static_cast<int>(z.rows()); }
};

struct Responsibilities {
    Vec delta;
    Vec resp;
    Vec log_resp;
};

/// log N(z; mu_c, Sigma_c) for every component.
Vec log_component_densities(const MixturePrior& prior, const Vec& z);
/// Batched form: B x K.
Mat log_component_densities(const MixturePrior& prior, const Mat& z);

double log_density(const MixturePrior& prior, const Vec& z);

Responsibilities responsibilities(const MixturePrior& prior, const Vec& z);

/// softmax((log_resp + gumbel) / tau).
Vec gumbel_softmax(const Vec& log_resp, const Vec& gumbel, double tau);
Vec gumbel_softmax_assign(const Vec& resp, double tau, Rng& rng);

Vec mixture_mean_of_assignment(const MixturePrior& prior, const Vec& comp_relaxed);

/// Ancestral sampling: c ~ Categorical(pi), z = mu_c + L_c eps.
LatentBatch sample(const MixturePrior& prior, int b, Rng& rng, double tau = 0.01);

/// Fills every cached field of a LatentBatch for externally supplied latents.
LatentBatch annotate(const MixturePrior& prior, const Mat& z, Rng& rng, double tau = 0.01);

/// n draws from a single component q(z|c).
Mat sample_component(const MixturePrior& prior, int c, int n, Rng& rng);

}  // namespace slogan
