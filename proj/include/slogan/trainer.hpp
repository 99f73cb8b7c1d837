#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "slogan/datasets.hpp"
#include "slogan/losses.hpp"
#include "slogan/mixture_prior.hpp"
#include "slogan/neural.hpp"
#include "slogan/stein_grad.hpp"

namespace slogan {

struct TrainConfig {
    int batch_b = 64;
    long steps = 20000;
    double eta = 0.001;   // base network learning rate
    double gamma = 0.01;  // base prior learning rate
    LossConfig loss;
    int d_steps_per_g = 1;
    std::uint64_t seed = 0;
    long checkpoint_every = 0;  // 0 = only at the end
    long history_every = 100;

    int k = 8;
    int latent_dim = 64;
    int data_dim = 2;
    PriorInit prior_init;
    NetSpec g_spec = synthetic_generator_spec();
    NetSpec d_spec = synthetic_discriminator_spec();
    NetSpec e_spec = synthetic_encoder_spec();
    AdamHyper adam;
    double latent_grad_clip = 0.0;  // max-norm for per-sample dl/dz; 0 = off
    bool mu_direct_path = false;     // also add d l^c / d mu through mu_C (C fixed) to the Stein estimate
    bool gumbel_path = true;         // include d l^c / dz through the relaxed assignment

    double lr_d() const { return 4.0 * eta; }
    double lr_g() const { return eta; }
    double lr_e() const { return eta; }
    double lr_mu() const { return 10.0 * gamma; }
    double lr_sigma() const { return gamma; }
    double lr_rho() const { return gamma; }

    /// Throws ConfigError on out-of-range fields or inconsistent architectures.
    void validate() const;
};

/// Preset used for the imbalanced 8-Gaussian experiment.
TrainConfig synthetic_preset();

struct TrainState {
    TrainConfig config;
    MixturePrior prior;
    Mlp g, d, e;
    NetOptimizer opt_g, opt_d, opt_e;
    long step = 0;
    Rng rng;
};

TrainState init_state(const TrainConfig& config);

struct StepReport {
    long step = 0;  // steps completed after this one
    double d_loss = 0.0;   // critic objective including the penalty
    double g_loss = 0.0;   // mean l^a
    double c_loss = 0.0;   // mean l^c
    double lp = 0.0;
    double lambda_c = 0.0;
    double margin_m = 0.0;
    Vec pi;
    std::vector<double> grad_norm_mu, grad_norm_sigma;  // per component
    double grad_norm_rho = 0.0;
    double grad_norm_g = 0.0, grad_norm_e = 0.0, grad_norm_d = 0.0;
    std::vector<std::string> events;  // parameter groups in the order they were updated
};

/// One iteration of the training loop. `real_batches` holds d_steps_per_g
/// batches of B rows; the first is paired with the step's latent batch.
StepReport train_step(TrainState& state, std::span<const Mat> real_batches);
StepReport train_step(TrainState& state, const Mat& real_batch);

/// Throws NumericError when the state holds non-finite values, a
/// non-positive-definite covariance or unnormalized weights.
void check_state(const TrainState& state);

struct TrainHooks {
    /// Called after every step whose index is a multiple of history_every (and the last).
    std::function<void(const TrainState&, const StepReport&)> on_history;
    /// Called at every checkpoint_every multiple and after the last step.
    std::function<void(const TrainState&)> on_checkpoint;
};

struct TrainResult {
    TrainState state;
    std::vector<StepReport> history;
};

/// Runs config.steps iterations with with-replacement minibatches.
/// Throws DatasetTooSmall when the dataset has fewer than B rows.
TrainResult train(const TrainConfig& config, const LabeledDataset& data, const TrainHooks& hooks = {});

/// Continues an existing state for `steps` more iterations.
void train_more(TrainState& state, const LabeledDataset& data, long steps, std::vector<StepReport>* history = nullptr,
                const TrainHooks& hooks = {});

struct ProbeData {
    int component = 0;
    Mat x;  // probes in the dataset's scaled space
};

struct ManipulateConfig {
    long steps = 2000;     // probe steps, each preceded by one regular step
    int mixup_rounds = 5;
    double mixup_alpha = 1.0;
    /// Also route the probe objective to the covariances. The probe loss does
    /// not depend on z, so their gradient is zero; kept so both readings of
    /// the procedure can be run.
    bool include_sigma = true;
};

struct ManipulateReport {
    std::vector<double> probe_loss;  // per probe step
};

/// Alternates one regular training step with one probe-loss step on the
/// mixup-augmented probes (encoder by Adam, means by gradient descent).
/// Throws EmptyProbeSet, ShapeMismatch (K < 2 or bad dims).
ManipulateReport manipulate_attributes(TrainState& state, const LabeledDataset& data,
                                       const std::vector<ProbeData>& probes, const ManipulateConfig& cfg);

}  // namespace slogan
