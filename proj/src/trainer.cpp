#include "slogan/trainer.hpp"

#include <cmath>

namespace slogan {

namespace {

Mat mean_matrix(const MixturePrior& prior) {
    Mat m(prior.k(), prior.dim());
    for (int c = 0; c < prior.k(); ++c) m.row(c) = prior.mu[c].transpose();
    return m;
}

// Latent gradient contributed through the relaxed assignment
// C = softmax((log resp(z) + g) / tau), given d(sum l^c)/d mu_C.
Mat gumbel_path_gradient(const MixturePrior& prior, const LatentBatch& lb, const Mat& d_mu_c, const Mat& means,
                         double tau) {
    const int b = lb.size();
    const int k = prior.k();
    const Mat g_c = d_mu_c * means.transpose();  // d/dC_jc = <mu_c, d mu_C_j>
    Mat a(b, k);
    for (int j = 0; j < b; ++j) {
        const auto c_row = lb.comp_relaxed.row(j);
        const double dot = c_row.dot(g_c.row(j));
        a.row(j) = (c_row.array() * (g_c.row(j).array() - dot) / tau).matrix();
    }
    // d log resp_c / dz = -Sigma_c^{-1}(z - mu_c) + sum_k resp_k Sigma_k^{-1}(z - mu_k); the second
    // term is shared by every c and the softmax Jacobian rows sum to zero, so it cancels.
    Mat dz = Mat::Zero(b, prior.dim());
    for (int c = 0; c < k; ++c) {
        if (a.col(c).cwiseAbs().maxCoeff() == 0.0) continue;
        const Mat centered = (lb.z.rowwise() - prior.mu[c].transpose()).transpose();
        const Mat w = prior.sigma[c].solve(centered);  // d x B
        dz -= a.col(c).asDiagonal() * w.transpose();
    }
    return dz;
}

double grads_norm(const ParamGrads& g) { return std::sqrt(g.squared_norm()); }

void check_net(const Mlp& net, const char* name) {
    for (const auto& l : net.layers()) {
        if (!all_finite(l.w) || !all_finite(l.b) || !all_finite(l.gamma) || !all_finite(l.beta) ||
            !all_finite(l.running_mean) || !all_finite(l.running_var))
            throw NumericError(std::string("non-finite parameter in network ") + name);
    }
}

void check_batch(const Mat& x, const TrainConfig& cfg) {
    if (x.rows() != cfg.batch_b || x.cols() != cfg.data_dim)
        throw ShapeMismatch("train_step: real batch must be " + std::to_string(cfg.batch_b) + " x " +
                            std::to_string(cfg.data_dim));
}

std::vector<Mat> draw_real(const TrainState& st, const LabeledDataset& data, Rng& rng) {
    std::vector<Mat> out;
    for (int t = 0; t < st.config.d_steps_per_g; ++t) out.push_back(sample_batch(data, st.config.batch_b, rng));
    return out;
}

}  // namespace

void TrainConfig::validate() const {
    if (batch_b < 2) throw ConfigError("train.batch_size must be >= 2");
    if (steps < 0) throw ConfigError("train.steps must be >= 0");
    if (!(eta > 0.0)) throw ConfigError("train.eta must be > 0");
    if (!(gamma >= 0.0)) throw ConfigError("train.gamma must be >= 0");
    if (d_steps_per_g < 1) throw ConfigError("train.d_steps_per_g must be >= 1");
    if (history_every < 1) throw ConfigError("train.history_every must be >= 1");
    if (checkpoint_every < 0) throw ConfigError("train.checkpoint_every must be >= 0");
    if (!(latent_grad_clip >= 0.0)) throw ConfigError("train.latent_grad_clip must be >= 0");
    if (k < 1) throw ConfigError("prior.k must be >= 1");
    if (latent_dim < 1 || data_dim < 1) throw ConfigError("dimensions must be positive");
    if (!(prior_init.mu_variance >= 0.0)) throw ConfigError("prior.mu_init_variance must be >= 0");
    loss.validate();
    if (g_spec.input_dim != latent_dim || g_spec.output_dim() != data_dim)
        throw ConfigError("generator must map latent_dim -> data_dim");
    if (d_spec.input_dim != data_dim || d_spec.output_dim() != 1)
        throw ConfigError("discriminator must map data_dim -> 1");
    if (e_spec.input_dim != data_dim || e_spec.output_dim() != latent_dim)
        throw ConfigError("encoder must map data_dim -> latent_dim");
    for (const auto& l : d_spec.layers) {
        if (l.batch_norm || l.spectral_norm ||
            !(l.activation == Activation::Relu || l.activation == Activation::LeakyRelu ||
              l.activation == Activation::Linear))
            throw ConfigError("discriminator layers must be piecewise linear without normalization");
    }
}

TrainConfig synthetic_preset() { return TrainConfig{}; }

TrainState init_state(const TrainConfig& config) {
    config.validate();
    TrainState st{config, {}, {}, {}, {}, NetOptimizer(config.adam), NetOptimizer(config.adam),
                  NetOptimizer(config.adam), 0, Rng(config.seed)};
    st.prior = init_prior(config.k, config.latent_dim, st.rng, config.prior_init);
    st.g = Mlp::build(config.g_spec, st.rng);
    st.d = Mlp::build(config.d_spec, st.rng);
    st.e = Mlp::build(config.e_spec, st.rng);
    return st;
}

void check_state(const TrainState& st) {
    const auto& p = st.prior;
    p.validate();
    for (int c = 0; c < p.k(); ++c) {
        if (!all_finite(p.mu[c]) || !all_finite(p.sigma[c].full()))
            throw NumericError("non-finite prior parameter in component " + std::to_string(c));
        if (p.sigma[c].chol().diagonal().minCoeff() <= 0.0)
            throw NotPositiveDefinite("covariance " + std::to_string(c) + " lost positive definiteness");
    }
    if (!all_finite(p.rho)) throw NumericError("non-finite mixing parameter");
    if (std::abs(p.pi().sum() - 1.0) > 1e-12) throw NumericError("mixing weights not normalized");
    check_net(st.g, "G");
    check_net(st.d, "D");
    check_net(st.e, "E");
}

StepReport train_step(TrainState& st, std::span<const Mat> real_batches) {
    const TrainConfig& cfg = st.config;
    if (static_cast<int>(real_batches.size()) != cfg.d_steps_per_g)
        throw ShapeMismatch("train_step: expected " + std::to_string(cfg.d_steps_per_g) + " real batches");
    for (const auto& rb : real_batches) check_batch(rb, cfg);

    const LossConfig lc = cfg.loss.at_step(st.step, cfg.steps);
    const int b = cfg.batch_b;
    const double inv_b = 1.0 / b;
    StepReport rep;
    rep.lambda_c = lc.lambda_c;
    rep.margin_m = lc.margin_m;

    // Latents and every per-sample loss, all from the pre-update parameters.
    const LatentBatch lb = sample(st.prior, b, st.rng, lc.tau);
    ForwardTape tg, td, te;
    const Mat x_fake = st.g.forward(lb.z, Mode::Train, &tg);
    const Mat d_fake = st.d.forward(x_fake, Mode::Train, &td);
    const Mat e_x = st.e.forward(x_fake, Mode::Train, &te);
    const Mat means = mean_matrix(st.prior);
    const Mat mu_c = lb.comp_relaxed * means;
    const ContrastiveResult cr = contrastive_loss(e_x, mu_c, lc.scale_s, lc.margin_m);
    const Vec adv = -d_fake.col(0);
    const Vec loss = adv + lc.lambda_c * cr.losses;
    rep.g_loss = adv.mean();
    rep.c_loss = cr.losses.mean();

    // Gradients of sum_i l_i: through D and E into x = G(z), then into z.
    const Mat dx_adv = st.d.backward(td, Mat::Constant(b, 1, -1.0)).second;
    auto [ge, dx_c] = st.e.backward(te, lc.lambda_c * cr.d_e);
    auto [gg, dz] = st.g.backward(tg, dx_adv + dx_c);
    if (lc.lambda_c > 0.0 && cfg.gumbel_path) dz += lc.lambda_c * gumbel_path_gradient(st.prior, lb, cr.d_mu_c, means, lc.tau);

    auto per_sample = make_per_sample(st.prior, lb, loss, adv, dz);
    clip_latent_gradients(per_sample, cfg.latent_grad_clip);
    PriorGradients pg = estimate_prior_gradients(per_sample, st.prior);
    if (lc.lambda_c > 0.0 && cfg.mu_direct_path) {
        // Direct dependence of l^c on the means through mu_C (C held fixed).
        const Mat direct = (lc.lambda_c * inv_b) * (lb.comp_relaxed.transpose() * cr.d_mu_c);
        for (int c = 0; c < st.prior.k(); ++c) pg.d_mu[c] += direct.row(c).transpose();
    }
    for (int c = 0; c < st.prior.k(); ++c) {
        rep.grad_norm_mu.push_back(pg.d_mu[c].norm());
        rep.grad_norm_sigma.push_back(pg.d_sigma[c].norm());
    }
    rep.grad_norm_rho = pg.d_rho.norm();

    apply_mu_update(st.prior, pg, cfg.lr_mu());
    rep.events.emplace_back("mu");
    apply_sigma_updates(st.prior, pg, cfg.lr_sigma());
    rep.events.emplace_back("sigma");
    apply_rho_update(st.prior, pg, cfg.lr_rho());
    rep.events.emplace_back("rho");

    gg.scale(inv_b);
    ge.scale(inv_b);
    rep.grad_norm_g = grads_norm(gg);
    rep.grad_norm_e = grads_norm(ge);
    st.opt_g.step(st.g, gg, cfg.lr_g());
    st.opt_e.step(st.e, ge, cfg.lr_e());
    rep.events.emplace_back("generator_encoder");

    for (int t = 0; t < cfg.d_steps_per_g; ++t) {
        const Mat& real = real_batches[static_cast<std::size_t>(t)];
        Mat fake;
        ForwardTape tdf;
        Mat df;
        if (t == 0) {
            fake = x_fake;
            tdf = td;
            df = d_fake;
        } else {
            // Extra critic iterations use fresh latents and the updated generator.
            const LatentBatch extra = sample(st.prior, b, st.rng, lc.tau);
            fake = st.g.forward(extra.z, Mode::Train, nullptr, false);
            df = st.d.forward(fake, Mode::Train, &tdf);
        }
        ForwardTape tdr;
        const Mat dr = st.d.forward(real, Mode::Train, &tdr);
        const CriticLoss cl = adv_loss_d(dr.col(0), df.col(0));
        ParamGrads gd = st.d.backward(tdf, cl.d_fake).first;
        gd.add(st.d.backward(tdr, cl.d_real).first);
        double lp_value = 0.0;
        if (lc.lp_coeff > 0.0) {
            const PenaltyResult pr = lipschitz_penalty(st.d, real, fake, st.rng, lc.lp_coeff);
            gd.add(pr.grads);
            lp_value = pr.value;
        }
        rep.d_loss = cl.value + lp_value;
        rep.lp = lp_value;
        rep.grad_norm_d = grads_norm(gd);
        st.opt_d.step(st.d, gd, cfg.lr_d());
    }
    rep.events.emplace_back("discriminator");

    rep.pi = st.prior.pi();
    rep.step = ++st.step;
#ifndef NDEBUG
    check_state(st);
#endif
    return rep;
}

StepReport train_step(TrainState& state, const Mat& real_batch) {
    return train_step(state, std::span<const Mat>(&real_batch, 1));
}

void train_more(TrainState& st, const LabeledDataset& data, long steps, std::vector<StepReport>* history,
                const TrainHooks& hooks) {
    if (data.dim() != st.config.data_dim) throw ShapeMismatch("dataset dimension does not match the model");
    if (data.size() < st.config.batch_b)
        throw DatasetTooSmall("dataset has " + std::to_string(data.size()) + " rows, batch size is " +
                              std::to_string(st.config.batch_b));
    const long end = st.step + steps;
    const long every = st.config.history_every;
    const long ckpt = st.config.checkpoint_every;
    while (st.step < end) {
        const auto real = draw_real(st, data, st.rng);
        StepReport rep = train_step(st, std::span<const Mat>(real));
        const bool last = st.step == end;
        const bool ckpt_due = (ckpt > 0 && st.step % ckpt == 0) || last;
        if (st.step % every == 0 || last) {
            if (hooks.on_history) hooks.on_history(st, rep);
            if (history) history->push_back(std::move(rep));
        }
        if (ckpt_due) {
            check_state(st);
            if (hooks.on_checkpoint) hooks.on_checkpoint(st);
        }
    }
}

TrainResult train(const TrainConfig& config, const LabeledDataset& data, const TrainHooks& hooks) {
    config.validate();
    if (data.dim() != config.data_dim) throw ShapeMismatch("dataset dimension does not match train.data_dim");
    if (data.size() < config.batch_b)
        throw DatasetTooSmall("dataset has " + std::to_string(data.size()) + " rows, batch size is " +
                              std::to_string(config.batch_b));
    TrainResult res{init_state(config), {}};
    train_more(res.state, data, config.steps, &res.history, hooks);
    return res;
}

ManipulateReport manipulate_attributes(TrainState& st, const LabeledDataset& data,
                                       const std::vector<ProbeData>& probes, const ManipulateConfig& cfg) {
    const int k = st.prior.k();
    if (k < 2) throw ShapeMismatch("attribute manipulation needs at least two components");
    if (probes.empty()) throw EmptyProbeSet("no probe sets given");
    if (cfg.mixup_rounds < 0 || cfg.steps < 0) throw ConfigError("manipulation steps and rounds must be >= 0");
    for (const auto& p : probes) {
        if (p.x.rows() == 0) throw EmptyProbeSet("probe set for component " + std::to_string(p.component) + " is empty");
        if (p.component < 0 || p.component >= k) throw ShapeMismatch("probe component index out of range");
        if (p.x.cols() != st.config.data_dim) throw ShapeMismatch("probe dimension does not match the model");
    }

    std::vector<Mat> augmented;
    for (const auto& p : probes) augmented.push_back(mixup_augment(p.x, cfg.mixup_rounds, st.rng, cfg.mixup_alpha));

    const double s = st.config.loss.scale_s;
    const double m = st.config.loss.margin_m;
    ManipulateReport rep;
    for (long t = 0; t < cfg.steps; ++t) {
        train_more(st, data, 1);

        std::vector<ProbeSet> sets;
        std::vector<ForwardTape> tapes(probes.size());
        for (std::size_t i = 0; i < probes.size(); ++i)
            sets.push_back({probes[i].component, st.e.forward(augmented[i], Mode::Train, &tapes[i], false)});
        const ProbeResult pr = probe_loss(sets, st.prior.mu, s, m);
        ParamGrads ge = st.e.zero_grads();
        for (std::size_t i = 0; i < probes.size(); ++i) ge.add(st.e.backward(tapes[i], pr.d_encoded[i]).first);
        st.opt_e.step(st.e, ge, st.config.lr_e());
        PriorGradients pg;
        pg.d_mu = pr.d_mu;
        apply_mu_update(st.prior, pg, st.config.lr_mu());
        // The probe objective has no path to z, so covariances (and G) receive a zero gradient;
        // include_sigma leaves them untouched either way.
        rep.probe_loss.push_back(pr.loss);
    }
    check_state(st);
    return rep;
}

}  // namespace slogan
