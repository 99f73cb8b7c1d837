#include "slogan/io.hpp"

#include <fstream>

namespace slogan {

namespace {

Json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vec json_vec(const Json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Json mat_json(const Mat& m) {
    Json rows = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(vec_json(m.row(i).transpose()));
    return rows;
}

Mat json_mat(const Json& j) {
    const auto r = static_cast<Eigen::Index>(j.size());
    if (r == 0) return Mat();
    const auto c = static_cast<Eigen::Index>(j.at(0).size());
    Mat m(r, c);
    for (Eigen::Index i = 0; i < r; ++i) {
        const Json& row = j.at(static_cast<std::size_t>(i));
        if (static_cast<Eigen::Index>(row.size()) != c) throw ConfigError("ragged matrix in JSON");
        for (Eigen::Index k = 0; k < c; ++k) m(i, k) = row.at(static_cast<std::size_t>(k)).get<double>();
    }
    return m;
}

}  // namespace

Json to_json(const MixturePrior& prior) {
    Json j;
    j["k"] = prior.k();
    j["dim"] = prior.dim();
    j["mu"] = Json::array();
    j["sigma_full"] = Json::array();
    for (int c = 0; c < prior.k(); ++c) {
        j["mu"].push_back(vec_json(prior.mu[c]));
        j["sigma_full"].push_back(mat_json(prior.sigma[c].full()));
    }
    j["rho"] = vec_json(prior.rho);
    return j;
}

MixturePrior prior_from_json(const Json& j) {
    MixturePrior p;
    try {
        const int k = j.at("k").get<int>();
        const int dim = j.at("dim").get<int>();
        for (const auto& m : j.at("mu")) p.mu.push_back(json_vec(m));
        for (const auto& s : j.at("sigma_full")) p.sigma.push_back(SpdMat::factor(json_mat(s)));
        p.rho = json_vec(j.at("rho"));
        p.validate();
        if (p.k() != k || p.dim() != dim) throw ConfigError("prior JSON: k/dim disagree with the stored arrays");
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("malformed prior: ") + e.what());
    } catch (const ShapeMismatch& e) {
        throw ConfigError(std::string("malformed prior: ") + e.what());
    } catch (const NotPositiveDefinite& e) {
        throw ConfigError(std::string("malformed prior: ") + e.what());
    }
    return p;
}

Json to_json(const NetSpec& spec) {
    Json layers = Json::array();
    for (const auto& l : spec.layers)
        layers.push_back({{"units", l.units},
                          {"activation", to_string(l.activation)},
                          {"batch_norm", l.batch_norm},
                          {"spectral_norm", l.spectral_norm}});
    return {{"input_dim", spec.input_dim}, {"layers", layers}};
}

NetSpec net_spec_from_json(const Json& j) {
    NetSpec spec;
    spec.input_dim = j.at("input_dim").get<int>();
    for (const auto& l : j.at("layers"))
        spec.layers.push_back({l.at("units").get<int>(), activation_from_string(l.at("activation").get<std::string>()),
                               l.value("batch_norm", false), l.value("spectral_norm", false)});
    return spec;
}

Json to_json(const Mlp& net) {
    Json layers = Json::array();
    for (const auto& l : net.layers()) {
        Json lj{{"w", mat_json(l.w)}, {"b", vec_json(l.b)}};
        if (l.spec.batch_norm) {
            lj["gamma"] = vec_json(l.gamma);
            lj["beta"] = vec_json(l.beta);
            lj["running_mean"] = vec_json(l.running_mean);
            lj["running_var"] = vec_json(l.running_var);
        }
        if (l.spec.spectral_norm) {
            lj["sn_u"] = vec_json(l.sn_u);
            lj["sn_v"] = vec_json(l.sn_v);
        }
        layers.push_back(std::move(lj));
    }
    return {{"spec", to_json(net.spec())}, {"layers", layers}};
}

Mlp net_from_json(const Json& j) {
    const NetSpec spec = net_spec_from_json(j.at("spec"));
    const Json& lj = j.at("layers");
    if (lj.size() != spec.layers.size()) throw ConfigError("network JSON: layer count mismatch");
    std::vector<Layer> layers;
    int in = spec.input_dim;
    for (std::size_t i = 0; i < lj.size(); ++i) {
        Layer l;
        l.spec = spec.layers[i];
        l.in = in;
        l.w = json_mat(lj[i].at("w"));
        l.b = json_vec(lj[i].at("b"));
        if (l.spec.batch_norm) {
            l.gamma = json_vec(lj[i].at("gamma"));
            l.beta = json_vec(lj[i].at("beta"));
            l.running_mean = json_vec(lj[i].at("running_mean"));
            l.running_var = json_vec(lj[i].at("running_var"));
        }
        if (l.spec.spectral_norm) {
            l.sn_u = json_vec(lj[i].at("sn_u"));
            l.sn_v = json_vec(lj[i].at("sn_v"));
        }
        in = l.spec.units;
        layers.push_back(std::move(l));
    }
    return Mlp::from_layers(spec, std::move(layers));
}

Json to_json(const NetOptimizer& opt) {
    Json states = Json::array();
    for (const auto& s : opt.states()) states.push_back({{"t", s.t}, {"m", s.m}, {"v", s.v}});
    return states;
}

void optimizer_from_json(const Json& j, NetOptimizer& opt) {
    auto& states = opt.states();
    states.clear();
    for (const auto& s : j)
        states.push_back({s.at("m").get<std::vector<double>>(), s.at("v").get<std::vector<double>>(),
                          s.at("t").get<std::int64_t>()});
}

Json to_json(const LossConfig& c) {
    return {{"lambda", c.lambda_c}, {"scale", c.scale_s},         {"margin", c.margin_m},
            {"tau", c.tau},         {"lp_coeff", c.lp_coeff},     {"linear_decay", c.linear_decay},
            {"decay_scale", c.decay_scale}};
}

LossConfig loss_config_from_json(const Json& j) {
    LossConfig c;
    c.lambda_c = j.value("lambda", c.lambda_c);
    c.scale_s = j.value("scale", c.scale_s);
    c.margin_m = j.value("margin", c.margin_m);
    c.tau = j.value("tau", c.tau);
    c.lp_coeff = j.value("lp_coeff", c.lp_coeff);
    c.linear_decay = j.value("linear_decay", c.linear_decay);
    c.decay_scale = j.value("decay_scale", c.decay_scale);
    return c;
}

Json to_json(const TrainConfig& c) {
    return {{"batch_size", c.batch_b},
            {"steps", c.steps},
            {"eta", c.eta},
            {"gamma", c.gamma},
            {"loss", to_json(c.loss)},
            {"d_steps_per_g", c.d_steps_per_g},
            {"seed", c.seed},
            {"checkpoint_every", c.checkpoint_every},
            {"history_every", c.history_every},
            {"k", c.k},
            {"latent_dim", c.latent_dim},
            {"data_dim", c.data_dim},
            {"mu_init_variance", c.prior_init.mu_variance},
            {"generator", to_json(c.g_spec)},
            {"discriminator", to_json(c.d_spec)},
            {"encoder", to_json(c.e_spec)},
            {"adam", {{"beta1", c.adam.beta1}, {"beta2", c.adam.beta2}, {"eps", c.adam.eps}}},
            {"latent_grad_clip", c.latent_grad_clip},
            {"mu_direct_path", c.mu_direct_path},
            {"gumbel_path", c.gumbel_path}};
}

TrainConfig train_config_from_json(const Json& j) {
    TrainConfig c;
    c.batch_b = j.at("batch_size").get<int>();
    c.steps = j.at("steps").get<long>();
    c.eta = j.at("eta").get<double>();
    c.gamma = j.at("gamma").get<double>();
    c.loss = loss_config_from_json(j.at("loss"));
    c.d_steps_per_g = j.at("d_steps_per_g").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.checkpoint_every = j.at("checkpoint_every").get<long>();
    c.history_every = j.at("history_every").get<long>();
    c.k = j.at("k").get<int>();
    c.latent_dim = j.at("latent_dim").get<int>();
    c.data_dim = j.at("data_dim").get<int>();
    c.prior_init.mu_variance = j.at("mu_init_variance").get<double>();
    c.g_spec = net_spec_from_json(j.at("generator"));
    c.d_spec = net_spec_from_json(j.at("discriminator"));
    c.e_spec = net_spec_from_json(j.at("encoder"));
    const Json& a = j.at("adam");
    c.adam = {a.at("beta1").get<double>(), a.at("beta2").get<double>(), a.at("eps").get<double>()};
    c.latent_grad_clip = j.at("latent_grad_clip").get<double>();
    c.mu_direct_path = j.at("mu_direct_path").get<bool>();
    c.gumbel_path = j.at("gumbel_path").get<bool>();
    return c;
}

Json checkpoint_to_json(const TrainState& st) {
    return {{"format", "slogan-checkpoint-1"},
            {"step", st.step},
            {"config", to_json(st.config)},
            {"prior", to_json(st.prior)},
            {"generator", to_json(st.g)},
            {"discriminator", to_json(st.d)},
            {"encoder", to_json(st.e)},
            {"optimizers", {{"generator", to_json(st.opt_g)}, {"discriminator", to_json(st.opt_d)},
                            {"encoder", to_json(st.opt_e)}}},
            {"rng", st.rng.state()}};
}

TrainState state_from_checkpoint(const Json& j) {
    try {
        if (j.value("format", std::string()) != "slogan-checkpoint-1") throw ConfigError("not a checkpoint document");
        const TrainConfig cfg = train_config_from_json(j.at("config"));
        TrainState st{cfg, prior_from_json(j.at("prior")), net_from_json(j.at("generator")),
                      net_from_json(j.at("discriminator")), net_from_json(j.at("encoder")),
                      NetOptimizer(cfg.adam), NetOptimizer(cfg.adam), NetOptimizer(cfg.adam),
                      j.at("step").get<long>(), Rng(cfg.seed)};
        const Json& o = j.at("optimizers");
        optimizer_from_json(o.at("generator"), st.opt_g);
        optimizer_from_json(o.at("discriminator"), st.opt_d);
        optimizer_from_json(o.at("encoder"), st.opt_e);
        st.rng.set_state(j.at("rng").get<std::string>());
        if (st.prior.k() != cfg.k || st.prior.dim() != cfg.latent_dim) throw ConfigError("checkpoint prior disagrees with its config");
        return st;
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("malformed checkpoint: ") + e.what());
    }
}

Json to_json(const StepReport& r) {
    return {{"step", r.step},
            {"d_loss", r.d_loss},
            {"g_loss", r.g_loss},
            {"c_loss", r.c_loss},
            {"lp", r.lp},
            {"lambda", r.lambda_c},
            {"margin", r.margin_m},
            {"pi", vec_json(r.pi)},
            {"grad_norms",
             {{"mu", r.grad_norm_mu},
              {"sigma", r.grad_norm_sigma},
              {"rho", r.grad_norm_rho},
              {"generator", r.grad_norm_g},
              {"encoder", r.grad_norm_e},
              {"discriminator", r.grad_norm_d}}}};
}

Json to_json(const EvalReport& r) {
    Json assignment = Json::object();
    for (std::size_t y = 0; y < r.icfid_detail.assignment.size(); ++y)
        assignment[std::to_string(y)] = r.icfid_detail.assignment[y];
    return {{"ari", r.ari},
            {"nmi", r.nmi},
            {"fid", r.fid},
            {"icfid", r.icfid},
            {"icfid_per_class", r.icfid_detail.per_class},
            {"assignment", assignment},
            {"pi", vec_json(r.pi)}};
}

Json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
    }
}

void write_json_file(const std::string& path, const Json& j) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write '" + path + "'");
    out << j.dump(2) << '\n';
}

}  // namespace slogan
