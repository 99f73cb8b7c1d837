#include "run_config.hpp"

#include <sstream>

#include "json_schema.hpp"

namespace slogan::cli {

namespace {

#include "run_config_schema.inc"  // kRunConfigSchema

std::vector<LayerSpec> layers_from_json(const Json& j) {
    std::vector<LayerSpec> out;
    for (const auto& l : j.at("layers"))
        out.push_back({l.at("units").get<int>(), activation_from_string(l.at("activation").get<std::string>()),
                       l.value("batch_norm", false), l.value("spectral_norm", false)});
    return out;
}

NetSpec with_input(int input_dim, const std::vector<LayerSpec>& layers) { return NetSpec{input_dim, layers}; }

}  // namespace

const Json& run_config_schema() {
    static const Json schema = Json::parse(kRunConfigSchema);
    return schema;
}

DatasetSpec dataset_spec_from_json(const Json& j, const std::string& pointer) {
    DatasetSpec d;
    d.kind = j.at("kind").get<std::string>();
    d.seed = j.value("seed", d.seed);
    if (j.contains("counts")) {
        const auto v = j["counts"].get<std::vector<int>>();
        if (v.size() != 8) throw ConfigError(pointer + "/counts: needs exactly 8 entries");
        std::copy(v.begin(), v.end(), d.counts.begin());
    }
    d.std_dev = j.value("std", d.std_dev);
    d.radius = j.value("radius", d.radius);
    d.path = j.value("path", d.path);
    d.has_labels = j.value("has_labels", d.has_labels);
    d.scale = scale_mode_from_string(j.value("scale", to_string(d.scale)));
    if (d.kind == "csv" && d.path.empty()) throw ConfigError(pointer + "/path: required field is missing for kind \"csv\"");
    return d;
}

RunConfig parse_run_config(const Json& j) {
    const auto issues = validate_schema(run_config_schema(), j);
    if (!issues.empty()) {
        std::ostringstream msg;
        msg << "invalid run config:";
        for (const auto& i : issues) msg << "\n  " << (i.pointer.empty() ? "/" : i.pointer) << ": " << i.message;
        throw ConfigError(msg.str());
    }

    RunConfig c;
    c.seed = j.at("seed").get<std::uint64_t>();
    c.output_dir = j.at("output_dir").get<std::string>();
    Json ds = j.at("dataset");
    if (!ds.contains("seed")) ds["seed"] = c.seed;
    c.dataset = dataset_spec_from_json(ds);

    TrainConfig& t = c.train;
    t.seed = c.seed;
    const Json& m = j.at("model");
    t.k = m.at("k").get<int>();
    t.latent_dim = m.at("latent_dim").get<int>();
    t.prior_init.mu_variance = m.value("mu_init_variance", t.prior_init.mu_variance);
    if (m.contains("generator")) c.g_layers = layers_from_json(m["generator"]);
    if (m.contains("discriminator")) c.d_layers = layers_from_json(m["discriminator"]);
    if (m.contains("encoder")) c.e_layers = layers_from_json(m["encoder"]);

    const Json& tr = j.at("train");
    t.steps = tr.at("steps").get<long>();
    t.batch_b = tr.at("batch_size").get<int>();
    t.eta = tr.at("eta").get<double>();
    t.gamma = tr.at("gamma").get<double>();
    t.d_steps_per_g = tr.value("d_steps_per_g", t.d_steps_per_g);
    t.checkpoint_every = tr.value("checkpoint_every", t.checkpoint_every);
    t.history_every = tr.value("history_every", t.history_every);
    t.latent_grad_clip = tr.value("latent_grad_clip", t.latent_grad_clip);
    t.mu_direct_path = tr.value("mu_direct_path", t.mu_direct_path);
    t.gumbel_path = tr.value("gumbel_path", t.gumbel_path);
    if (tr.contains("adam")) {
        const Json& a = tr["adam"];
        t.adam.beta1 = a.value("beta1", t.adam.beta1);
        t.adam.beta2 = a.value("beta2", t.adam.beta2);
        t.adam.eps = a.value("eps", t.adam.eps);
    }

    const Json& l = j.at("loss");
    t.loss.lambda_c = l.at("lambda").get<double>();
    t.loss.scale_s = l.at("scale").get<double>();
    t.loss.margin_m = l.at("margin").get<double>();
    t.loss.tau = l.value("tau", t.loss.tau);
    t.loss.lp_coeff = l.value("lp_coeff", t.loss.lp_coeff);
    t.loss.linear_decay = l.value("linear_decay", t.loss.linear_decay);
    t.loss.decay_scale = l.value("decay_scale", t.loss.decay_scale);

    if (j.contains("eval")) {
        const Json& e = j["eval"];
        c.eval.enabled = e.value("enabled", c.eval.enabled);
        c.eval.options.n_gen_per_cluster = e.value("n_gen_per_cluster", c.eval.options.n_gen_per_cluster);
        c.eval.options.matching = e.value("matching", std::string("greedy")) == "optimal" ? Matching::Optimal : Matching::Greedy;
        c.eval.options.nmi_norm =
            e.value("nmi_norm", std::string("geometric")) == "arithmetic" ? NmiNorm::Arithmetic : NmiNorm::Geometric;
    }
    if (j.contains("plot")) {
        const Json& p = j["plot"];
        c.plot.enabled = p.value("enabled", c.plot.enabled);
        c.plot.real_points = p.value("real_points", c.plot.real_points);
        c.plot.samples_per_component = p.value("samples_per_component", c.plot.samples_per_component);
    }
    return c;
}

RunConfig load_run_config(const std::string& path) { return parse_run_config(read_json_file(path)); }

LabeledDataset load_dataset(const DatasetSpec& spec) {
    if (spec.kind == "synthetic_8gauss") return make_synthetic_8gauss(spec.seed, spec.counts, spec.std_dev, spec.radius);
    return load_csv(spec.path, spec.has_labels, spec.scale);
}

LabeledDataset resolve(RunConfig& cfg) {
    LabeledDataset ds;
    try {
        ds = load_dataset(cfg.dataset);
    } catch (const ConfigError& e) {
        throw ConfigError(std::string(cfg.dataset.kind == "csv" ? "/dataset/path: " : "/dataset: ") + e.what());
    }
    TrainConfig& t = cfg.train;
    t.data_dim = ds.dim();
    const NetSpec g = synthetic_generator_spec(t.latent_dim, t.data_dim);
    const NetSpec d = synthetic_discriminator_spec(t.data_dim);
    const NetSpec e = synthetic_encoder_spec(t.data_dim, t.latent_dim);
    t.g_spec = cfg.g_layers ? with_input(t.latent_dim, *cfg.g_layers) : g;
    t.d_spec = cfg.d_layers ? with_input(t.data_dim, *cfg.d_layers) : d;
    t.e_spec = cfg.e_layers ? with_input(t.data_dim, *cfg.e_layers) : e;
    t.validate();
    return ds;
}

}  // namespace slogan::cli
