#include "commands.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "svg.hpp"

namespace slogan::cli {

namespace fs = std::filesystem;

namespace {

// Evaluation and plotting draw from their own stream so they never perturb training.
constexpr std::uint64_t kEvalStream = 0x9e3779b97f4a7c15ULL;

LabeledDataset load_source(const DataSource& s) {
    if (!s.config_path.empty()) {
        const Json j = read_json_file(s.config_path);
        const RunConfig c = parse_run_config(j);
        return load_dataset(c.dataset);
    }
    if (!s.csv_path.empty()) return load_csv(s.csv_path, s.csv_labels, scale_mode_from_string(s.csv_scale));
    if (s.synthetic_seed) return make_synthetic_8gauss(*s.synthetic_seed);
    throw ConfigError("no dataset given: use --config, --csv or --synthetic");
}

TrainState load_checkpoint(const std::string& path) { return state_from_checkpoint(read_json_file(path)); }

void check_dims(const TrainState& st, const LabeledDataset& ds) {
    if (ds.dim() != st.config.data_dim)
        throw ShapeMismatch("dataset has " + std::to_string(ds.dim()) + " columns but the checkpoint expects " +
                            std::to_string(st.config.data_dim));
}

std::string summary_line(const EvalReport& r) {
    std::ostringstream s;
    s << std::setprecision(6) << "ari=" << r.ari << " nmi=" << r.nmi << " fid=" << r.fid << " icfid=" << r.icfid
      << " pi=[";
    for (Eigen::Index i = 0; i < r.pi.size(); ++i) s << (i ? "," : "") << std::setprecision(4) << r.pi(i);
    s << "]";
    return s.str();
}

void write_samples(const std::string& path, const Mat& x, const std::vector<int>& comp) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path);
    for (Eigen::Index c = 0; c < x.cols(); ++c) out << 'x' << c << ',';
    out << "component\n";
    out << std::setprecision(17);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index c = 0; c < x.cols(); ++c) out << x(i, c) << ',';
        out << comp[static_cast<std::size_t>(i)] << '\n';
    }
}

// Real data (gray), per-component samples (colored) and G(mu_c) (outlined).
std::string figure(TrainState& st, const LabeledDataset& ds, int real_points, int per_component, Rng& rng,
                   const std::string& title) {
    std::vector<ScatterLayer> layers;
    const int n_real = std::min(real_points, ds.size());
    if (n_real > 0) layers.push_back({sample_batch(ds, n_real, rng), "#9e9e9e", 1.2, 0.35, false, "data"});
    if (per_component > 0)
        for (int c = 0; c < st.prior.k(); ++c)
            layers.push_back({generate_component(st.prior, st.g, c, per_component, rng), palette(c), 1.6, 0.7, false,
                              ""});
    const Mat means = generate_means(st.prior, st.g);
    for (int c = 0; c < st.prior.k(); ++c) {
        std::ostringstream label;
        label << "c" << c << " pi=" << std::fixed << std::setprecision(3) << st.prior.pi()(c);
        layers.push_back({means.row(c), palette(c), 6.0, 1.0, true, label.str()});
    }
    return scatter_svg(layers, title);
}

std::vector<int> parse_component_list(const std::string& spec, int k) {
    if (spec == "all") {
        std::vector<int> v(static_cast<std::size_t>(k));
        for (int c = 0; c < k; ++c) v[static_cast<std::size_t>(c)] = c;
        return v;
    }
    int c = -1;
    std::size_t used = 0;
    try {
        c = std::stoi(spec, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != spec.size() || c < 0 || c >= k)
        throw ConfigError("bad component '" + spec + "': expected all, mix or an index below " + std::to_string(k));
    return {c};
}

double held_out_accuracy(TrainState& st, const LabeledDataset& ds, int component, int label) {
    const Mat x = ds.rows_with_label(label);
    if (x.rows() == 0) throw ConfigError("dataset has no rows with label " + std::to_string(label));
    const auto a = assign_clusters(st.e, x, st.prior);
    return static_cast<double>(std::count(a.begin(), a.end(), component)) / static_cast<double>(a.size());
}

}  // namespace

Fault fault_from_string(const std::string& s) {
    if (s == "none") return Fault::None;
    if (s == "flip-mu") return Fault::FlipMuSign;
    if (s == "flip-sigma") return Fault::FlipSigmaSign;
    if (s == "flip-rho") return Fault::FlipRhoSign;
    throw ConfigError("unknown fault '" + s + "' (none, flip-mu, flip-sigma, flip-rho)");
}

int guarded(const std::function<int()>& fn, std::ostream& err) {
    try {
        return fn();
    } catch (const NumericError& e) {
        err << "numeric error: " << e.what() << '\n';
        return kExitNumeric;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kExitUser;
    } catch (const nlohmann::json::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitUser;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return kExitUser;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << '\n';
        return kExitNumeric;
    }
}

int cmd_train(const TrainArgs& a, std::ostream& out) {
    RunConfig cfg = load_run_config(a.config_path);
    if (a.steps) cfg.train.steps = *a.steps;
    if (a.output_dir) cfg.output_dir = *a.output_dir;
    const LabeledDataset ds = resolve(cfg);
    const fs::path dir(cfg.output_dir);
    fs::create_directories(dir);

    std::ofstream history(dir / "history.jsonl", std::ios::binary);
    if (!history) throw ConfigError("cannot write " + (dir / "history.jsonl").string());
    TrainHooks hooks;
    hooks.on_history = [&](const TrainState&, const StepReport& r) {
        history << to_json(r).dump() << '\n';
        history.flush();
    };
    hooks.on_checkpoint = [&](const TrainState& st) {
        write_json_file((dir / ("checkpoint_" + std::to_string(st.step) + ".json")).string(), checkpoint_to_json(st));
    };
    TrainResult res = train(cfg.train, ds, hooks);
    check_state(res.state);

    Rng rng(cfg.seed ^ kEvalStream);
    std::ostringstream line;
    line << "trained " << res.state.step << " steps";
    if (cfg.eval.enabled && ds.has_labels() && ds.num_classes() > res.state.prior.k()) {
        line << "; evaluation skipped (" << ds.num_classes() << " classes but only " << res.state.prior.k()
             << " components)";
    } else if (cfg.eval.enabled && ds.has_labels()) {
        const EvalReport rep = evaluate(res.state.prior, res.state.g, res.state.e, ds, cfg.eval.options, rng);
        write_json_file((dir / "eval.json").string(), to_json(rep));
        line << "; " << summary_line(rep);
    }
    if (cfg.plot.enabled && ds.dim() == 2)
        write_text_file((dir / "scatter.svg").string(),
                        figure(res.state, ds, cfg.plot.real_points, cfg.plot.samples_per_component, rng,
                               "step " + std::to_string(res.state.step)));
    out << line.str() << '\n';
    return kExitOk;
}

int cmd_eval(const EvalArgs& a, std::ostream& out) {
    TrainState st = load_checkpoint(a.checkpoint);
    const LabeledDataset ds = load_source(a.data);
    check_dims(st, ds);
    if (!ds.has_labels()) throw ConfigError("evaluation needs a labeled dataset");
    EvalOptions opts;
    opts.n_gen_per_cluster = a.n_gen;
    if (a.matching == "optimal") opts.matching = Matching::Optimal;
    else if (a.matching != "greedy") throw ConfigError("--matching must be greedy or optimal");
    Rng rng(a.seed ^ kEvalStream);
    const EvalReport rep = evaluate(st.prior, st.g, st.e, ds, opts, rng);
    write_json_file(a.out, to_json(rep));
    out << summary_line(rep) << '\n';
    if (a.assignment)
        for (std::size_t c = 0; c < rep.icfid_detail.assignment.size(); ++c)
            out << "class " << c << " -> cluster " << rep.icfid_detail.assignment[c] << '\n';
    return kExitOk;
}

int cmd_generate(const GenerateArgs& a, std::ostream& out) {
    TrainState st = load_checkpoint(a.checkpoint);
    if (a.n < 1 && !a.means) throw ConfigError("-n must be >= 1");
    Rng rng(a.seed ^ kEvalStream);
    Mat x;
    std::vector<int> comp;
    if (a.means) {
        const std::vector<int> cs = a.component == "mix" ? parse_component_list("all", st.prior.k())
                                                         : parse_component_list(a.component, st.prior.k());
        const Mat all = generate_means(st.prior, st.g);
        x.resize(static_cast<Eigen::Index>(cs.size()), all.cols());
        for (std::size_t i = 0; i < cs.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = all.row(cs[i]);
        comp = cs;
    } else if (a.component == "mix") {
        const LatentBatch lb = sample(st.prior, a.n, rng, st.config.loss.tau);
        x = st.g.forward(lb.z, Mode::Eval);
        comp = lb.ancestor;
    } else {
        const std::vector<int> cs = parse_component_list(a.component, st.prior.k());
        x.resize(static_cast<Eigen::Index>(cs.size()) * a.n, st.config.data_dim);
        Eigen::Index row = 0;
        for (int c : cs) {
            x.middleRows(row, a.n) = generate_component(st.prior, st.g, c, a.n, rng);
            row += a.n;
            comp.insert(comp.end(), static_cast<std::size_t>(a.n), c);
        }
    }
    write_samples(a.out, x, comp);
    if (!a.svg.empty()) {
        if (x.cols() != 2) throw ConfigError("--svg needs two-dimensional data");
        std::vector<ScatterLayer> layers;
        for (int c = 0; c < st.prior.k(); ++c) {
            std::vector<Eigen::Index> rows;
            for (std::size_t i = 0; i < comp.size(); ++i)
                if (comp[i] == c) rows.push_back(static_cast<Eigen::Index>(i));
            if (rows.empty()) continue;
            layers.push_back({x(rows, Eigen::all), palette(c), a.means ? 6.0 : 1.6, a.means ? 1.0 : 0.7, a.means,
                              "c" + std::to_string(c)});
        }
        write_text_file(a.svg, scatter_svg(layers, "generated samples"));
    }
    out << "wrote " << x.rows() << " rows to " << a.out << '\n';
    return kExitOk;
}

int cmd_manipulate(const ManipulateArgs& a, std::ostream& out) {
    TrainState st = load_checkpoint(a.checkpoint);
    const LabeledDataset ds = load_source(a.data);
    check_dims(st, ds);
    if (a.probes.empty()) throw EmptyProbeSet("at least one --probe is required");
    std::vector<ProbeData> probes;
    for (const auto& [c, path] : a.probes) {
        if (c < 0 || c >= st.prior.k()) throw ConfigError("probe component " + std::to_string(c) + " out of range");
        const LabeledDataset p = load_csv(path, false, ScaleMode::None);
        if (p.dim() != ds.dim())
            throw ShapeMismatch("probe file " + path + " has " + std::to_string(p.dim()) + " columns, dataset has " +
                                std::to_string(ds.dim()));
        probes.push_back({c, a.probes_scaled ? p.x : ds.scaling.apply(p.x)});
    }

    auto probe_acc = [&](const ProbeData& p) {
        const auto asg = assign_clusters(st.e, p.x, st.prior);
        return static_cast<double>(std::count(asg.begin(), asg.end(), p.component)) / static_cast<double>(asg.size());
    };
    Json report = {{"probes", Json::array()}, {"heldout", Json::array()}};
    std::vector<double> before_probe, before_held;
    for (const auto& p : probes) before_probe.push_back(probe_acc(p));
    for (const auto& [c, label] : a.heldout) before_held.push_back(held_out_accuracy(st, ds, c, label));

    ManipulateConfig mc;
    mc.steps = a.steps;
    mc.mixup_rounds = a.mixup;
    const ManipulateReport mr = manipulate_attributes(st, ds, probes, mc);
    check_state(st);

    for (std::size_t i = 0; i < probes.size(); ++i)
        report["probes"].push_back({{"component", probes[i].component},
                                    {"rows", probes[i].x.rows()},
                                    {"accuracy_before", before_probe[i]},
                                    {"accuracy_after", probe_acc(probes[i])}});
    for (std::size_t i = 0; i < a.heldout.size(); ++i) {
        const double after = held_out_accuracy(st, ds, a.heldout[i].first, a.heldout[i].second);
        report["heldout"].push_back({{"component", a.heldout[i].first},
                                     {"label", a.heldout[i].second},
                                     {"accuracy_before", before_held[i]},
                                     {"accuracy_after", after}});
        out << "label " << a.heldout[i].second << " -> component " << a.heldout[i].first << ": accuracy "
            << before_held[i] << " -> " << after << '\n';
    }
    report["steps"] = a.steps;
    report["final_probe_loss"] = mr.probe_loss.empty() ? 0.0 : mr.probe_loss.back();

    const fs::path dir(a.out_dir);
    fs::create_directories(dir);
    write_json_file((dir / ("checkpoint_" + std::to_string(st.step) + ".json")).string(), checkpoint_to_json(st));
    write_json_file((dir / "manipulation.json").string(), report);
    for (const auto& p : report["probes"])
        out << "probe component " << p["component"] << ": accuracy " << p["accuracy_before"].get<double>() << " -> "
            << p["accuracy_after"].get<double>() << '\n';
    return kExitOk;
}

int cmd_verify_gradients(const VerifyArgs& a, std::ostream& out) {
    VerifyOptions o;
    o.fault = a.fault;
    o.seed = a.seed;
    if (a.samples) {
        o.n_large = *a.samples;
        o.n_small = std::max(1L, *a.samples / 10);
    }
    const VerifyReport rep = verify_gradients(o);
    out << rep.table();
    const bool ok = rep.all_pass();
    out << (ok ? "all checks passed" : "VERIFICATION FAILED") << '\n';
    return ok ? kExitOk : kExitVerify;
}

}  // namespace slogan::cli
