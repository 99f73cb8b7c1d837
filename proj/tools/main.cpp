#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"

using namespace slogan::cli;

namespace {

// "C=VALUE" pairs for --probe and --heldout.
template <class T>
std::vector<std::pair<int, T>> split_pairs(const std::vector<std::string>& items, const char* flag) {
    std::vector<std::pair<int, T>> out;
    for (const auto& s : items) {
        const auto eq = s.find('=');
        if (eq == std::string::npos || eq == 0) throw slogan::ConfigError(std::string(flag) + " expects C=VALUE, got '" + s + "'");
        try {
            const int c = std::stoi(s.substr(0, eq));
            if constexpr (std::is_same_v<T, int>) out.emplace_back(c, std::stoi(s.substr(eq + 1)));
            else out.emplace_back(c, s.substr(eq + 1));
        } catch (const std::logic_error&) {
            throw slogan::ConfigError(std::string(flag) + " expects C=VALUE, got '" + s + "'");
        }
    }
    return out;
}

void add_source(CLI::App* cmd, DataSource& src, std::uint64_t& synthetic) {
    cmd->add_option("--config", src.config_path, "Run config whose dataset section is used");
    cmd->add_option("--csv", src.csv_path, "Dataset CSV");
    cmd->add_flag("--labels", src.csv_labels, "CSV has a trailing label column");
    cmd->add_option("--scale", src.csv_scale, "CSV scaling: none, minmax_pm1, minmax_01, log2p1_01");
    cmd->add_option("--synthetic", synthetic, "Use the imbalanced 8-Gaussian dataset with this seed");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Gaussian-mixture-prior GAN with Stein-gradient prior learning"};
    app.require_subcommand(1);

    TrainArgs ta;
    long steps = 0;
    std::string outdir;
    auto* train = app.add_subcommand("train", "Train from a run config");
    train->add_option("config", ta.config_path, "Run config JSON")->required();
    train->add_option("--steps", steps, "Override train.steps");
    train->add_option("--output-dir", outdir, "Override output_dir");

    EvalArgs ea;
    std::uint64_t eval_synth = 0;
    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a labeled dataset");
    eval->add_option("checkpoint", ea.checkpoint, "Checkpoint JSON")->required();
    add_source(eval, ea.data, eval_synth);
    eval->add_option("--out", ea.out, "Report path");
    eval->add_flag("--assignment", ea.assignment, "Print the class -> cluster map");
    eval->add_option("--seed", ea.seed, "Sampling seed");
    eval->add_option("--n-gen", ea.n_gen, "Generated samples per component")->check(CLI::PositiveNumber);
    eval->add_option("--matching", ea.matching, "greedy or optimal");

    GenerateArgs ga;
    auto* gen = app.add_subcommand("generate", "Sample from a checkpoint");
    gen->add_option("checkpoint", ga.checkpoint, "Checkpoint JSON")->required();
    gen->add_option("--component", ga.component, "Component index, all or mix");
    gen->add_option("-n", ga.n, "Rows per component (or in total for mix)");
    gen->add_flag("--means", ga.means, "Emit G(mu_c) for the selected components");
    gen->add_option("--out", ga.out, "Samples CSV path");
    gen->add_option("--svg", ga.svg, "Also write a scatter plot");
    gen->add_option("--seed", ga.seed, "Sampling seed");

    ManipulateArgs ma;
    std::vector<std::string> probe_items, heldout_items;
    std::uint64_t manip_synth = 0;
    auto* manip = app.add_subcommand("manipulate", "Steer components toward probe sets");
    manip->add_option("checkpoint", ma.checkpoint, "Checkpoint JSON")->required();
    manip->add_option("--probe", probe_items, "C=PATH: probe CSV for component C")->required();
    manip->add_option("--heldout", heldout_items, "C=LABEL: report how dataset rows with LABEL are assigned");
    add_source(manip, ma.data, manip_synth);
    manip->add_flag("--probes-scaled", ma.probes_scaled, "Probe CSVs are already in the model's scaled space");
    manip->add_option("--steps", ma.steps, "Probe steps, each after one training step")->check(CLI::NonNegativeNumber);
    manip->add_option("--mixup", ma.mixup, "Mixup rounds T")->check(CLI::NonNegativeNumber);
    manip->add_option("--out-dir", ma.out_dir, "Directory for the checkpoint and report");

    VerifyArgs va;
    std::string fault = "none";
    long samples = 0;
    auto* verify = app.add_subcommand("verify-gradients", "Check the prior gradient estimators against closed forms");
    verify->add_option("--fault", fault, "Inject a fault: none, flip-mu, flip-sigma, flip-rho");
    verify->add_option("--samples", samples, "Monte-Carlo samples for the large run")->check(CLI::PositiveNumber);
    verify->add_option("--seed", va.seed, "Sampling seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUser;
    }

    return guarded(
        [&] {
            if (*train) {
                if (train->count("--steps")) ta.steps = steps;
                if (train->count("--output-dir")) ta.output_dir = outdir;
                return cmd_train(ta, std::cout);
            }
            if (*eval) {
                if (eval->count("--synthetic")) ea.data.synthetic_seed = eval_synth;
                return cmd_eval(ea, std::cout);
            }
            if (*gen) return cmd_generate(ga, std::cout);
            if (*manip) {
                if (manip->count("--synthetic")) ma.data.synthetic_seed = manip_synth;
                ma.probes = split_pairs<std::string>(probe_items, "--probe");
                ma.heldout = split_pairs<int>(heldout_items, "--heldout");
                return cmd_manipulate(ma, std::cout);
            }
            va.fault = fault_from_string(fault);
            if (verify->count("--samples")) va.samples = samples;
            return cmd_verify_gradients(va, std::cout);
        },
        std::cerr);
}
