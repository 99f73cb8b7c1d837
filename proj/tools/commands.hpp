#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "run_config.hpp"
#include "slogan/verify.hpp"

namespace slogan::cli {

// Stable exit-code contract.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUser = 1;
inline constexpr int kExitNumeric = 2;
inline constexpr int kExitVerify = 3;

/// Where eval/manipulate read their dataset from: a run config's dataset
/// section, a CSV file, or the synthetic generator.
struct DataSource {
    std::string config_path;
    std::string csv_path;
    bool csv_labels = false;
    std::string csv_scale = "minmax_pm1";
    std::optional<std::uint64_t> synthetic_seed;
};

struct TrainArgs {
    std::string config_path;
    std::optional<long> steps;  // overrides train.steps
    std::optional<std::string> output_dir;
};

struct EvalArgs {
    std::string checkpoint;
    DataSource data;
    std::string out = "eval.json";
    bool assignment = false;
    std::uint64_t seed = 0;
    int n_gen = 2000;
    std::string matching = "greedy";
};

struct GenerateArgs {
    std::string checkpoint;
    std::string component = "all";  // index, "all" or "mix"
    int n = 1000;
    bool means = false;
    std::string out = "samples.csv";
    std::string svg;
    std::uint64_t seed = 0;
};

struct ManipulateArgs {
    std::string checkpoint;
    std::vector<std::pair<int, std::string>> probes;  // component, csv path
    std::vector<std::pair<int, int>> heldout;         // component, dataset label checked after the run
    DataSource data;
    bool probes_scaled = false;  // probes already in the model's scaled space
    long steps = 2000;
    int mixup = 5;
    std::string out_dir = ".";
};

struct VerifyArgs {
    Fault fault = Fault::None;
    std::optional<long> samples;
    std::uint64_t seed = 20240607;
};

int cmd_train(const TrainArgs& a, std::ostream& out);
int cmd_eval(const EvalArgs& a, std::ostream& out);
int cmd_generate(const GenerateArgs& a, std::ostream& out);
int cmd_manipulate(const ManipulateArgs& a, std::ostream& out);
int cmd_verify_gradients(const VerifyArgs& a, std::ostream& out);

/// Runs `fn`, mapping exceptions onto exit codes and printing them to `err`.
int guarded(const std::function<int()>& fn, std::ostream& err);

Fault fault_from_string(const std::string& s);

}  // namespace slogan::cli
