#pragma once

#include <optional>
#include <string>
#include <vector>

#include "slogan/io.hpp"

namespace slogan::cli {

struct DatasetSpec {
    std::string kind = "synthetic_8gauss";  // or "csv"
    std::uint64_t seed = 0;
    std::array<int, 8> counts = kImbalancedCounts;
    double std_dev = 0.1;
    double radius = 2.0;
    std::string path;
    bool has_labels = true;
    ScaleMode scale = ScaleMode::MinMaxPm1;
};

struct EvalSettings {
    bool enabled = true;
    EvalOptions options;
};

struct PlotSettings {
    bool enabled = true;
    int real_points = 4000;
    int samples_per_component = 250;
};

struct RunConfig {
    std::uint64_t seed = 0;
    std::string output_dir;
    DatasetSpec dataset;
    TrainConfig train;
    EvalSettings eval;
    PlotSettings plot;
    // Explicit hidden/output layers; input sizes are implied by the latent and data dimensions.
    std::optional<std::vector<LayerSpec>> g_layers, d_layers, e_layers;
};

/// The shipped RunConfig schema (compiled in from schemas/run_config.schema.json).
const Json& run_config_schema();

/// Validates against the schema, then builds the config. Every schema
/// violation is reported in one ConfigError, one "pointer: message" per line.
/// Architectures default to the synthetic ones sized from latent_dim and the
/// dataset dimension; `data_dim` is filled in by `resolve`.
RunConfig parse_run_config(const Json& j);
RunConfig load_run_config(const std::string& path);

/// Loads (or generates) the dataset and fixes data-dependent fields
/// (train.data_dim, default architectures). Throws ConfigError for a dataset
/// whose dimension disagrees with explicit architectures.
LabeledDataset resolve(RunConfig& cfg);

LabeledDataset load_dataset(const DatasetSpec& spec);
DatasetSpec dataset_spec_from_json(const Json& j, const std::string& pointer = "/dataset");

}  // namespace slogan::cli
