#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "slogan/eval_metrics.hpp"
#include "slogan/trainer.hpp"

namespace slogan {

using Json = nlohmann::json;

Json to_json(const MixturePrior& prior);
MixturePrior prior_from_json(const Json& j);

Json to_json(const NetSpec& spec);
NetSpec net_spec_from_json(const Json& j);

Json to_json(const Mlp& net);
Mlp net_from_json(const Json& j);

Json to_json(const NetOptimizer& opt);
void optimizer_from_json(const Json& j, NetOptimizer& opt);

Json to_json(const LossConfig& cfg);
LossConfig loss_config_from_json(const Json& j);

Json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const Json& j);

/// Prior, three networks, optimizer states, RNG state and step counter.
Json checkpoint_to_json(const TrainState& state);
TrainState state_from_checkpoint(const Json& j);

Json to_json(const StepReport& rep);
Json to_json(const EvalReport& rep);

/// Reads a JSON document; throws ConfigError naming the path on failure.
Json read_json_file(const std::string& path);
/// Writes `j` with two-space indentation and a trailing newline.
void write_json_file(const std::string& path, const Json& j);

}  // namespace slogan
