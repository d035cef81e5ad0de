#pragma once

#include <cstdint>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "topoconv/conform_conv.hpp"
#include "topoconv/harness/run_config.hpp"
#include "topoconv/metrics.hpp"

namespace topoconv::harness {

/// Outcome of one seeded train/test run.
struct ExperimentResult {
  MetricsReport test;
  std::vector<double> epoch_loss;
  TpgTrace trace;  // summed over bottleneck layers
};

/// Generates n_train + n_test samples from cfg.data with cfg.seed, trains on
/// the first n_train and evaluates on the rest.
ExperimentResult run_experiment(const TrainConfig& cfg);

struct AblationRow {
  std::string group;  // "components" or "conform_layers"
  std::string name;
  nlohmann::json settings;
  std::vector<std::uint64_t> seeds;
  std::vector<ExperimentResult> runs;
  MetricsReport mean;
};

struct AblationTable {
  std::vector<AblationRow> rows;

  const AblationRow& row(const std::string& group, const std::string& name) const;
  nlohmann::json to_json() const;
};

enum class AblationGroups { components, conform_layers, both };

/// Component rows: all on, filtering off, dilation off, aggregation off
/// (conform bottleneck). Layer rows: a depth-3 bottleneck with 0..3 conform
/// blocks, the rest plain conv.
AblationTable ablation_suite(const RunConfig& base, AblationGroups groups = AblationGroups::both);

}  // namespace topoconv::harness
