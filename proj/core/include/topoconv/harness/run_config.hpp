#pragma once

#include <cstdint>
#include <nlohmann/json.hpp>
#include <vector>

#include "topoconv/harness/mini_net.hpp"
#include "topoconv/harness/synth_data.hpp"

namespace topoconv::harness {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct DataConfig {
  KindMix kind = KindMix::ring_curve;
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t n_train = 80;
  std::size_t n_test = 20;
  double noise_sigma = 0.1;
};

/// Everything that determines a training run, given the code version.
struct TrainConfig {
  std::uint64_t seed = 0;
  std::size_t epochs = 30;
  std::size_t batch_size = 4;
  AdamConfig adam;
  NetConfig net;
  DataConfig data;
  double threshold = 0.5;

  void validate() const;
};

/// JSON run configuration. Sections: train, net, tpg, data, eval, ablation,
/// plus a top-level seed. Every key has a default; unknown keys are rejected.
struct RunConfig {
  TrainConfig train;
  std::vector<std::uint64_t> ablation_seeds{0, 1, 2, 3, 4};

  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load(const std::string& path);
  // Fully expanded form (defaults filled in); this is the provenance echo.
  nlohmann::json to_json() const;
};

}  // namespace topoconv::harness
