#pragma once

#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "topoconv/harness/mini_net.hpp"
#include "topoconv/harness/run_config.hpp"

namespace topoconv::harness {

/// Writes <dir>/params.bin (TNSR blobs of every parameter, then batch-norm
/// running statistics, back to back) and <dir>/manifest.json (names, shapes,
/// byte offsets, config echo, seed, version, loss curve).
void save_checkpoint(const std::string& dir, MiniNet& net, const RunConfig& config,
                     const std::vector<double>& loss_curve);

struct LoadedCheckpoint {
  MiniNet net;
  RunConfig config;
  nlohmann::json manifest;
};

LoadedCheckpoint load_checkpoint(const std::string& dir);

}  // namespace topoconv::harness
