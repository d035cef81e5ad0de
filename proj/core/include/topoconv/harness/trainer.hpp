#pragma once

#include <vector>

#include "topoconv/harness/mini_net.hpp"
#include "topoconv/harness/run_config.hpp"
#include "topoconv/metrics.hpp"

namespace topoconv::harness {

class Adam {
 public:
  explicit Adam(AdamConfig cfg) : cfg_(cfg) {}

  // One update of every parameter from its accumulated gradient; gradients are left untouched.
  void step(const std::vector<NamedParameter>& params);

 private:
  AdamConfig cfg_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  long t_ = 0;
};

struct TrainResult {
  MiniNet net;
  std::vector<double> epoch_loss;  // mean Dice loss per epoch, train mode
};

/// Mini-batch Adam on the Dice loss over `samples`, shuffled each epoch.
/// Single-threaded and deterministic in (cfg, samples). Throws ValidationError on a NaN loss.
TrainResult train(const TrainConfig& cfg, const std::vector<SynthSample>& samples);

// Continues training an existing network; used by train() and by tests that need the initial state.
std::vector<double> train_epochs(MiniNet& net, const TrainConfig& cfg, const std::vector<SynthSample>& samples);

struct EvalResult {
  MetricsReport mean;
  std::vector<MetricsReport> per_image;
};

/// Eval-mode prediction per sample, evaluate_pair at `threshold`, then the mean.
EvalResult evaluate(MiniNet& net, const std::vector<SynthSample>& samples, double threshold = 0.5);

nlohmann::json to_json(const EvalResult& result);

}  // namespace topoconv::harness
