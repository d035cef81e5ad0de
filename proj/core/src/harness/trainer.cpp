#include "topoconv/harness/trainer.hpp"

#include <cmath>
#include <numeric>
#include <random>
#include <spdlog/spdlog.h>

#include "topoconv/errors.hpp"

namespace topoconv::harness {

void Adam::step(const std::vector<NamedParameter>& params) {
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.push_back(Tensor::zeros_like(p.param->value));
      v_.push_back(Tensor::zeros_like(p.param->value));
    }
  }
  if (m_.size() != params.size()) throw std::logic_error("Adam: parameter list changed between steps");
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& value = params[k].param->value;
    const auto& grad = params[k].param->grad;
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < value.size(); ++i) {
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * grad[i];
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * grad[i] * grad[i];
      const double mhat = m[i] / bc1, vhat = v[i] / bc2;
      value[i] -= cfg_.learning_rate * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

std::vector<double> train_epochs(MiniNet& net, const TrainConfig& cfg, const std::vector<SynthSample>& samples) {
  cfg.validate();
  if (samples.empty()) throw ValidationError("train: empty dataset");
  auto params = net.parameters();
  Adam adam(cfg.adam);
  std::mt19937_64 rng(cfg.seed ^ 0x5eed5eed5eedULL);
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  std::vector<double> curve;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::vector<std::size_t> batch(order.begin() + static_cast<long>(start),
                                           order.begin() + static_cast<long>(std::min(order.size(), start + cfg.batch_size)));
      const Tensor images = stack_images(samples, batch);
      const Tensor masks = stack_masks(samples, batch);
      for (auto& p : params) p.param->zero_grad();
      Tape tape;
      Var loss = dice_loss(net.forward(tape, images, NormMode::train), masks, 1.0);
      const double value = loss.value()[0];
      if (!std::isfinite(value)) {
        throw ValidationError("train: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                              std::to_string(batches) + " (learning_rate " + std::to_string(cfg.adam.learning_rate) +
                              ")");
      }
      tape.backward(loss);
      adam.step(params);
      total += value;
      ++batches;
    }
    curve.push_back(total / static_cast<double>(batches));
    spdlog::debug("epoch {:3d}  dice loss {:.6f}", epoch, curve.back());
  }
  return curve;
}

TrainResult train(const TrainConfig& cfg, const std::vector<SynthSample>& samples) {
  TrainResult result{MiniNet(cfg.net, cfg.seed), {}};
  result.epoch_loss = train_epochs(result.net, cfg, samples);
  return result;
}

EvalResult evaluate(MiniNet& net, const std::vector<SynthSample>& samples, double threshold) {
  EvalResult result;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Tensor prob = net.predict(stack_images(samples, {i}));
    result.per_image.push_back(evaluate_pair(prob, samples[i].mask, threshold));
  }
  result.mean = mean_report(result.per_image);
  return result;
}

nlohmann::json to_json(const EvalResult& result) {
  nlohmann::json j{{"mean", result.mean.to_json()}, {"per_image", nlohmann::json::array()}};
  for (const auto& r : result.per_image) j["per_image"].push_back(r.to_json());
  return j;
}

}  // namespace topoconv::harness
