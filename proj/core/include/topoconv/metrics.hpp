#pragma once

#include <cstddef>
#include <cstdint>
#include <nlohmann/json.hpp>
#include <span>
#include <vector>

#include "topoconv/cubical_ph.hpp"
#include "topoconv/tensor.hpp"

namespace topoconv {

class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(std::size_t height, std::size_t width) : height_(height), width_(width), bits_(height * width, 0) {}
  BinaryMask(std::size_t height, std::size_t width, std::vector<std::uint8_t> bits);

  // Pixel is foreground iff value >= threshold.
  static BinaryMask threshold(std::size_t height, std::size_t width, std::span<const double> values,
                              double threshold = 0.5);

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t size() const noexcept { return bits_.size(); }

  bool at(std::size_t y, std::size_t x) const { return bits_[y * width_ + x] != 0; }
  // Out-of-range reads are background.
  bool at_or_zero(long y, long x) const;
  void set(std::size_t y, std::size_t x, bool v) { bits_[y * width_ + x] = v ? 1 : 0; }

  std::span<const std::uint8_t> bits() const noexcept { return bits_; }
  std::size_t count() const;

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<std::uint8_t> bits_;
};

/// 0 = background, 1..count = connected foreground components in first-seen raster order.
struct ComponentLabeling {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<int> labels;
  int count = 0;
};

ComponentLabeling label_components(const BinaryMask& mask, Connectivity connectivity = Connectivity::four);

struct BettiNumbers {
  int b0 = 0;
  int b1 = 0;
  friend bool operator==(const BettiNumbers&, const BettiNumbers&) = default;
};

/// b0: 4-connected foreground components. b1: 8-connected background components
/// that do not touch the border (all border-touching background is the outer region).
BettiNumbers betti_numbers(const BinaryMask& mask);

/// V - E + F of the foreground cubical complex: pixels, orthogonal adjacent pairs, full 2x2 blocks.
long euler_characteristic(const BinaryMask& mask);

/// True iff removing (y, x) preserves both foreground (4) and background (8) topology.
bool is_simple_point(const BinaryMask& mask, std::size_t y, std::size_t x);

/// Two-subiteration thinning by sequential deletion of simple border points, to a fixpoint.
/// Pixels with exactly one foreground 4-neighbour at the start of a subiteration are end points and stay.
BinaryMask skeletonize(const BinaryMask& mask);

double dice(const BinaryMask& pred, const BinaryMask& gt);
double cl_dice(const BinaryMask& pred, const BinaryMask& gt);

/// Mann-Whitney AUC; ties count one half. Throws ValidationError when gt is single-class.
double auc(std::span<const double> prob, const BinaryMask& gt);

double adjusted_rand_index(std::span<const int> a, std::span<const int> b);
double variation_of_information(std::span<const int> a, std::span<const int> b);

// On component labelings of the two masks (background is one cluster).
double ari_error(const BinaryMask& pred, const BinaryMask& gt);
double variation_of_information(const BinaryMask& pred, const BinaryMask& gt);

struct MetricsReport {
  double dice = 0.0;
  double auc = 0.0;
  double cl_dice = 0.0;
  double betti0_error = 0.0;
  double betti1_error = 0.0;
  double euler_error = 0.0;
  double ari_error = 0.0;
  double vi = 0.0;
  // Topological counts; averaged when the report summarizes a dataset.
  double pred_b0 = 0.0, pred_b1 = 0.0, pred_euler = 0.0;
  double gt_b0 = 0.0, gt_b1 = 0.0, gt_euler = 0.0;

  nlohmann::json to_json() const;
  static MetricsReport from_json(const nlohmann::json& j);
};

/// Binarizes prob (>= threshold) and computes every metric against gt.
MetricsReport evaluate_pair(std::span<const double> prob, const BinaryMask& gt, double threshold = 0.5);
MetricsReport evaluate_pair(const Tensor& prob, const BinaryMask& gt, double threshold = 0.5);

MetricsReport mean_report(std::span<const MetricsReport> reports);

}  // namespace topoconv
