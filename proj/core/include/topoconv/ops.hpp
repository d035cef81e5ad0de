#pragma once

#include <vector>

#include "topoconv/autodiff.hpp"

namespace topoconv {

// ---------------------------------------------------------------------------
// Convolution
// ---------------------------------------------------------------------------

/// Same-size 2-D cross-correlation with zero padding, stride 1.
///
/// input [N,Cin,H,W], weights [Cout,Cin,k,k] with k odd, bias [Cout];
/// padding must equal (k-1)/2.
Var conv2d(const Var& input, const Var& weights, const Var& bias, int padding);

// Forward-only reference used by tests and benches: no tape, plain loops.
Tensor conv2d_reference(const Tensor& input, const Tensor& weights, const Tensor& bias, int padding);

// ---------------------------------------------------------------------------
// Pointwise
// ---------------------------------------------------------------------------

Var relu(const Var& input);
Var sigmoid(const Var& input);

/// a + b. b may match a's shape, or be [N,H,W] / [N,1,H,W] broadcast over a's channel axis.
Var add(const Var& a, const Var& b);
/// a * b elementwise with the same broadcasting rule as add().
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);

Var sum(const Var& a);
// sum(a * weights) with constant weights; the usual scalar probe for gradient checks.
Var weighted_sum(const Var& a, const Tensor& weights);

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

enum class NormMode { train, eval };

/// Per-channel batch normalization state: affine parameters plus running statistics.
struct BatchNorm {
  explicit BatchNorm(std::size_t channels, double eps = 1e-5, double momentum = 0.1);

  Parameter gamma;
  Parameter beta;
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double eps;
  double momentum;
  // False until the first train-mode pass; eval before that falls back to (0, 1) with a warning.
  bool has_batch_stats = false;
  bool warned_without_stats = false;
};

Var batch_norm(const Var& input, BatchNorm& bn, NormMode mode);

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

/// 1 - (2 sum(p t) + smooth) / (sum(p) + sum(t) + smooth), differentiable in prediction.
Var dice_loss(const Var& prediction, const Tensor& target, double smooth = 1.0);

// ---------------------------------------------------------------------------
// Resampling / layout (network plumbing)
// ---------------------------------------------------------------------------

// 2x2 max pool, stride 2; H and W must be even. Ties resolve to the first element in raster order.
Var max_pool2(const Var& input);
Var upsample_nearest2(const Var& input);
Var concat_channels(const Var& a, const Var& b);

}  // namespace topoconv
