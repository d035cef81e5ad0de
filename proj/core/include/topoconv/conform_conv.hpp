#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "topoconv/autodiff.hpp"
#include "topoconv/grad_check.hpp"
#include "topoconv/ops.hpp"
#include "topoconv/tpg.hpp"

namespace topoconv {

// Kernel taps of the 3x3 grid, raster order from (-1,-1) to (1,1).
inline constexpr std::size_t kTaps = 9;
// Offset field channels: tap c owns (2c, 2c+1) = (dy, dx).
inline constexpr std::size_t kOffsetChannels = 2 * kTaps;

/// Bilinear weights of the four integer neighbours of a fractional position.
struct BilinearStencil {
  long y0 = 0;
  long x0 = 0;
  double ly = 0.0;  // y - y0
  double lx = 0.0;  // x - x0

  static BilinearStencil at(double y, double x);
};

/// Bilinear interpolation of channel c of sample n at (y, x); pixels outside
/// [0,H) x [0,W) read as zero.
double bilinear_sample(const Tensor& input, double y, double x, std::size_t n, std::size_t c);

struct BilinearGrad {
  double value = 0.0;
  double d_dy = 0.0;
  double d_dx = 0.0;
};
// Value plus derivative w.r.t. the sampling position (floor-based one-sided at integers).
BilinearGrad bilinear_sample_grad(const Tensor& input, double y, double x, std::size_t n, std::size_t c);

/// 3x3 convolution sampling input at p + p_c + offset_c via bilinear interpolation.
///
/// input [N,Cin,H,W], offsets [N,18,H,W], weights [Cout,Cin,3,3], bias [Cout].
/// Gradients reach input, offsets, weights and bias. With all offsets zero it
/// reproduces conv2d with padding 1.
Var deform_conv2d(const Var& input, const Var& offsets, const Var& weights, const Var& bias);

enum class SampleSource { input, posterior };

// Counts which TPG variant the layer ran; the ablation harness asserts on it.
struct TpgTrace {
  std::size_t aggregated = 0;
  std::size_t blocked = 0;
};

/// Offset-generating conv + sampled conv + batch norm + ReLU.
///
/// The offset conv (Cin -> 18 channels) starts at zero so a fresh layer is an
/// ordinary 3x3 convolution. Main weights start at zero; the owner
/// initializes them.
class ConformLayer {
 public:
  ConformLayer(std::size_t in_channels, std::size_t out_channels, TpgConfig tpg = {},
               SampleSource source = SampleSource::input);

  std::size_t in_channels() const noexcept { return in_channels_; }
  std::size_t out_channels() const noexcept { return out_channels_; }

  std::vector<NamedParameter> parameters(const std::string& prefix = "");

  Parameter offset_weight;  // [18, Cin, 3, 3]
  Parameter offset_bias;    // [18]
  Parameter weight;         // [Cout, Cin, 3, 3]
  Parameter bias;           // [Cout]
  BatchNorm bn;
  TpgConfig tpg;
  SampleSource source;
  TpgTrace trace;

 private:
  std::size_t in_channels_;
  std::size_t out_channels_;
};

// Sampled conv output before batch norm. Offsets come from offset_conv(TPG(phi_in)).
Var conformable_pre_norm(ConformLayer& layer, const Var& phi_in, TpgMaps* maps = nullptr);
Var conformable_forward(ConformLayer& layer, const Var& phi_in, NormMode mode);

// Deformable baseline: offsets from offset_conv(phi_in), no TPG.
Var deformable_pre_norm(ConformLayer& layer, const Var& phi_in);
Var deformable_forward(ConformLayer& layer, const Var& phi_in, NormMode mode);

}  // namespace topoconv
