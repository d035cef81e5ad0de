#pragma once

#include <array>
#include <vector>

#include "topoconv/autodiff.hpp"
#include "topoconv/cubical_ph.hpp"

namespace topoconv {

enum class PoolMode { max, mean };

struct TpgConfig {
  double tau0 = 0.05;
  PoolMode pool_mode = PoolMode::max;
  double gaussian_sigma = 1.0;
  // The prior is always a constant factor for differentiation; kept for the config surface.
  bool stop_gradient_prior = true;
  Connectivity connectivity = Connectivity::four;

  // Ablation switches. Filtering off keeps every generator; dilation off uses the binary prior.
  bool use_filtering = true;
  bool use_dilation = true;
  bool use_aggregation = true;

  void validate() const;
};

/// Per-pixel reduction over channels of [N,C,H,W], min-max normalized per sample -> [N,H,W].
Tensor channel_pool(const Tensor& input, PoolMode mode);

/// Binary [N,H,W] map with ones at every birth and death coordinate of the given generators.
Tensor rasterize_prior(const std::vector<GeneratorSet>& generators, std::size_t n, std::size_t h, std::size_t w);

/// Normalized 3x3 Gaussian taps in raster order, summing to 1.
std::array<double, 9> gaussian_kernel3(double sigma);

/// Zero-padded 3x3 Gaussian blur of an [N,H,W] prior, clamped to [0,1].
Tensor gaussian_dilate(const Tensor& prior, double sigma);

/// Intermediate products of one TPG pass, exposed for inspection and tests.
struct TpgMaps {
  Tensor pooled;    // [N,H,W]
  Tensor prior;     // [N,H,W] binary
  Tensor dilated;   // [N,H,W], equals prior when dilation is disabled
  std::vector<PersistenceDiagram> diagrams;
  std::vector<GeneratorSet> kept;
};

TpgMaps compute_prior(const Tensor& phi_in, const TpgConfig& cfg);

/// phi_post = phi_dil * phi_in + phi_in, phi_dil broadcast over channels and held constant.
Var tpg_forward(const Var& phi_in, const TpgConfig& cfg, TpgMaps* maps = nullptr);

/// Ablation variant without the additive skip: phi_post = phi_dil * phi_in.
Var tpg_forward_no_aggregation(const Var& phi_in, const TpgConfig& cfg, TpgMaps* maps = nullptr);

// Dispatches on cfg.use_aggregation.
Var tpg_posterior(const Var& phi_in, const TpgConfig& cfg, TpgMaps* maps = nullptr);

}  // namespace topoconv
