#include "topoconv/tpg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "topoconv/errors.hpp"
#include "topoconv/ops.hpp"

namespace topoconv {

void TpgConfig::validate() const {
  if (!(tau0 >= 0.0)) throw ValidationError("tpg: tau0 must be >= 0");
  if (!(gaussian_sigma > 0.0)) throw ValidationError("tpg: gaussian_sigma must be > 0");
  if (!stop_gradient_prior) throw ValidationError("tpg: gradients through persistent homology are not supported");
}

Tensor channel_pool(const Tensor& input, PoolMode mode) {
  if (input.rank() != 4) throw ShapeError("channel_pool: expected [N,C,H,W], got " + shape_to_string(input.shape()));
  const std::size_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3), hw = h * w;
  Tensor pooled(Shape{n, h, w});
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t p = 0; p < hw; ++p) {
      double acc = mode == PoolMode::max ? -std::numeric_limits<double>::infinity() : 0.0;
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double v = input[(s * c + ch) * hw + p];
        acc = mode == PoolMode::max ? std::max(acc, v) : acc + v;
      }
      pooled[s * hw + p] = mode == PoolMode::max ? acc : acc / static_cast<double>(c);
    }
    const auto sample = pooled.data().subspan(s * hw, hw);
    const auto norm = ScalarMap::normalized(h, w, sample);
    std::copy(norm.values().begin(), norm.values().end(), sample.begin());
  }
  return pooled;
}

Tensor rasterize_prior(const std::vector<GeneratorSet>& generators, std::size_t n, std::size_t h, std::size_t w) {
  if (generators.size() != n) throw ShapeError("rasterize_prior: one generator set per sample expected");
  Tensor prior(Shape{n, h, w});
  for (std::size_t s = 0; s < n; ++s) {
    for (const auto& g : generators[s].entries) {
      for (const auto& pt : {g.birth, g.death}) {
        if (pt.x >= w || pt.y >= h) throw std::logic_error("rasterize_prior: generator outside the map");
        prior[(s * h + pt.y) * w + pt.x] = 1.0;
      }
    }
  }
  return prior;
}

std::array<double, 9> gaussian_kernel3(double sigma) {
  if (!(sigma > 0.0)) throw ValidationError("gaussian kernel: sigma must be > 0");
  std::array<double, 9> k{};
  double total = 0.0;
  for (int dy = -1; dy <= 1; ++dy)
    for (int dx = -1; dx <= 1; ++dx) {
      const double v = std::exp(-static_cast<double>(dx * dx + dy * dy) / (2.0 * sigma * sigma));
      k[(dy + 1) * 3 + (dx + 1)] = v;
      total += v;
    }
  for (auto& v : k) v /= total;
  return k;
}

Tensor gaussian_dilate(const Tensor& prior, double sigma) {
  if (prior.rank() != 3) throw ShapeError("gaussian_dilate: expected [N,H,W], got " + shape_to_string(prior.shape()));
  const auto k = gaussian_kernel3(sigma);
  const std::size_t n = prior.dim(0);
  const long h = static_cast<long>(prior.dim(1)), w = static_cast<long>(prior.dim(2));
  Tensor out(prior.shape());
  for (std::size_t s = 0; s < n; ++s) {
    const double* src = prior.data().data() + s * h * w;
    double* dst = out.data().data() + s * h * w;
    for (long y = 0; y < h; ++y)
      for (long x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const long sy = y + dy, sx = x + dx;
            if (sy < 0 || sx < 0 || sy >= h || sx >= w) continue;
            acc += k[(dy + 1) * 3 + (dx + 1)] * src[sy * w + sx];
          }
        dst[y * w + x] = std::clamp(acc, 0.0, 1.0);
      }
  }
  return out;
}

TpgMaps compute_prior(const Tensor& phi_in, const TpgConfig& cfg) {
  cfg.validate();
  TpgMaps maps;
  maps.pooled = channel_pool(phi_in, cfg.pool_mode);
  const std::size_t n = maps.pooled.dim(0), h = maps.pooled.dim(1), w = maps.pooled.dim(2);
  for (std::size_t s = 0; s < n; ++s) {
    const auto sample = maps.pooled.data().subspan(s * h * w, h * w);
    ScalarMap map(h, w, std::vector<double>(sample.begin(), sample.end()));
    auto pd = compute_ph0(map, cfg.connectivity);
    auto gens = pairs_to_generators(pd);
    maps.kept.push_back(cfg.use_filtering ? filter_generators(pd, gens, cfg.tau0) : std::move(gens));
    maps.diagrams.push_back(std::move(pd));
  }
  maps.prior = rasterize_prior(maps.kept, n, h, w);
  maps.dilated = cfg.use_dilation ? gaussian_dilate(maps.prior, cfg.gaussian_sigma) : maps.prior;
  return maps;
}

namespace {

Var weighted_by_prior(const Var& phi_in, const TpgConfig& cfg, TpgMaps* maps_out) {
  TpgMaps maps = compute_prior(phi_in.value(), cfg);
  Var dil = phi_in.tape()->constant(maps.dilated);
  Var out = mul(phi_in, dil);
  if (maps_out) *maps_out = std::move(maps);
  return out;
}

}  // namespace

Var tpg_forward(const Var& phi_in, const TpgConfig& cfg, TpgMaps* maps) {
  return add(weighted_by_prior(phi_in, cfg, maps), phi_in);
}

Var tpg_forward_no_aggregation(const Var& phi_in, const TpgConfig& cfg, TpgMaps* maps) {
  return weighted_by_prior(phi_in, cfg, maps);
}

Var tpg_posterior(const Var& phi_in, const TpgConfig& cfg, TpgMaps* maps) {
  return cfg.use_aggregation ? tpg_forward(phi_in, cfg, maps) : tpg_forward_no_aggregation(phi_in, cfg, maps);
}

}  // namespace topoconv
