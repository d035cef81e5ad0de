#include "topoconv/conform_conv.hpp"

#include <cmath>

#include "conv_kernels.hpp"
#include "topoconv/errors.hpp"

namespace topoconv {

BilinearStencil BilinearStencil::at(double y, double x) {
  const double fy = std::floor(y), fx = std::floor(x);
  return {static_cast<long>(fy), static_cast<long>(fx), y - fy, x - fx};
}

namespace {

// Positions this far outside the map read as zero without touching the stencil.
constexpr double kFarAway = 1e9;

inline double pixel(const double* plane, long h, long w, long y, long x) {
  return (y >= 0 && y < h && x >= 0 && x < w) ? plane[y * w + x] : 0.0;
}

inline BilinearGrad sample_plane(const double* plane, long h, long w, double y, double x) {
  if (std::abs(y) > kFarAway || std::abs(x) > kFarAway) return {};
  const auto s = BilinearStencil::at(y, x);
  const double v00 = pixel(plane, h, w, s.y0, s.x0);
  const double v01 = pixel(plane, h, w, s.y0, s.x0 + 1);
  const double v10 = pixel(plane, h, w, s.y0 + 1, s.x0);
  const double v11 = pixel(plane, h, w, s.y0 + 1, s.x0 + 1);
  BilinearGrad g;
  g.value = (1.0 - s.ly) * ((1.0 - s.lx) * v00 + s.lx * v01) + s.ly * ((1.0 - s.lx) * v10 + s.lx * v11);
  g.d_dy = (1.0 - s.lx) * (v10 - v00) + s.lx * (v11 - v01);
  g.d_dx = (1.0 - s.ly) * (v01 - v00) + s.ly * (v11 - v10);
  return g;
}

inline void scatter_plane(double* plane, long h, long w, double y, double x, double g) {
  if (std::abs(y) > kFarAway || std::abs(x) > kFarAway) return;
  const auto s = BilinearStencil::at(y, x);
  const double wts[4] = {(1.0 - s.ly) * (1.0 - s.lx), (1.0 - s.ly) * s.lx, s.ly * (1.0 - s.lx), s.ly * s.lx};
  const long ys[4] = {s.y0, s.y0, s.y0 + 1, s.y0 + 1};
  const long xs[4] = {s.x0, s.x0 + 1, s.x0, s.x0 + 1};
  for (int i = 0; i < 4; ++i) {
    if (ys[i] >= 0 && ys[i] < h && xs[i] >= 0 && xs[i] < w) plane[ys[i] * w + xs[i]] += wts[i] * g;
  }
}

const double* plane_of(const Tensor& t, std::size_t n, std::size_t c) {
  return t.data().data() + (n * t.dim(1) + c) * t.dim(2) * t.dim(3);
}

}  // namespace

double bilinear_sample(const Tensor& input, double y, double x, std::size_t n, std::size_t c) {
  return bilinear_sample_grad(input, y, x, n, c).value;
}

BilinearGrad bilinear_sample_grad(const Tensor& input, double y, double x, std::size_t n, std::size_t c) {
  if (input.rank() != 4) throw ShapeError("bilinear_sample: expected [N,C,H,W]");
  if (n >= input.dim(0) || c >= input.dim(1)) throw ShapeError("bilinear_sample: sample/channel out of range");
  return sample_plane(plane_of(input, n, c), static_cast<long>(input.dim(2)), static_cast<long>(input.dim(3)), y, x);
}

Var deform_conv2d(const Var& input, const Var& offsets, const Var& weights, const Var& bias) {
  const Tensor& x = input.value();
  const Tensor& off = offsets.value();
  const Tensor& wt = weights.value();
  if (x.rank() != 4) throw ShapeError("deform_conv2d: input must be [N,C,H,W]");
  const std::size_t n = x.dim(0), cin = x.dim(1), h = x.dim(2), w = x.dim(3), hw = h * w;
  if (off.shape() != Shape{n, kOffsetChannels, h, w}) {
    throw ShapeError("deform_conv2d: offsets must be " + shape_to_string({n, kOffsetChannels, h, w}) + ", got " +
                     shape_to_string(off.shape()));
  }
  if (wt.rank() != 4 || wt.dim(1) != cin || wt.dim(2) != 3 || wt.dim(3) != 3) {
    throw ShapeError("deform_conv2d: weights must be [Cout," + std::to_string(cin) + ",3,3], got " +
                     shape_to_string(wt.shape()));
  }
  const std::size_t cout = wt.dim(0), kk = cin * kTaps;
  if (bias.value().size() != cout) throw ShapeError("deform_conv2d: bias length must equal output channels");
  for (double v : off.data()) {
    if (!std::isfinite(v)) throw ValidationError("deform_conv2d: non-finite offset");
  }

  const long H = static_cast<long>(h), W = static_cast<long>(w);
  // Sampling positions [N, 9, HW] for y and x.
  std::vector<double> pos_y(n * kTaps * hw), pos_x(n * kTaps * hw);
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t t = 0; t < kTaps; ++t) {
      const double ky = static_cast<double>(t / 3) - 1.0, kx = static_cast<double>(t % 3) - 1.0;
      const double* oy = plane_of(off, s, 2 * t);
      const double* ox = plane_of(off, s, 2 * t + 1);
      for (long i = 0; i < H; ++i)
        for (long j = 0; j < W; ++j) {
          const std::size_t p = static_cast<std::size_t>(i * W + j);
          pos_y[(s * kTaps + t) * hw + p] = static_cast<double>(i) + ky + oy[p];
          pos_x[(s * kTaps + t) * hw + p] = static_cast<double>(j) + kx + ox[p];
        }
    }

  std::vector<double> cols(n * kk * hw);
  Tensor out(Shape{n, cout, h, w});
  for (std::size_t s = 0; s < n; ++s) {
    double* cs = cols.data() + s * kk * hw;
    for (std::size_t c = 0; c < cin; ++c) {
      const double* plane = plane_of(x, s, c);
      for (std::size_t t = 0; t < kTaps; ++t) {
        const double* py = pos_y.data() + (s * kTaps + t) * hw;
        const double* px = pos_x.data() + (s * kTaps + t) * hw;
        double* row = cs + (c * kTaps + t) * hw;
        for (std::size_t p = 0; p < hw; ++p) row[p] = sample_plane(plane, H, W, py[p], px[p]).value;
      }
    }
    detail::gemm_forward(wt.data().data(), cs, bias.value().data().data(), out.data().data() + s * cout * hw, cout,
                         kk, hw);
  }

  return input.tape()->record(
      "deform_conv2d", std::move(out), {input, offsets, weights, bias},
      [=, cols = std::move(cols), pos_y = std::move(pos_y), pos_x = std::move(pos_x)](Tape& tape,
                                                                                       const Tensor& grad) {
        const bool want_x = input.requires_grad(), want_off = offsets.requires_grad();
        const bool want_w = weights.requires_grad();
        Tensor dw(weights.shape()), dx(input.shape()), doff(offsets.shape());
        std::vector<double> dcols(kk * hw);
        const Tensor& xv = input.value();
        for (std::size_t s = 0; s < n; ++s) {
          detail::gemm_backward(weights.value().data().data(), cols.data() + s * kk * hw,
                                grad.data().data() + s * cout * hw, want_w ? dw.data().data() : nullptr,
                                dcols.data(), cout, kk, hw);
          if (!want_x && !want_off) continue;
          for (std::size_t c = 0; c < cin; ++c) {
            const double* plane = plane_of(xv, s, c);
            double* dplane = dx.data().data() + (s * cin + c) * hw;
            for (std::size_t t = 0; t < kTaps; ++t) {
              const double* py = pos_y.data() + (s * kTaps + t) * hw;
              const double* px = pos_x.data() + (s * kTaps + t) * hw;
              const double* g = dcols.data() + (c * kTaps + t) * hw;
              double* doy = doff.data().data() + (s * kOffsetChannels + 2 * t) * hw;
              double* dox = doy + hw;
              for (std::size_t p = 0; p < hw; ++p) {
                if (g[p] == 0.0) continue;
                if (want_x) scatter_plane(dplane, H, W, py[p], px[p], g[p]);
                if (want_off) {
                  const auto sg = sample_plane(plane, H, W, py[p], px[p]);
                  doy[p] += g[p] * sg.d_dy;
                  dox[p] += g[p] * sg.d_dx;
                }
              }
            }
          }
        }
        if (want_w) tape.accumulate(weights, dw);
        if (want_x) tape.accumulate(input, dx);
        if (want_off) tape.accumulate(offsets, doff);
        if (bias.requires_grad()) {
          Tensor db(bias.shape());
          for (std::size_t s = 0; s < n; ++s)
            for (std::size_t co = 0; co < cout; ++co)
              for (std::size_t p = 0; p < hw; ++p) db[co] += grad[(s * cout + co) * hw + p];
          tape.accumulate(bias, db);
        }
      });
}

ConformLayer::ConformLayer(std::size_t in_channels, std::size_t out_channels, TpgConfig tpg_cfg,
                           SampleSource sample_source)
    : offset_weight(Tensor(Shape{kOffsetChannels, in_channels, 3, 3})),
      offset_bias(Tensor(Shape{kOffsetChannels})),
      weight(Tensor(Shape{out_channels, in_channels, 3, 3})),
      bias(Tensor(Shape{out_channels})),
      bn(out_channels),
      tpg(tpg_cfg),
      source(sample_source),
      in_channels_(in_channels),
      out_channels_(out_channels) {
  tpg.validate();
}

std::vector<NamedParameter> ConformLayer::parameters(const std::string& prefix) {
  return {{prefix + "offset_weight", &offset_weight}, {prefix + "offset_bias", &offset_bias},
          {prefix + "weight", &weight},               {prefix + "bias", &bias},
          {prefix + "bn_gamma", &bn.gamma},           {prefix + "bn_beta", &bn.beta}};
}

namespace {

void check_input(const ConformLayer& layer, const Var& phi_in) {
  const auto& s = phi_in.shape();
  if (s.size() != 4 || s[1] != layer.in_channels()) {
    throw ShapeError("conformable layer expects [N," + std::to_string(layer.in_channels()) + ",H,W], got " +
                     shape_to_string(s));
  }
}

Var offsets_from(ConformLayer& layer, const Var& source) {
  Tape& tape = *source.tape();
  return conv2d(source, tape.param(layer.offset_weight), tape.param(layer.offset_bias), 1);
}

Var sampled_conv(ConformLayer& layer, const Var& sampled, const Var& offsets) {
  Tape& tape = *sampled.tape();
  return deform_conv2d(sampled, offsets, tape.param(layer.weight), tape.param(layer.bias));
}

}  // namespace

Var conformable_pre_norm(ConformLayer& layer, const Var& phi_in, TpgMaps* maps) {
  check_input(layer, phi_in);
  Var post = tpg_posterior(phi_in, layer.tpg, maps);
  ++(layer.tpg.use_aggregation ? layer.trace.aggregated : layer.trace.blocked);
  Var offsets = offsets_from(layer, post);
  return sampled_conv(layer, layer.source == SampleSource::input ? phi_in : post, offsets);
}

Var conformable_forward(ConformLayer& layer, const Var& phi_in, NormMode mode) {
  return relu(batch_norm(conformable_pre_norm(layer, phi_in), layer.bn, mode));
}

Var deformable_pre_norm(ConformLayer& layer, const Var& phi_in) {
  check_input(layer, phi_in);
  return sampled_conv(layer, phi_in, offsets_from(layer, phi_in));
}

Var deformable_forward(ConformLayer& layer, const Var& phi_in, NormMode mode) {
  return relu(batch_norm(deformable_pre_norm(layer, phi_in), layer.bn, mode));
}

}  // namespace topoconv
