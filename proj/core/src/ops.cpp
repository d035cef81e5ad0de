#include "topoconv/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <spdlog/spdlog.h>

#include "conv_kernels.hpp"
#include "topoconv/errors.hpp"

namespace topoconv {

namespace detail {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

void gemm_forward(const double* weights, const double* cols, const double* bias, double* out, std::size_t cout,
                  std::size_t k, std::size_t hw) {
  ConstMap w(weights, cout, k);
  ConstMap c(cols, k, hw);
  MutMap o(out, cout, hw);
  o.noalias() = w * c;
  if (bias != nullptr) {
    for (std::size_t r = 0; r < cout; ++r) o.row(r).array() += bias[r];
  }
}

void gemm_backward(const double* weights, const double* cols, const double* grad_out, double* weight_grad,
                   double* cols_grad, std::size_t cout, std::size_t k, std::size_t hw) {
  ConstMap w(weights, cout, k);
  ConstMap c(cols, k, hw);
  ConstMap g(grad_out, cout, hw);
  if (weight_grad != nullptr) {
    MutMap wg(weight_grad, cout, k);
    wg.noalias() += g * c.transpose();
  }
  if (cols_grad != nullptr) {
    MutMap cg(cols_grad, k, hw);
    cg.noalias() = w.transpose() * g;
  }
}

}  // namespace detail

namespace {

void require_rank4(const Tensor& t, const char* what) {
  if (t.rank() != 4) {
    throw ShapeError(std::string(what) + ": expected [N,C,H,W], got " + shape_to_string(t.shape()));
  }
}

struct ConvGeometry {
  std::size_t n, cin, h, w, cout, k;
  int pad;
};

ConvGeometry conv_geometry(const Tensor& x, const Tensor& wt, const Tensor& b, int padding) {
  require_rank4(x, "conv2d input");
  if (wt.rank() != 4) throw ShapeError("conv2d weights: expected [Cout,Cin,k,k], got " + shape_to_string(wt.shape()));
  const std::size_t k = wt.dim(2);
  if (wt.dim(3) != k || k % 2 == 0) throw ShapeError("conv2d: kernel must be square with odd size");
  if (padding != static_cast<int>((k - 1) / 2)) {
    throw ShapeError("conv2d: padding must be (k-1)/2 = " + std::to_string((k - 1) / 2));
  }
  if (wt.dim(1) != x.dim(1)) {
    throw ShapeError("conv2d: input has " + std::to_string(x.dim(1)) + " channels but weights expect " +
                     std::to_string(wt.dim(1)));
  }
  if (b.size() != wt.dim(0)) throw ShapeError("conv2d: bias length must equal output channels");
  return {x.dim(0), x.dim(1), x.dim(2), x.dim(3), wt.dim(0), k, padding};
}

// cols layout [Cin*k*k, H*W] for one sample.
void im2col(const double* x, const ConvGeometry& g, double* cols) {
  const std::size_t hw = g.h * g.w;
  const auto H = static_cast<long>(g.h), W = static_cast<long>(g.w);
  for (std::size_t c = 0; c < g.cin; ++c) {
    const double* xc = x + c * hw;
    for (std::size_t ki = 0; ki < g.k; ++ki) {
      for (std::size_t kj = 0; kj < g.k; ++kj) {
        double* row = cols + ((c * g.k + ki) * g.k + kj) * hw;
        const long di = static_cast<long>(ki) - g.pad, dj = static_cast<long>(kj) - g.pad;
        for (long i = 0; i < H; ++i) {
          const long si = i + di;
          for (long j = 0; j < W; ++j) {
            const long sj = j + dj;
            row[i * W + j] = (si >= 0 && si < H && sj >= 0 && sj < W) ? xc[si * W + sj] : 0.0;
          }
        }
      }
    }
  }
}

void col2im_add(const double* cols, const ConvGeometry& g, double* dx) {
  const std::size_t hw = g.h * g.w;
  const auto H = static_cast<long>(g.h), W = static_cast<long>(g.w);
  for (std::size_t c = 0; c < g.cin; ++c) {
    double* dxc = dx + c * hw;
    for (std::size_t ki = 0; ki < g.k; ++ki) {
      for (std::size_t kj = 0; kj < g.k; ++kj) {
        const double* row = cols + ((c * g.k + ki) * g.k + kj) * hw;
        const long di = static_cast<long>(ki) - g.pad, dj = static_cast<long>(kj) - g.pad;
        for (long i = 0; i < H; ++i) {
          const long si = i + di;
          if (si < 0 || si >= H) continue;
          for (long j = 0; j < W; ++j) {
            const long sj = j + dj;
            if (sj >= 0 && sj < W) dxc[si * W + sj] += row[i * W + j];
          }
        }
      }
    }
  }
}

// Shape of b relative to a: 0 = same, 1 = broadcast across channels.
int broadcast_kind(const Tensor& a, const Tensor& b, const char* op) {
  if (a.same_shape(b)) return 0;
  if (a.rank() == 4) {
    const auto& s = a.shape();
    if ((b.shape() == Shape{s[0], s[2], s[3]}) || (b.shape() == Shape{s[0], 1, s[2], s[3]})) return 1;
  }
  throw ShapeError(std::string(op) + ": cannot broadcast " + shape_to_string(b.shape()) + " against " +
                   shape_to_string(a.shape()));
}

}  // namespace

Var conv2d(const Var& input, const Var& weights, const Var& bias, int padding) {
  const Tensor& x = input.value();
  const Tensor& wt = weights.value();
  const Tensor& b = bias.value();
  const auto g = conv_geometry(x, wt, b, padding);
  const std::size_t hw = g.h * g.w, kk = g.cin * g.k * g.k;

  Tensor out(Shape{g.n, g.cout, g.h, g.w});
  std::vector<double> cols(g.n * kk * hw);
  for (std::size_t n = 0; n < g.n; ++n) {
    im2col(x.data().data() + n * g.cin * hw, g, cols.data() + n * kk * hw);
    detail::gemm_forward(wt.data().data(), cols.data() + n * kk * hw, b.data().data(),
                         out.data().data() + n * g.cout * hw, g.cout, kk, hw);
  }

  return input.tape()->record(
      "conv2d", std::move(out), {input, weights, bias},
      [input, weights, bias, g, cols = std::move(cols)](Tape& tape, const Tensor& grad) {
        const std::size_t hw = g.h * g.w, kk = g.cin * g.k * g.k;
        const bool want_x = input.requires_grad();
        const bool want_w = weights.requires_grad();
        Tensor dw(weights.shape());
        Tensor dx(input.shape());
        std::vector<double> dcols(want_x ? kk * hw : 0);
        for (std::size_t n = 0; n < g.n; ++n) {
          detail::gemm_backward(weights.value().data().data(), cols.data() + n * kk * hw,
                                grad.data().data() + n * g.cout * hw, want_w ? dw.data().data() : nullptr,
                                want_x ? dcols.data() : nullptr, g.cout, kk, hw);
          if (want_x) col2im_add(dcols.data(), g, dx.data().data() + n * g.cin * hw);
        }
        if (want_w) tape.accumulate(weights, dw);
        if (want_x) tape.accumulate(input, dx);
        if (bias.requires_grad()) {
          Tensor db(bias.shape());
          for (std::size_t n = 0; n < g.n; ++n)
            for (std::size_t co = 0; co < g.cout; ++co)
              for (std::size_t p = 0; p < hw; ++p) db[co] += grad[(n * g.cout + co) * hw + p];
          tape.accumulate(bias, db);
        }
      });
}

Tensor conv2d_reference(const Tensor& x, const Tensor& wt, const Tensor& b, int padding) {
  const auto g = conv_geometry(x, wt, b, padding);
  Tensor out(Shape{g.n, g.cout, g.h, g.w});
  const auto H = static_cast<long>(g.h), W = static_cast<long>(g.w), K = static_cast<long>(g.k);
  for (std::size_t n = 0; n < g.n; ++n)
    for (std::size_t co = 0; co < g.cout; ++co)
      for (long i = 0; i < H; ++i)
        for (long j = 0; j < W; ++j) {
          double acc = b[co];
          for (std::size_t ci = 0; ci < g.cin; ++ci)
            for (long ki = 0; ki < K; ++ki)
              for (long kj = 0; kj < K; ++kj) {
                const long si = i + ki - g.pad, sj = j + kj - g.pad;
                if (si < 0 || si >= H || sj < 0 || sj >= W) continue;
                acc += wt.at(co, ci, ki, kj) * x.at(n, ci, si, sj);
              }
          out.at(n, co, i, j) = acc;
        }
  return out;
}

Var relu(const Var& input) {
  Tensor out = input.value();
  for (auto& v : out.data()) v = v > 0.0 ? v : 0.0;
  return input.tape()->record("relu", std::move(out), {input}, [input](Tape& tape, const Tensor& grad) {
    Tensor dx(grad.shape());
    const auto& x = input.value();
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] = x[i] > 0.0 ? grad[i] : 0.0;
    tape.accumulate(input, dx);
  });
}

Var sigmoid(const Var& input) {
  Tensor out = input.value();
  for (auto& v : out.data()) {
    if (v >= 0.0) {
      v = 1.0 / (1.0 + std::exp(-v));
    } else {
      const double e = std::exp(v);
      v = e / (1.0 + e);
    }
  }
  Tensor s = out;
  return input.tape()->record("sigmoid", std::move(out), {input},
                              [input, s = std::move(s)](Tape& tape, const Tensor& grad) {
                                Tensor dx(grad.shape());
                                for (std::size_t i = 0; i < dx.size(); ++i) dx[i] = grad[i] * s[i] * (1.0 - s[i]);
                                tape.accumulate(input, dx);
                              });
}

namespace {

template <class Combine>
Tensor broadcast_apply(const Tensor& a, const Tensor& b, int kind, Combine f) {
  Tensor out(a.shape());
  if (kind == 0) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(a[i], b[i]);
    return out;
  }
  const std::size_t n = a.dim(0), c = a.dim(1), hw = a.dim(2) * a.dim(3);
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t p = 0; p < hw; ++p) {
        const std::size_t i = (s * c + ch) * hw + p;
        out[i] = f(a[i], b[s * hw + p]);
      }
  return out;
}

// Reduces a gradient shaped like a back to b's shape.
Tensor reduce_to(const Tensor& grad, const Tensor& b, int kind) {
  if (kind == 0) return grad;
  Tensor out(b.shape());
  const std::size_t n = grad.dim(0), c = grad.dim(1), hw = grad.dim(2) * grad.dim(3);
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t p = 0; p < hw; ++p) out[s * hw + p] += grad[(s * c + ch) * hw + p];
  return out;
}

}  // namespace

Var add(const Var& a, const Var& b) {
  const int kind = broadcast_kind(a.value(), b.value(), "add");
  Tensor out = broadcast_apply(a.value(), b.value(), kind, [](double x, double y) { return x + y; });
  return a.tape()->record("add", std::move(out), {a, b}, [a, b, kind](Tape& tape, const Tensor& grad) {
    tape.accumulate(a, grad);
    if (b.requires_grad()) tape.accumulate(b, reduce_to(grad, b.value(), kind));
  });
}

Var mul(const Var& a, const Var& b) {
  const int kind = broadcast_kind(a.value(), b.value(), "mul");
  Tensor out = broadcast_apply(a.value(), b.value(), kind, [](double x, double y) { return x * y; });
  return a.tape()->record("mul", std::move(out), {a, b}, [a, b, kind](Tape& tape, const Tensor& grad) {
    if (a.requires_grad()) {
      tape.accumulate(a, broadcast_apply(grad, b.value(), kind, [](double g, double y) { return g * y; }));
    }
    if (b.requires_grad()) {
      Tensor ga(grad.shape());
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] = grad[i] * a.value()[i];
      tape.accumulate(b, reduce_to(ga, b.value(), kind));
    }
  });
}

Var scale(const Var& a, double s) {
  Tensor out = a.value();
  for (auto& v : out.data()) v *= s;
  return a.tape()->record("scale", std::move(out), {a}, [a, s](Tape& tape, const Tensor& grad) {
    Tensor g = grad;
    for (auto& v : g.data()) v *= s;
    tape.accumulate(a, g);
  });
}

Var sum(const Var& a) {
  double acc = 0.0;
  for (double v : a.value().data()) acc += v;
  return a.tape()->record("sum", Tensor::scalar(acc), {a}, [a](Tape& tape, const Tensor& grad) {
    tape.accumulate(a, Tensor(a.shape(), grad[0]));
  });
}

Var weighted_sum(const Var& a, const Tensor& weights) {
  if (!a.value().same_shape(weights)) throw ShapeError("weighted_sum: weights shape mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) acc += a.value()[i] * weights[i];
  return a.tape()->record("weighted_sum", Tensor::scalar(acc), {a}, [a, weights](Tape& tape, const Tensor& grad) {
    Tensor g = weights;
    for (auto& v : g.data()) v *= grad[0];
    tape.accumulate(a, g);
  });
}

BatchNorm::BatchNorm(std::size_t channels, double eps_, double momentum_)
    : gamma(Tensor(Shape{channels}, 1.0)),
      beta(Tensor(Shape{channels}, 0.0)),
      running_mean(channels, 0.0),
      running_var(channels, 1.0),
      eps(eps_),
      momentum(momentum_) {}

Var batch_norm(const Var& input, BatchNorm& bn, NormMode mode) {
  const Tensor& x = input.value();
  require_rank4(x, "batch_norm input");
  const std::size_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  if (bn.gamma.value.size() != c) {
    throw ShapeError("batch_norm: " + std::to_string(c) + " channels, parameters for " +
                     std::to_string(bn.gamma.value.size()));
  }
  const std::size_t m = n * hw;
  if (mode == NormMode::train && m < 2) throw ValidationError("batch_norm: train mode needs N*H*W >= 2");
  if (mode == NormMode::eval && !bn.has_batch_stats && !bn.warned_without_stats) {
    bn.warned_without_stats = true;
    spdlog::warn("batch_norm: eval mode before any train step, using initial statistics (mean 0, var 1)");
  }

  std::vector<double> mean(c), inv_std(c);
  for (std::size_t ch = 0; ch < c; ++ch) {
    if (mode == NormMode::train) {
      double s = 0.0;
      for (std::size_t s_i = 0; s_i < n; ++s_i)
        for (std::size_t p = 0; p < hw; ++p) s += x[(s_i * c + ch) * hw + p];
      const double mu = s / static_cast<double>(m);
      double v = 0.0;
      for (std::size_t s_i = 0; s_i < n; ++s_i)
        for (std::size_t p = 0; p < hw; ++p) {
          const double d = x[(s_i * c + ch) * hw + p] - mu;
          v += d * d;
        }
      const double var = v / static_cast<double>(m);
      mean[ch] = mu;
      inv_std[ch] = 1.0 / std::sqrt(var + bn.eps);
      const double unbiased = v / static_cast<double>(m - 1);
      bn.running_mean[ch] = (1.0 - bn.momentum) * bn.running_mean[ch] + bn.momentum * mu;
      bn.running_var[ch] = (1.0 - bn.momentum) * bn.running_var[ch] + bn.momentum * unbiased;
    } else {
      mean[ch] = bn.running_mean[ch];
      inv_std[ch] = 1.0 / std::sqrt(bn.running_var[ch] + bn.eps);
    }
  }
  if (mode == NormMode::train) bn.has_batch_stats = true;

  Tensor xhat(x.shape());
  Tensor out(x.shape());
  const auto& gamma = bn.gamma.value;
  const auto& beta = bn.beta.value;
  for (std::size_t s_i = 0; s_i < n; ++s_i)
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t p = 0; p < hw; ++p) {
        const std::size_t i = (s_i * c + ch) * hw + p;
        xhat[i] = (x[i] - mean[ch]) * inv_std[ch];
        out[i] = gamma[ch] * xhat[i] + beta[ch];
      }

  Tape& tape = *input.tape();
  Var g = tape.param(bn.gamma);
  Var b = tape.param(bn.beta);
  return tape.record(
      "batch_norm", std::move(out), {input, g, b},
      [input, g, b, mode, n, c, hw, m, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape& tape,
                                                                                           const Tensor& grad) {
        Tensor dgamma(g.shape()), dbeta(b.shape());
        for (std::size_t s_i = 0; s_i < n; ++s_i)
          for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t p = 0; p < hw; ++p) {
              const std::size_t i = (s_i * c + ch) * hw + p;
              dgamma[ch] += grad[i] * xhat[i];
              dbeta[ch] += grad[i];
            }
        if (input.requires_grad()) {
          const auto& gamma = g.value();
          Tensor dx(input.shape());
          for (std::size_t ch = 0; ch < c; ++ch) {
            const double k = gamma[ch] * inv_std[ch];
            if (mode == NormMode::eval) {
              for (std::size_t s_i = 0; s_i < n; ++s_i)
                for (std::size_t p = 0; p < hw; ++p) {
                  const std::size_t i = (s_i * c + ch) * hw + p;
                  dx[i] = k * grad[i];
                }
              continue;
            }
            const double mean_g = dbeta[ch] / static_cast<double>(m);
            const double mean_gx = dgamma[ch] / static_cast<double>(m);
            for (std::size_t s_i = 0; s_i < n; ++s_i)
              for (std::size_t p = 0; p < hw; ++p) {
                const std::size_t i = (s_i * c + ch) * hw + p;
                dx[i] = k * (grad[i] - mean_g - xhat[i] * mean_gx);
              }
          }
          tape.accumulate(input, dx);
        }
        tape.accumulate(g, dgamma);
        tape.accumulate(b, dbeta);
      });
}

Var dice_loss(const Var& prediction, const Tensor& target, double smooth) {
  const Tensor& p = prediction.value();
  if (!p.same_shape(target)) {
    throw ShapeError("dice_loss: prediction " + shape_to_string(p.shape()) + " vs target " +
                     shape_to_string(target.shape()));
  }
  if (!(smooth > 0.0)) throw ValidationError("dice_loss: smooth must be positive");
  double spt = 0.0, sp = 0.0, st = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    spt += p[i] * target[i];
    sp += p[i];
    st += target[i];
  }
  const double num = 2.0 * spt + smooth;
  const double den = sp + st + smooth;
  return prediction.tape()->record(
      "dice_loss", Tensor::scalar(1.0 - num / den), {prediction},
      [prediction, target, num, den](Tape& tape, const Tensor& grad) {
        Tensor dp(target.shape());
        const double inv_den2 = 1.0 / (den * den);
        for (std::size_t i = 0; i < dp.size(); ++i) dp[i] = -grad[0] * (2.0 * target[i] * den - num) * inv_den2;
        tape.accumulate(prediction, dp);
      });
}

Var max_pool2(const Var& input) {
  const Tensor& x = input.value();
  require_rank4(x, "max_pool2");
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (h % 2 || w % 2) throw ShapeError("max_pool2: H and W must be even, got " + shape_to_string(x.shape()));
  const std::size_t oh = h / 2, ow = w / 2;
  Tensor out(Shape{n, c, oh, ow});
  std::vector<std::size_t> argmax(out.size());
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t i = 0; i < oh; ++i)
        for (std::size_t j = 0; j < ow; ++j) {
          const std::size_t base = ((s * c + ch) * h + 2 * i) * w + 2 * j;
          std::size_t best = base;
          for (std::size_t cand : {base + 1, base + w, base + w + 1})
            if (x[cand] > x[best]) best = cand;
          const std::size_t o = ((s * c + ch) * oh + i) * ow + j;
          out[o] = x[best];
          argmax[o] = best;
        }
  return input.tape()->record("max_pool2", std::move(out), {input},
                              [input, argmax = std::move(argmax)](Tape& tape, const Tensor& grad) {
                                Tensor dx(input.shape());
                                for (std::size_t o = 0; o < grad.size(); ++o) dx[argmax[o]] += grad[o];
                                tape.accumulate(input, dx);
                              });
}

Var upsample_nearest2(const Var& input) {
  const Tensor& x = input.value();
  require_rank4(x, "upsample_nearest2");
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  Tensor out(Shape{n, c, 2 * h, 2 * w});
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t i = 0; i < 2 * h; ++i)
        for (std::size_t j = 0; j < 2 * w; ++j) out.at(s, ch, i, j) = x.at(s, ch, i / 2, j / 2);
  return input.tape()->record("upsample_nearest2", std::move(out), {input}, [input](Tape& tape, const Tensor& grad) {
    Tensor dx(input.shape());
    const auto& sh = input.shape();
    for (std::size_t s = 0; s < sh[0]; ++s)
      for (std::size_t ch = 0; ch < sh[1]; ++ch)
        for (std::size_t i = 0; i < 2 * sh[2]; ++i)
          for (std::size_t j = 0; j < 2 * sh[3]; ++j) dx.at(s, ch, i / 2, j / 2) += grad.at(s, ch, i, j);
    tape.accumulate(input, dx);
  });
}

Var concat_channels(const Var& a, const Var& b) {
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  require_rank4(x, "concat_channels");
  require_rank4(y, "concat_channels");
  if (x.dim(0) != y.dim(0) || x.dim(2) != y.dim(2) || x.dim(3) != y.dim(3)) {
    throw ShapeError("concat_channels: " + shape_to_string(x.shape()) + " vs " + shape_to_string(y.shape()));
  }
  const std::size_t n = x.dim(0), ca = x.dim(1), cb = y.dim(1), hw = x.dim(2) * x.dim(3);
  Tensor out(Shape{n, ca + cb, x.dim(2), x.dim(3)});
  for (std::size_t s = 0; s < n; ++s) {
    std::copy_n(x.data().begin() + s * ca * hw, ca * hw, out.data().begin() + s * (ca + cb) * hw);
    std::copy_n(y.data().begin() + s * cb * hw, cb * hw, out.data().begin() + (s * (ca + cb) + ca) * hw);
  }
  return a.tape()->record("concat_channels", std::move(out), {a, b},
                          [a, b, n, ca, cb, hw](Tape& tape, const Tensor& grad) {
                            Tensor ga(a.shape()), gb(b.shape());
                            for (std::size_t s = 0; s < n; ++s) {
                              std::copy_n(grad.data().begin() + s * (ca + cb) * hw, ca * hw,
                                          ga.data().begin() + s * ca * hw);
                              std::copy_n(grad.data().begin() + (s * (ca + cb) + ca) * hw, cb * hw,
                                          gb.data().begin() + s * cb * hw);
                            }
                            tape.accumulate(a, ga);
                            tape.accumulate(b, gb);
                          });
}

}  // namespace topoconv
