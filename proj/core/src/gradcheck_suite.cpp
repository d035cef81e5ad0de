#include "topoconv/gradcheck_suite.hpp"

#include <cmath>
#include <random>

#include "topoconv/conform_conv.hpp"
#include "topoconv/harness/mini_net.hpp"
#include "topoconv/ops.hpp"
#include "topoconv/tpg.hpp"

namespace topoconv {

namespace {

constexpr double kStep = 1e-5;
constexpr double kSmooth = 1e-6;
constexpr double kKinked = 1e-4;
// Smaller step for the full network: fewer ReLU and max-pool kinks lie within reach.
constexpr double kNetStep = 1e-6;
constexpr double kOffsetMargin = 1e-3;

// Distance from the nearest integer sampling position, minimized over all offsets.
double offset_margin(const Tensor& offsets) {
  double margin = 0.5;
  for (double v : offsets.data()) margin = std::min(margin, std::abs(v - std::round(v)));
  return margin;
}

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  Tensor uniform(Shape shape, double lo, double hi) {
    Tensor t(std::move(shape));
    std::uniform_real_distribution<double> d(lo, hi);
    for (auto& v : t.data()) v = d(rng_);
    return t;
  }

  // Uniform in [-hi, hi] but never closer than `gap` to zero.
  Tensor away_from_zero(Shape shape, double gap, double hi) {
    Tensor t = uniform(std::move(shape), gap, hi);
    std::bernoulli_distribution sign(0.5);
    for (auto& v : t.data()) v = sign(rng_) ? v : -v;
    return t;
  }

  // Offsets whose fractional part stays in [0.1, 0.9].
  Tensor fractional_offsets(Shape shape) {
    Tensor t = uniform(std::move(shape), 0.1, 0.9);
    std::uniform_int_distribution<int> whole(-1, 1);
    for (auto& v : t.data()) v += whole(rng_);
    return t;
  }

 private:
  std::mt19937_64 rng_;
};

}  // namespace

std::vector<GradCheckCase> run_gradcheck_suite(std::uint64_t seed) {
  Gen gen(seed);
  std::vector<GradCheckCase> cases;

  {
    Parameter x(gen.uniform({1, 2, 4, 4}, -1, 1)), w(gen.uniform({3, 2, 3, 3}, -1, 1)), b(gen.uniform({3}, -1, 1));
    const Tensor probe = gen.uniform({1, 3, 4, 4}, -1, 1);
    cases.push_back({"conv2d", grad_check(
                                   [&](Tape& t) {
                                     return weighted_sum(conv2d(t.param(x), t.param(w), t.param(b), 1), probe);
                                   },
                                   {{"input", &x}, {"weight", &w}, {"bias", &b}}, kStep, kSmooth)});
  }
  {
    Parameter x(gen.away_from_zero({2, 3, 4, 4}, 1e-3, 2.0));
    const Tensor probe = gen.uniform({2, 3, 4, 4}, -1, 1);
    cases.push_back({"relu", grad_check([&](Tape& t) { return weighted_sum(relu(t.param(x)), probe); },
                                        {{"input", &x}}, kStep, kSmooth)});
  }
  {
    Parameter x(gen.uniform({2, 3, 4, 4}, -4, 4));
    const Tensor probe = gen.uniform({2, 3, 4, 4}, -1, 1);
    cases.push_back({"sigmoid", grad_check([&](Tape& t) { return weighted_sum(sigmoid(t.param(x)), probe); },
                                           {{"input", &x}}, kStep, kSmooth)});
  }
  {
    BatchNorm bn(3);
    bn.gamma.value = gen.uniform({3}, 0.5, 1.5);
    bn.beta.value = gen.uniform({3}, -0.5, 0.5);
    Parameter x(gen.uniform({2, 3, 4, 4}, -2, 2));
    const Tensor probe = gen.uniform({2, 3, 4, 4}, -1, 1);
    cases.push_back(
        {"batch_norm", grad_check([&](Tape& t) { return weighted_sum(batch_norm(t.param(x), bn, NormMode::train), probe); },
                                  {{"input", &x}, {"gamma", &bn.gamma}, {"beta", &bn.beta}}, kStep, kSmooth)});
  }
  {
    Parameter p(gen.uniform({1, 1, 6, 6}, 0.05, 0.95));
    Tensor target = gen.uniform({1, 1, 6, 6}, 0, 1);
    for (auto& v : target.data()) v = v > 0.5 ? 1.0 : 0.0;
    cases.push_back({"dice_loss", grad_check([&](Tape& t) { return dice_loss(t.param(p), target, 1.0); },
                                             {{"prediction", &p}}, kStep, kSmooth)});
  }
  {
    Parameter a(gen.uniform({2, 3, 4, 4}, -1, 1)), b(gen.uniform({2, 3, 4, 4}, -1, 1)), m(gen.uniform({2, 4, 4}, -1, 1));
    const Tensor probe = gen.uniform({2, 3, 4, 4}, -1, 1);
    cases.push_back({"elementwise", grad_check(
                                        [&](Tape& t) {
                                          Var va = t.param(a);
                                          Var y = add(mul(va, t.param(b)), scale(mul(va, t.param(m)), 0.7));
                                          return weighted_sum(add(y, t.param(m)), probe);
                                        },
                                        {{"a", &a}, {"b", &b}, {"broadcast", &m}}, kStep, kSmooth)});
  }
  {
    Parameter x(gen.uniform({1, 2, 5, 5}, -1, 1)), off(gen.fractional_offsets({1, kOffsetChannels, 5, 5}));
    Parameter w(gen.uniform({3, 2, 3, 3}, -1, 1)), b(gen.uniform({3}, -1, 1));
    const Tensor probe = gen.uniform({1, 3, 5, 5}, -1, 1);
    cases.push_back({"deform_conv2d", grad_check(
                                          [&](Tape& t) {
                                            return weighted_sum(
                                                deform_conv2d(t.param(x), t.param(off), t.param(w), t.param(b)), probe);
                                          },
                                          {{"input", &x}, {"offsets", &off}, {"weight", &w}, {"bias", &b}}, kStep,
                                          kKinked)});
  }

  // Layer-level checks use random offset-conv weights and redraw the offset
  // bias until every sampling position clears the bilinear kinks.
  auto make_layer = [&](ConformLayer& layer, const Tensor& offset_source) {
    layer.offset_weight.value = gen.uniform(layer.offset_weight.value.shape(), -0.15, 0.15);
    layer.weight.value = gen.uniform(layer.weight.value.shape(), -0.5, 0.5);
    layer.bias.value = gen.uniform(layer.bias.value.shape(), -0.1, 0.1);
    do {
      layer.offset_bias.value = gen.fractional_offsets(layer.offset_bias.value.shape());
      Tape t;
      Var off = conv2d(t.constant(offset_source), t.constant(layer.offset_weight.value),
                       t.constant(layer.offset_bias.value), 1);
      if (offset_margin(off.value()) >= kOffsetMargin) break;
    } while (true);
  };
  {
    ConformLayer layer(2, 3);
    Parameter x(gen.uniform({1, 2, 6, 6}, 0.0, 1.0));
    {
      Tape t;
      make_layer(layer, tpg_forward(t.constant(x.value), layer.tpg).value());
    }
    const Tensor probe = gen.uniform({1, 3, 6, 6}, -1, 1);
    auto params = layer.parameters();
    params.push_back({"input", &x});
    cases.push_back({"conformable_conv", grad_check(
                                             [&](Tape& t) {
                                               Var y = batch_norm(conformable_pre_norm(layer, t.param(x)), layer.bn,
                                                                  NormMode::train);
                                               return weighted_sum(y, probe);
                                             },
                                             params, kStep, kKinked)});
  }
  {
    ConformLayer layer(2, 3);
    Parameter x(gen.uniform({1, 2, 6, 6}, 0.0, 1.0));
    make_layer(layer, x.value);
    const Tensor probe = gen.uniform({1, 3, 6, 6}, -1, 1);
    auto params = layer.parameters();
    params.push_back({"input", &x});
    cases.push_back({"deformable_conv", grad_check(
                                            [&](Tape& t) {
                                              Var y = batch_norm(deformable_pre_norm(layer, t.param(x)), layer.bn,
                                                                 NormMode::train);
                                              return weighted_sum(y, probe);
                                            },
                                            params, kStep, kKinked)});
  }
  {
    Parameter x(gen.uniform({1, 3, 6, 6}, 0.0, 1.0));
    TpgConfig cfg;
    cfg.tau0 = 0.0;
    const Tensor probe = gen.uniform({1, 3, 6, 6}, -1, 1);
    cases.push_back({"tpg_forward", grad_check([&](Tape& t) { return weighted_sum(tpg_forward(t.param(x), cfg), probe); },
                                               {{"input", &x}}, kStep, kSmooth)});
  }
  {
    harness::NetConfig cfg;
    cfg.bottleneck = harness::BottleneckKind::conform;
    harness::MiniNet net(cfg, seed);
    for (auto* layer : net.bottleneck_layers()) {
      layer->offset_weight.value = gen.uniform(layer->offset_weight.value.shape(), -0.05, 0.05);
      layer->offset_bias.value = gen.fractional_offsets(layer->offset_bias.value.shape());
    }
    const Tensor image = gen.uniform({1, 1, 16, 16}, 0.0, 1.0);
    Tensor target = gen.uniform({1, 1, 16, 16}, 0.0, 1.0);
    for (auto& v : target.data()) v = v > 0.5 ? 1.0 : 0.0;
    cases.push_back({"mini_net", grad_check(
                                     [&](Tape& t) { return dice_loss(net.forward(t, image, NormMode::train), target); },
                                     net.parameters(), kNetStep, kKinked)});
  }
  return cases;
}

}  // namespace topoconv
