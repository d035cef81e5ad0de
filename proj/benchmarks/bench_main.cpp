#include <benchmark/benchmark.h>

#include <random>

#include "topoconv/conform_conv.hpp"
#include "topoconv/cubical_ph.hpp"
#include "topoconv/harness/mini_net.hpp"
#include "topoconv/metrics.hpp"
#include "topoconv/ops.hpp"
#include "topoconv/tpg.hpp"

using namespace topoconv;

namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  Tensor t(shape);
  for (auto& v : t.data()) v = u(rng);
  return t;
}

void BM_Ph0(benchmark::State& state) {
  const auto side = std::size_t(state.range(0));
  const Tensor x = random_tensor({side, side}, 1);
  const ScalarMap map(side, side, std::vector<double>(x.data().begin(), x.data().end()));
  for (auto _ : state) benchmark::DoNotOptimize(compute_ph0(map));
  state.SetItemsProcessed(std::int64_t(state.iterations() * side * side));
}
BENCHMARK(BM_Ph0)->Arg(32)->Arg(64)->Arg(128)->Arg(256);

void BM_Conv2d(benchmark::State& state) {
  const auto c = std::size_t(state.range(0));
  const Tensor x = random_tensor({4, c, 16, 16}, 2), w = random_tensor({c, c, 3, 3}, 3), b = random_tensor({c}, 4);
  for (auto _ : state) {
    Tape t;
    benchmark::DoNotOptimize(conv2d(t.constant(x), t.constant(w), t.constant(b), 1).value());
  }
}
BENCHMARK(BM_Conv2d)->Arg(8)->Arg(16)->Arg(32);

void BM_DeformConv2d(benchmark::State& state) {
  const auto c = std::size_t(state.range(0));
  const Tensor x = random_tensor({4, c, 16, 16}, 5), w = random_tensor({c, c, 3, 3}, 6), b = random_tensor({c}, 7);
  Tensor off = random_tensor({4, 18, 16, 16}, 8);
  for (auto& v : off.data()) v = 2 * v - 1;
  for (auto _ : state) {
    Tape t;
    benchmark::DoNotOptimize(deform_conv2d(t.constant(x), t.constant(off), t.constant(w), t.constant(b)).value());
  }
}
BENCHMARK(BM_DeformConv2d)->Arg(8)->Arg(16)->Arg(32);

void BM_TpgForward(benchmark::State& state) {
  const auto side = std::size_t(state.range(0));
  const Tensor x = random_tensor({4, 16, side, side}, 9);
  for (auto _ : state) {
    Tape t;
    benchmark::DoNotOptimize(tpg_forward(t.constant(x), TpgConfig{}).value());
  }
}
BENCHMARK(BM_TpgForward)->Arg(8)->Arg(16)->Arg(32);

void BM_ConformLayerTrainStep(benchmark::State& state) {
  const Tensor x = random_tensor({4, 16, 8, 8}, 10);
  ConformLayer layer(16, 16);
  layer.weight.value = random_tensor({16, 16, 3, 3}, 11);
  for (auto _ : state) {
    Tape t;
    Var y = conformable_forward(layer, t.constant(x), NormMode::train);
    t.backward(sum(y));
  }
}
BENCHMARK(BM_ConformLayerTrainStep);

void BM_Metrics(benchmark::State& state) {
  const auto side = std::size_t(state.range(0));
  const Tensor p = random_tensor({side, side}, 12), g = random_tensor({side, side}, 13);
  BinaryMask gt(side, side);
  for (std::size_t i = 0; i < side * side; ++i) gt.set(i / side, i % side, g[i] > 0.5);
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_pair(p.data(), gt, 0.5));
}
BENCHMARK(BM_Metrics)->Arg(32)->Arg(64);

}  // namespace
BENCHMARK_MAIN();
