#include <benchmark/benchmark.h>

#include <vector>

#include "tpaoi/approximator.hpp"
#include "tpaoi/kernels.hpp"
#include "tpaoi/rng.hpp"

using namespace tpaoi;

namespace {

struct Operands {
  std::vector<double> a, b, c;
  kernels::GemmArgs args;

  Operands(int m, int n, int k) : a(static_cast<std::size_t>(m) * k), b(static_cast<std::size_t>(k) * n),
                                  c(static_cast<std::size_t>(m) * n) {
    Rng rng(7);
    for (auto& x : a) x = uniform01(rng) - 0.5;
    for (auto& x : b) x = uniform01(rng) - 0.5;
    args = {m, n, k, a.data(), k, b.data(), n, c.data(), n};
  }
};

// Shapes: (batch, out, in) of the dense layers at the two network sizes.
void gemm_shapes(benchmark::internal::Benchmark* b) {
  b->Args({128, 128, 64})->Args({128, 64, 128})->Args({128, 512, 128})->Args({128, 256, 512});
}

void BM_GemmReference(benchmark::State& state) {
  Operands op(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)), static_cast<int>(state.range(2)));
  for (auto _ : state) {
    kernels::reference::gemm_accumulate(op.args);
    benchmark::DoNotOptimize(op.c.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(1) * state.range(2));
}
BENCHMARK(BM_GemmReference)->Apply(gemm_shapes);

void BM_GemmBlocked(benchmark::State& state) {
  Operands op(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)), static_cast<int>(state.range(2)));
  for (auto _ : state) {
    kernels::gemm_accumulate(op.args);
    benchmark::DoNotOptimize(op.c.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(1) * state.range(2));
}
BENCHMARK(BM_GemmBlocked)->Apply(gemm_shapes);

void BM_TrainingTick(benchmark::State& state) {
  NetworkShape shape;
  if (state.range(0) == 0) {
    shape.trunk_hidden = {64, 128, 64};
    shape.head_hidden = {64};
  }
  Rng rng(3);
  const auto params = init_params(shape, rng);
  const int rows = 128;
  std::vector<double> obs(static_cast<std::size_t>(rows * shape.input_dim));
  for (auto& x : obs) x = uniform01(rng);
  std::vector<int> actions(rows, 1);
  std::vector<double> targets(rows, -10.0);
  Workspace ws;
  QNetworkParams grad(shape);
  for (auto _ : state) {
    forward_batch(params, obs, rows, ws);
    forward_batch(params, obs, rows, ws);
    benchmark::DoNotOptimize(batch_gradient(params, obs, rows, actions, targets, grad, ws));
  }
}
// 0 = desk network, 1 = full network
BENCHMARK(BM_TrainingTick)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
