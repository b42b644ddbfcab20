#include <benchmark/benchmark.h>

#include "hpsmp/rng.hpp"
#include "hpsmp/tensor.hpp"

using namespace hpsmp;

static void BM_Conv1dForward(benchmark::State& state) {
  const int len = static_cast<int>(state.range(0));
  Rng rng(1);
  Tensor input = Tensor::uniform({len, 50}, rng);
  Tensor kernels = Tensor::uniform({15, 50, 64}, rng);
  Tensor bias = Tensor::uniform({64}, rng);
  for (auto _ : state) {
    Graph g;
    Tensor out = g.conv1d(input, kernels, bias, 1);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_Conv1dForward)->Arg(32)->Arg(64)->Arg(128);

static void BM_MatmulBackward(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Rng rng(2);
  Tensor a = Tensor::uniform({n, n}, rng);
  Tensor b = Tensor::uniform({n, n}, rng);
  for (auto _ : state) {
    Graph g;
    Tensor loss = g.mean(g.matmul(a, b));
    g.backward(loss);
    benchmark::DoNotOptimize(a.grad_data());
  }
}
BENCHMARK(BM_MatmulBackward)->Arg(16)->Arg(64)->Arg(128);

static void BM_MaxpoolForwardBackward(benchmark::State& state) {
  Rng rng(3);
  Tensor input = Tensor::uniform({256, 64}, rng);
  for (auto _ : state) {
    Graph g;
    Tensor loss = g.mean(g.maxpool1d(input, 2, 2));
    g.backward(loss);
    benchmark::DoNotOptimize(input.grad_data());
  }
}
BENCHMARK(BM_MaxpoolForwardBackward);

BENCHMARK_MAIN();
