#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "divrec/div/divergence.hpp"
#include "divrec/eval/metrics.hpp"
#include "divrec/nn/layers.hpp"
#include "divrec/nn/ops.hpp"

using namespace divrec;

namespace {

nn::Tensor random_tensor(std::size_t rows, std::size_t cols, nn::Rng& rng, bool grad = false) {
  nn::Tensor t = nn::init_uniform({rows, cols}, cols, rng);
  t.set_requires_grad(grad);
  return t;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  nn::Rng rng(1);
  auto a = random_tensor(n, n, rng), b = random_tensor(n, n, rng);
  nn::NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(nn::matmul(a, b));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Matmul)->RangeMultiplier(2)->Range(16, 128)->Complexity();

void BM_BlockForwardBackward(benchmark::State& state) {
  const auto len = static_cast<std::size_t>(state.range(0));
  nn::Rng rng(2);
  nn::TransformerBlock block(64, 128, true, rng);
  auto x = random_tensor(len, 64, rng, true);
  for (auto _ : state) {
    auto loss = nn::sum(block.forward(x));
    nn::backward(loss);
    benchmark::DoNotOptimize(loss.item());
  }
}
BENCHMARK(BM_BlockForwardBackward)->Arg(16)->Arg(64)->Arg(128);

void BM_ConstraintRows(benchmark::State& state) {
  const auto pairs = static_cast<std::size_t>(state.range(0));
  nn::Rng rng(3);
  auto a = random_tensor(pairs, 64, rng, true), b = random_tensor(pairs, 64, rng, true);
  const div::DivergenceConfig cfg;
  for (auto _ : state) {
    auto c = div::constraint_rows(a, b, cfg);
    nn::backward(c);
    benchmark::DoNotOptimize(c.item());
  }
}
BENCHMARK(BM_ConstraintRows)->Arg(32)->Arg(256);

void BM_Evaluate(benchmark::State& state) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u;
  std::vector<eval::RankedSample> samples(static_cast<std::size_t>(state.range(0)));
  for (auto& s : samples) {
    s.scores.resize(10);
    for (auto& v : s.scores) v = u(rng);
    s.positive = rng() % 10;
  }
  for (auto _ : state) benchmark::DoNotOptimize(eval::evaluate(samples));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Evaluate)->Arg(1000)->Arg(10000);

}  // namespace

BENCHMARK_MAIN();
