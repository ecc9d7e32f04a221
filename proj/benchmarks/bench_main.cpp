// SPDX-License-Identifier: Apache-2.0
#include <random>

#include <benchmark/benchmark.h>

#include "qixai/attribution.hpp"
#include "qixai/decomp.hpp"
#include "qixai/fixture.hpp"
#include "qixai/infotheory.hpp"
#include "qixai/model.hpp"

namespace {

using namespace qixai;

Tensor gaussian(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Tensor t({rows, cols});
  for (double& v : t.data()) v = normal(rng);
  return t;
}

void BM_Svd(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor a = gaussian(n, n, 1);
  for (auto _ : state) benchmark::DoNotOptimize(svd(a));
}
BENCHMARK(BM_Svd)->Arg(16)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_ConvForward(benchmark::State& state) {
  const ModelSpec spec = fixture::small_cnn_spec();
  const Model model = load_model(spec, fixture::random_weights(spec, 7));
  const Tensor batch = fixture::synthetic_batch(static_cast<std::size_t>(state.range(0)), spec.input_shape, 3);
  for (auto _ : state) benchmark::DoNotOptimize(model.forward(batch));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ConvForward)->Arg(1)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_IntegratedGradients(benchmark::State& state) {
  const ModelSpec spec = fixture::small_cnn_spec();
  const Model model = load_model(spec, fixture::random_weights(spec, 7)).logit();
  const Tensor input = fixture::synthetic_batch(1, spec.input_shape, 3);
  const Tensor baseline(input.shape());
  const auto steps = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(integrated_gradients(model, input, baseline, {steps, 10, 0}));
}
BENCHMARK(BM_IntegratedGradients)->Arg(100)->Arg(200)->Unit(benchmark::kMillisecond);

void BM_PairwiseMi(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const Tensor a = gaussian(64, c, 2);
  const Tensor b = gaussian(64, c, 3);
  PairwiseMiOptions options;
  for (auto _ : state) benchmark::DoNotOptimize(pairwise_pooled_mi(a, b, options));
}
BENCHMARK(BM_PairwiseMi)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
