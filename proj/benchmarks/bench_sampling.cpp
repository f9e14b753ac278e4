#include <benchmark/benchmark.h>

#include "noisyhead/sampling.hpp"

using namespace noisyhead;

static void BM_GeneratePrompt(benchmark::State& state) {
  RngStream rng(1, stream_id(1));
  const SamplerConfig cfg{static_cast<int>(state.range(0)), static_cast<int>(state.range(1)), 0.0};
  for (auto _ : state) {
    benchmark::DoNotOptimize(generate_prompt(rng, cfg));
  }
}
BENCHMARK(BM_GeneratePrompt)->Args({5, 31})->Args({31, 31})->Args({5, 500});

static void BM_GenerateBatch(benchmark::State& state) {
  RngStream rng(1, stream_id(2));
  const SamplerConfig cfg{31, 31, 0.0};
  for (auto _ : state) {
    benchmark::DoNotOptimize(generate_batch(rng, static_cast<int>(state.range(0)), cfg));
  }
}
BENCHMARK(BM_GenerateBatch)->Arg(100)->Arg(1000);

static void BM_ContextFeature(benchmark::State& state) {
  RngStream rng(1, stream_id(3));
  const Prompt prompt = generate_prompt(rng, SamplerConfig{static_cast<int>(state.range(0)),
                                                           static_cast<int>(state.range(1)), 0.0});
  for (auto _ : state) {
    benchmark::DoNotOptimize(build_context_feature(prompt));
  }
}
BENCHMARK(BM_ContextFeature)->Args({5, 31})->Args({31, 31})->Args({5, 500});
