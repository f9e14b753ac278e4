#include <benchmark/benchmark.h>

#include "noisyhead/calibration.hpp"
#include "noisyhead/sampling.hpp"
#include "noisyhead/trainers.hpp"

using namespace noisyhead;

namespace {

std::vector<Prompt> overparameterized_batch(int n, int d, int l) {
  RngStream rng(7, stream_id(10, n, d, l));
  return generate_batch(rng, n, SamplerConfig{d, l, 0.0});
}

TrainConfig early_stop_config(int n, int d, int l, int iterations) {
  const double lambda = static_cast<double>(n) / d;
  TrainConfig cfg;
  cfg.hyper = calibrate(n, l, d, 0.0, 1.0, lambda);
  cfg.hyper.step_size = experiment_step_size(Regime::early_stop, n, d, lambda,
                                             cfg.hyper.feature_radius);
  cfg.hyper.iterations = iterations;
  cfg.hyper.noise_scale = min_noise_scale(cfg.hyper.feature_radius, cfg.hyper.clip_bound,
                                          cfg.hyper.param_radius);
  cfg.budget = PrivacyBudget{0.8, 1e-5};
  return cfg;
}

}  // namespace

static void BM_RidgeFit(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const int d = static_cast<int>(state.range(1));
  const auto batch = overparameterized_batch(n, d, d);
  for (auto _ : state) {
    benchmark::DoNotOptimize(ridge_fit(batch, static_cast<double>(n) / d));
  }
}
BENCHMARK(BM_RidgeFit)->Args({1000, 5})->Args({1000, 31})->Unit(benchmark::kMillisecond);

static void BM_NoisyHeadFit(benchmark::State& state) {
  const int n = 1000, d = 31, l = 31;
  const auto batch = overparameterized_batch(n, d, l);
  const TrainConfig cfg = early_stop_config(n, d, l, static_cast<int>(state.range(0)));
  for (auto _ : state) {
    RngStream noise(9, stream_id(11, state.range(0)));
    benchmark::DoNotOptimize(noisyhead_fit(batch, cfg, noise));
  }
}
BENCHMARK(BM_NoisyHeadFit)->Arg(20)->Arg(140)->Arg(480)->Unit(benchmark::kMillisecond);

static void BM_DescentStep(benchmark::State& state) {
  const int n = 1000, d = 31, l = 31;
  const auto batch = overparameterized_batch(n, d, l);
  TrainConfig cfg = early_stop_config(n, d, l, 1);
  const AttentionParams gamma{Eigen::MatrixXd::Zero(d, d)};
  for (auto _ : state) {
    benchmark::DoNotOptimize(descent_step(batch, gamma, cfg));
  }
}
BENCHMARK(BM_DescentStep)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
