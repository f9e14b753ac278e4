#include "noisyhead/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "noisyhead/trainers.hpp"

namespace noisyhead {

namespace {

// Stream purposes; part of the reproducibility contract, do not renumber.
enum StreamUse : std::uint64_t { kBatch = 1, kTest = 2, kNoise = 3, kPoison = 4, kInit = 5 };

std::uint64_t suite_tag(Suite suite) { return static_cast<std::uint64_t>(suite) + 101; }

int sqrt_floor(int n) { return static_cast<int>(std::floor(std::sqrt(static_cast<double>(n)))); }

CorrectionForm correction_form(const ExperimentConfig& cfg) {
  return cfg.overrides.proof_form ? CorrectionForm::fourth_root : CorrectionForm::square_root;
}

double resolve_sigma(const ExperimentConfig& cfg, const HyperParams& hp) {
  if (cfg.overrides.noise_scale) return *cfg.overrides.noise_scale;
  const double noise_const = cfg.overrides.noise_const.value_or(1.0);
  return noise_const * min_noise_scale(hp.feature_radius, hp.clip_bound, hp.param_radius);
}

void require(bool ok, const char* message) {
  if (!ok) throw std::invalid_argument(message);
}

void validate_common(const ExperimentConfig& cfg) {
  require(cfg.trials >= 1, "trial count must be >= 1");
  require(cfg.n_test >= 1, "test set size must be >= 1");
  require(!cfg.batch_sizes.empty(), "batch size grid must be non-empty");
  require(cfg.tau2 >= 0, "tau^2 must be >= 0");
}

std::vector<ContextFeature> test_features(RngStream& rng, int n, const SamplerConfig& sampler) {
  std::vector<ContextFeature> features;
  features.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) features.push_back(build_context_feature(generate_prompt(rng, sampler)));
  return features;
}

GridPointInfo resolve_sweep_point(const ExperimentConfig& cfg, bool low_dim, int n, double eps) {
  GridPointInfo info;
  info.grid_values = {static_cast<double>(n), eps};
  info.batch_size = n;
  const int d = cfg.dim > 0 ? cfg.dim : (low_dim ? 5 : sqrt_floor(n));
  const int l = cfg.context_len > 0 ? cfg.context_len : sqrt_floor(n);
  info.sampler = SamplerConfig{d, l, cfg.tau2};

  const double kappa = cfg.overrides.kappa.value_or(1.0);
  const double lambda =
      cfg.overrides.ridge_penalty.value_or(low_dim ? 5.0 : static_cast<double>(n) / d);
  HyperParams hp = calibrate(n, l, d, cfg.tau2, kappa, lambda,
                             cfg.overrides.r_const.value_or(1.0), correction_form(cfg));
  hp.step_size = cfg.overrides.step_size.value_or(experiment_step_size(
      low_dim ? Regime::low_dim : Regime::high_dim, n, d, lambda, hp.feature_radius));
  if (cfg.overrides.iterations) {
    hp.iterations = *cfg.overrides.iterations;
  } else if (low_dim) {
    // B-rule T = log(N^{5/2}) / log((1 - lambda eta0)^{-1}), rounded up.
    hp.iterations = iterations_from_r(std::pow(static_cast<double>(n), 2.5), hp.step_size, lambda);
  } else {
    hp.iterations = 5;
  }
  hp.noise_scale = resolve_sigma(cfg, hp);
  info.hyper = hp;
  info.budget = PrivacyBudget{eps, cfg.delta};
  return info;
}

GridPointInfo resolve_early_point(const ExperimentConfig& cfg, int iterations) {
  GridPointInfo info;
  info.grid_values = {static_cast<double>(iterations)};
  info.batch_size = cfg.batch_sizes.front();
  const int n = info.batch_size;
  const int d = cfg.dim > 0 ? cfg.dim : sqrt_floor(n);
  const int l = cfg.context_len > 0 ? cfg.context_len : sqrt_floor(n);
  info.sampler = SamplerConfig{d, l, cfg.tau2};

  const double kappa = cfg.overrides.kappa.value_or(1.0);
  const double lambda = cfg.overrides.ridge_penalty.value_or(static_cast<double>(n) / d);
  HyperParams hp = calibrate(n, l, d, cfg.tau2, kappa, lambda,
                             cfg.overrides.r_const.value_or(1.0), correction_form(cfg));
  hp.step_size = cfg.overrides.step_size.value_or(
      experiment_step_size(Regime::early_stop, n, d, lambda, hp.feature_radius));
  hp.iterations = iterations;
  hp.noise_scale = resolve_sigma(cfg, hp);
  info.hyper = hp;
  info.budget = PrivacyBudget{cfg.epsilons.front(), cfg.delta};
  return info;
}

GridPointInfo resolve_robustness_point(const ExperimentConfig& cfg, double c, double p) {
  GridPointInfo info;
  info.grid_values = {c, p};
  info.batch_size = cfg.batch_sizes.front();
  const int n = info.batch_size;
  const int d = cfg.dim > 0 ? cfg.dim : 5;
  const int l = cfg.context_len > 0 ? cfg.context_len : 500;
  info.sampler = SamplerConfig{d, l, cfg.tau2};

  const double kappa = cfg.overrides.kappa.value_or(1.0);
  const double lambda = cfg.overrides.ridge_penalty.value_or(0.01);
  HyperParams hp = calibrate(n, l, d, cfg.tau2, kappa, lambda,
                             cfg.overrides.r_const.value_or(1.0), correction_form(cfg));
  hp.step_size = cfg.overrides.step_size.value_or(
      experiment_step_size(Regime::robustness, n, d, lambda, hp.feature_radius));
  hp.iterations = cfg.overrides.iterations.value_or(
      static_cast<int>(std::ceil(std::log(static_cast<double>(n)))));
  hp.noise_scale = resolve_sigma(cfg, hp);
  info.hyper = hp;
  info.budget = PrivacyBudget{cfg.epsilons.front(), cfg.delta};
  info.feature_shift = cfg.feature_shift;
  info.response_shift = c * std::pow(static_cast<double>(n), p);
  return info;
}

AttentionParams sphere_initial(RngStream& rng, int dim, double radius) {
  Eigen::VectorXd v = rng.normal_vector(static_cast<Eigen::Index>(dim) * dim);
  v *= radius / v.norm();
  return AttentionParams{Eigen::Map<const Eigen::MatrixXd>(v.data(), dim, dim)};
}

}  // namespace

std::string suite_name(Suite suite) {
  switch (suite) {
    case Suite::privacy_sweep_low: return "sweep-low";
    case Suite::privacy_sweep_high: return "sweep-high";
    case Suite::early_stopping: return "early-stop";
    case Suite::robustness: return "robustness";
  }
  throw std::invalid_argument("unknown suite");
}

std::optional<Suite> suite_from_name(const std::string& name) {
  if (name == "sweep-low") return Suite::privacy_sweep_low;
  if (name == "sweep-high") return Suite::privacy_sweep_high;
  if (name == "early-stop") return Suite::early_stopping;
  if (name == "robustness") return Suite::robustness;
  return std::nullopt;
}

ExperimentConfig default_config(Suite suite) {
  ExperimentConfig cfg;
  cfg.suite = suite;
  switch (suite) {
    case Suite::privacy_sweep_low:
      cfg.batch_sizes = {1000, 1500, 2000, 2500, 3000, 3500, 4000};
      cfg.epsilons = {0.2, 0.4, 0.6, 0.8, 1.0};
      cfg.dim = 5;
      break;
    case Suite::privacy_sweep_high:
      cfg.batch_sizes = {500, 600, 700, 800, 900, 1000};
      cfg.epsilons = {0.01, 0.05, 0.1, 0.5, 1.0};
      break;
    case Suite::early_stopping:
      cfg.batch_sizes = {1000};
      cfg.epsilons = {0.8};
      cfg.iteration_grid = {1};
      for (int t = 20; t <= 480; t += 20) cfg.iteration_grid.push_back(t);
      break;
    case Suite::robustness:
      cfg.batch_sizes = {5000};
      cfg.epsilons = {0.5};
      cfg.delta = 1e-2;
      cfg.dim = 5;
      cfg.context_len = 500;
      cfg.poison_scales = {2.0, 4.0};
      cfg.poison_exponents = {2.0, 2.02, 2.04, 2.06, 2.08, 2.1};
      cfg.feature_shift = 1.0;
      break;
  }
  return cfg;
}

std::vector<GridPointInfo> resolve_grid(const ExperimentConfig& cfg) {
  validate_common(cfg);
  std::vector<GridPointInfo> resolved;
  switch (cfg.suite) {
    case Suite::privacy_sweep_low:
    case Suite::privacy_sweep_high: {
      require(!cfg.epsilons.empty(), "epsilon grid must be non-empty");
      const bool low = cfg.suite == Suite::privacy_sweep_low;
      for (int n : cfg.batch_sizes) {
        for (double eps : cfg.epsilons) resolved.push_back(resolve_sweep_point(cfg, low, n, eps));
      }
      break;
    }
    case Suite::early_stopping: {
      require(!cfg.iteration_grid.empty(), "iteration grid must be non-empty");
      require(!cfg.epsilons.empty(), "epsilon must be set");
      for (int t : cfg.iteration_grid) resolved.push_back(resolve_early_point(cfg, t));
      break;
    }
    case Suite::robustness: {
      require(!cfg.poison_scales.empty() && !cfg.poison_exponents.empty(),
              "poison (c, p) grids must be non-empty");
      require(!cfg.epsilons.empty(), "epsilon must be set");
      for (double c : cfg.poison_scales) {
        for (double p : cfg.poison_exponents) resolved.push_back(resolve_robustness_point(cfg, c, p));
      }
      break;
    }
  }
  return resolved;
}

MonteCarloOutput monte_carlo(std::size_t grid_size, int trials, int threads,
                             const TrialFn& trial_fn, const ProgressFn& progress) {
  require(grid_size > 0, "grid must be non-empty");
  require(trials >= 1, "trial count must be >= 1");
  const std::size_t total = grid_size * static_cast<std::size_t>(trials);
  std::vector<TrialRecord> slots(total);
  std::vector<std::string> item_errors(total);

  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
      if (i >= total) return;
      const std::size_t g = i / static_cast<std::size_t>(trials);
      const int b = static_cast<int>(i % static_cast<std::size_t>(trials));
      try {
        auto metrics = trial_fn(g, b);
        for (const auto& [name, value] : metrics) {
          if (!std::isfinite(value)) throw std::runtime_error("non-finite metric " + name);
          if (value < 0) throw std::runtime_error("negative metric " + name);
        }
        slots[i] = TrialRecord{g, b, std::move(metrics)};
      } catch (const std::exception& e) {
        item_errors[i] = e.what()[0] ? e.what() : "trial failed";
      }
      if (progress) progress(g, b);
    }
  };

  unsigned workers = threads > 0 ? static_cast<unsigned>(threads)
                                 : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, total));
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();

  MonteCarloOutput out;
  out.point_errors.assign(grid_size, "");
  for (std::size_t g = 0; g < grid_size; ++g) {
    for (int b = 0; b < trials; ++b) {
      const std::string& err = item_errors[g * trials + b];
      if (!err.empty()) {
        out.point_errors[g] = "trial " + std::to_string(b) + ": " + err;
        break;
      }
    }
  }
  for (std::size_t g = 0; g < grid_size; ++g) {
    if (!out.point_errors[g].empty()) continue;
    for (int b = 0; b < trials; ++b) out.records.push_back(std::move(slots[g * trials + b]));
  }
  return out;
}

SummaryTable summarize(const std::vector<std::string>& grid_columns,
                       const std::vector<GridPointInfo>& resolved,
                       const std::vector<std::string>& metric_names,
                       const std::vector<TrialRecord>& records,
                       const std::vector<std::string>& point_errors, int trials) {
  SummaryTable table;
  table.grid_columns = grid_columns;
  table.metric_names = metric_names;
  const std::size_t m = metric_names.size();

  for (std::size_t g = 0; g < resolved.size(); ++g) {
    if (g < point_errors.size() && !point_errors[g].empty()) continue;
    std::vector<double> sums(m, 0.0);
    std::vector<std::vector<double>> values(m);
    int count = 0;
    for (const auto& record : records) {
      if (record.grid_index != g) continue;
      if (record.metrics.size() != m) throw std::logic_error("metric arity mismatch");
      for (std::size_t j = 0; j < m; ++j) {
        if (record.metrics[j].first != metric_names[j]) throw std::logic_error("metric order mismatch");
        sums[j] += record.metrics[j].second;
        values[j].push_back(record.metrics[j].second);
      }
      ++count;
    }
    if (count == 0) continue;
    SummaryRow row;
    row.grid_values = resolved[g].grid_values;
    row.trials = count;
    row.means.resize(m);
    row.ses.resize(m);
    for (std::size_t j = 0; j < m; ++j) {
      const double mean = sums[j] / count;
      row.means[j] = mean;
      double se = 0.0;
      if (count > 1) {
        double ss = 0.0;
        for (double v : values[j]) ss += (v - mean) * (v - mean);
        se = std::sqrt(ss / (count - 1)) / std::sqrt(static_cast<double>(count));
      }
      row.ses[j] = se;
    }
    table.rows.push_back(std::move(row));
  }
  (void)trials;
  return table;
}

SuiteResult run_privacy_sweep(const ExperimentConfig& cfg, bool low_dim,
                              const ProgressFn& progress) {
  ExperimentConfig local = cfg;
  local.suite = low_dim ? Suite::privacy_sweep_low : Suite::privacy_sweep_high;
  std::vector<GridPointInfo> resolved = resolve_grid(local);
  const std::uint64_t tag = suite_tag(local.suite);

  TrialFn fn = [&](std::size_t g, int b) -> std::vector<std::pair<std::string, double>> {
    const GridPointInfo& point = resolved[g];
    RngStream batch_rng(local.master_seed, stream_id(tag, g, b, kBatch));
    const auto batch = generate_batch(batch_rng, point.batch_size, point.sampler);
    const FitResult star = ridge_fit(batch, point.hyper.ridge_penalty);
    TrainConfig trainer;
    trainer.hyper = point.hyper;
    trainer.budget = point.budget;
    RngStream noise_rng(local.master_seed, stream_id(tag, g, b, kNoise));
    const FitResult hat = noisyhead_fit(batch, trainer, noise_rng);
    RngStream test_rng(local.master_seed, stream_id(tag, g, b, kTest));
    const auto tests = test_features(test_rng, local.n_test, point.sampler);
    return {{"excess_risk", excess_risk(hat.gamma, star.gamma, tests)}};
  };

  MonteCarloOutput mc = monte_carlo(resolved.size(), local.trials, local.threads, fn, progress);
  SuiteResult out;
  out.table = summarize({"n", "epsilon"}, resolved, {"excess_risk"}, mc.records, mc.point_errors,
                        local.trials);
  out.records = std::move(mc.records);
  out.resolved = std::move(resolved);
  out.point_errors = std::move(mc.point_errors);
  return out;
}

SuiteResult run_early_stopping(const ExperimentConfig& cfg, const ProgressFn& progress) {
  ExperimentConfig local = cfg;
  local.suite = Suite::early_stopping;
  std::vector<GridPointInfo> resolved = resolve_grid(local);
  const std::uint64_t tag = suite_tag(local.suite);

  TrialFn fn = [&](std::size_t g, int b) -> std::vector<std::pair<std::string, double>> {
    const GridPointInfo& point = resolved[g];
    RngStream batch_rng(local.master_seed, stream_id(tag, g, b, kBatch));
    const auto batch = generate_batch(batch_rng, point.batch_size, point.sampler);
    const FitResult star = ridge_fit(batch, point.hyper.ridge_penalty);

    // Both descent runs start from the same point on the R-sphere; at this
    // suite's lambda the ridge solution is tiny, so a zero start would
    // leave no optimization phase to observe.
    RngStream init_rng(local.master_seed, stream_id(tag, g, b, kInit));
    TrainConfig trainer;
    trainer.hyper = point.hyper;
    trainer.budget = point.budget;
    trainer.initial = sphere_initial(init_rng, point.sampler.dim, point.hyper.param_radius);

    RngStream noise_rng(local.master_seed, stream_id(tag, g, b, kNoise));
    const FitResult dp = noisyhead_fit(batch, trainer, noise_rng);
    const FitResult gd = gd_fit(batch, trainer);

    RngStream test_rng(local.master_seed, stream_id(tag, g, b, kTest));
    const auto tests = test_features(test_rng, local.n_test, point.sampler);
    return {{"cost_descent", excess_risk(gd.gamma, star.gamma, tests)},
            {"cost_privacy", excess_risk(dp.gamma, star.gamma, tests)}};
  };

  MonteCarloOutput mc = monte_carlo(resolved.size(), local.trials, local.threads, fn, progress);
  SuiteResult out;
  out.table = summarize({"iterations"}, resolved, {"cost_descent", "cost_privacy"}, mc.records,
                        mc.point_errors, local.trials);
  out.records = std::move(mc.records);
  out.resolved = std::move(resolved);
  out.point_errors = std::move(mc.point_errors);
  return out;
}

SuiteResult run_robustness(const ExperimentConfig& cfg, const ProgressFn& progress) {
  ExperimentConfig local = cfg;
  local.suite = Suite::robustness;
  std::vector<GridPointInfo> resolved = resolve_grid(local);
  const std::uint64_t tag = suite_tag(local.suite);

  TrialFn fn = [&](std::size_t g, int b) -> std::vector<std::pair<std::string, double>> {
    const GridPointInfo& point = resolved[g];
    RngStream batch_rng(local.master_seed, stream_id(tag, g, b, kBatch));
    const auto batch = generate_batch(batch_rng, point.batch_size, point.sampler);

    PerturbationSpec spec;
    spec.feature_shift = point.feature_shift;
    spec.response_shift = point.response_shift;
    RngStream poison_rng(local.master_seed, stream_id(tag, g, b, kPoison));
    const auto [bad_batch, poisoned_index] = poison_batch(poison_rng, batch, spec);
    (void)poisoned_index;

    const FitResult star = ridge_fit(batch, point.hyper.ridge_penalty);
    const FitResult star_bad = ridge_fit(bad_batch, point.hyper.ridge_penalty);

    // The clean and poisoned private fits consume the same noise stream so
    // the comparison isolates the perturbation.
    TrainConfig trainer;
    trainer.hyper = point.hyper;
    trainer.budget = point.budget;
    const std::uint64_t noise_id = stream_id(tag, g, b, kNoise);
    RngStream noise_clean(local.master_seed, noise_id);
    const FitResult hat = noisyhead_fit(batch, trainer, noise_clean);
    RngStream noise_bad(local.master_seed, noise_id);
    const FitResult hat_bad = noisyhead_fit(bad_batch, trainer, noise_bad);

    RngStream test_rng(local.master_seed, stream_id(tag, g, b, kTest));
    const auto tests = test_features(test_rng, local.n_test, point.sampler);
    return {{"risk_dp", excess_risk(hat.gamma, hat_bad.gamma, tests)},
            {"risk_ridge", excess_risk(star.gamma, star_bad.gamma, tests)}};
  };

  MonteCarloOutput mc = monte_carlo(resolved.size(), local.trials, local.threads, fn, progress);
  SuiteResult out;
  out.table = summarize({"c", "p"}, resolved, {"risk_dp", "risk_ridge"}, mc.records,
                        mc.point_errors, local.trials);
  out.records = std::move(mc.records);
  out.resolved = std::move(resolved);
  out.point_errors = std::move(mc.point_errors);
  return out;
}

SuiteResult run_suite(const ExperimentConfig& cfg, const ProgressFn& progress) {
  switch (cfg.suite) {
    case Suite::privacy_sweep_low: return run_privacy_sweep(cfg, true, progress);
    case Suite::privacy_sweep_high: return run_privacy_sweep(cfg, false, progress);
    case Suite::early_stopping: return run_early_stopping(cfg, progress);
    case Suite::robustness: return run_robustness(cfg, progress);
  }
  throw std::invalid_argument("unknown suite");
}

}  // namespace noisyhead
