#include "noisyhead/selftest.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "noisyhead/experiments.hpp"
#include "noisyhead/results_io.hpp"
#include "noisyhead/trainers.hpp"

namespace noisyhead {

namespace {

constexpr double kHuge = 1e12;

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

Eigen::MatrixXd random_ball_matrix(RngStream& rng, int dim, double radius) {
  Eigen::MatrixXd m(dim, dim);
  for (int j = 0; j < dim; ++j) {
    for (int i = 0; i < dim; ++i) m(i, j) = rng.normal();
  }
  const double norm = m.norm();
  if (norm == 0) return m;
  return m * (radius * rng.uniform01() / norm);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

CheckResult check_gd_ridge_equivalence(int instances, std::uint64_t seed, double tolerance) {
  CheckResult result{"gd_ridge_equivalence", true, ""};
  double worst = 0;
  for (int i = 0; i < instances; ++i) {
    RngStream rng(seed, stream_id(1001, i));
    const int d = 1 + static_cast<int>(rng.uniform_below(3));
    const int n = 2 + static_cast<int>(rng.uniform_below(19));
    const int l = 2 + static_cast<int>(rng.uniform_below(7));
    const double lambda = 0.3 + 1.7 * rng.uniform01();
    const SamplerConfig sampler{d, l, 0.0};
    const auto batch = generate_batch(rng, n, sampler);

    const FitResult star = ridge_fit(batch, lambda);

    double gram_trace = 0;
    for (const auto& prompt : batch) gram_trace += build_context_feature(prompt).matrix.squaredNorm();
    const double step = 1.0 / (2.0 * lambda + 2.0 * gram_trace / n + 0.5);

    TrainConfig cfg;
    cfg.hyper.clip_bound = kHuge;
    cfg.hyper.feature_radius = kHuge;
    cfg.hyper.param_radius = kHuge;
    cfg.hyper.ridge_penalty = lambda;
    cfg.hyper.step_size = step;
    cfg.hyper.iterations = static_cast<int>(std::ceil(12.0 / (step * lambda)));
    cfg.hyper.noise_scale = 0;
    cfg.exact_gradient = true;
    const FitResult gd = gd_fit(batch, cfg);

    const double denom = std::max(star.gamma.gamma.norm(), 1e-12);
    const double rel = (gd.gamma.gamma - star.gamma.gamma).norm() / denom;
    worst = std::max(worst, rel);
  }
  result.pass = worst <= tolerance;
  result.detail = "worst relative error " + fmt(worst) + " over " + std::to_string(instances) +
                  " instances (tolerance " + fmt(tolerance) + ")";
  return result;
}

CheckResult check_ridge_normal_equations(int instances, std::uint64_t seed, double tolerance) {
  CheckResult result{"ridge_normal_equations", true, ""};
  double worst = 0;
  for (int i = 0; i < instances; ++i) {
    RngStream rng(seed, stream_id(1002, i));
    const int d = 1 + static_cast<int>(rng.uniform_below(10));
    const int n = 1 + static_cast<int>(rng.uniform_below(40));
    const int l = 1 + static_cast<int>(rng.uniform_below(8));
    const double tau2 = rng.uniform01() < 0.5 ? 0.0 : 0.25;
    const double lambda = 0.1 + 9.9 * rng.uniform01();
    const auto batch = generate_batch(rng, n, SamplerConfig{d, l, tau2});

    const FitResult star = ridge_fit(batch, lambda);
    const int p = d * d;
    Eigen::MatrixXd system = Eigen::MatrixXd::Zero(p, p);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(p);
    for (const auto& prompt : batch) {
      const Eigen::MatrixXd z = build_context_feature(prompt).matrix;
      const Eigen::Map<const Eigen::VectorXd> v(z.data(), p);
      system.noalias() += v * v.transpose();
      rhs += prompt.query_response() * v;
    }
    system.diagonal().array() += lambda * n;
    const Eigen::Map<const Eigen::VectorXd> x(star.gamma.gamma.data(), p);
    const double rel = (system * x - rhs).norm() / std::max(rhs.norm(), 1e-300);
    worst = std::max(worst, rel);
  }
  result.pass = worst <= tolerance;
  result.detail = "worst relative residual " + fmt(worst) + " over " + std::to_string(instances) +
                  " instances (tolerance " + fmt(tolerance) + ")";
  return result;
}

CheckResult check_sensitivity_bound(int pairs, std::uint64_t seed) {
  CheckResult result{"sensitivity_bound", true, ""};
  double worst_excess = -1e300;
  for (int i = 0; i < pairs; ++i) {
    RngStream rng(seed, stream_id(1003, i));
    const int d = 1 + static_cast<int>(rng.uniform_below(3));
    const int n = 2 + static_cast<int>(rng.uniform_below(19));
    const int l = 1 + static_cast<int>(rng.uniform_below(8));
    const double tau2 = rng.uniform01() < 0.5 ? 0.0 : 0.5;
    const SamplerConfig sampler{d, l, tau2};

    TrainConfig cfg;
    cfg.hyper.clip_bound = 0.5 + 2.5 * rng.uniform01();
    cfg.hyper.feature_radius = 0.2 + 0.8 * rng.uniform01();
    cfg.hyper.param_radius = 0.5 + 4.5 * rng.uniform01();
    cfg.hyper.ridge_penalty = 0.05 + rng.uniform01();
    cfg.hyper.step_size = 0.01 + 0.29 * rng.uniform01();
    cfg.hyper.iterations = 1;
    cfg.hyper.noise_scale = 0;

    auto batch = generate_batch(rng, n, sampler);
    auto neighbor = batch;
    neighbor[rng.uniform_below(static_cast<std::uint64_t>(n))] = generate_prompt(rng, sampler);

    const AttentionParams gamma{random_ball_matrix(rng, d, cfg.hyper.param_radius)};
    const AttentionParams a = descent_step(batch, gamma, cfg);
    const AttentionParams b = descent_step(neighbor, gamma, cfg);
    const double diff = (a.gamma - b.gamma).norm();
    const double bound = sensitivity_bound(cfg.hyper.step_size, n, cfg.hyper.param_radius,
                                           cfg.hyper.feature_radius, cfg.hyper.clip_bound);
    worst_excess = std::max(worst_excess, diff - bound);
  }
  result.pass = worst_excess <= 1e-10;
  result.detail = "worst (difference - bound) " + fmt(worst_excess) + " over " +
                  std::to_string(pairs) + " neighboring pairs (slack 1e-10)";
  return result;
}

CheckResult check_noise_law(int min_samples, std::uint64_t seed) {
  CheckResult result{"noise_law_variance", true, ""};
  const double step = 0.05;
  const int iters = 7;
  const double sigma = 3.2;
  const PrivacyBudget budget{0.9, 1e-4};
  const int n = 50;
  const NoiseLaw law = noise_std(step, iters, sigma, budget, n);
  const double target = law.per_coordinate_std * law.per_coordinate_std;

  const int dim = 5;
  const int draws = (min_samples + dim * dim - 1) / (dim * dim);
  RngStream rng(seed, stream_id(1004));
  double sum = 0, sum_sq = 0;
  long count = 0;
  for (int i = 0; i < draws; ++i) {
    const Eigen::MatrixXd z = sample_noise(rng, dim, law);
    sum += z.sum();
    sum_sq += z.squaredNorm();
    count += z.size();
  }
  const double mean = sum / count;
  const double variance = (sum_sq - count * mean * mean) / (count - 1);
  const double se = target * std::sqrt(2.0 / (count - 1));
  const double gap = std::abs(variance - target);
  result.pass = gap <= 3 * se;
  result.detail = "pooled variance " + fmt(variance) + " vs target " + fmt(target) + " (" +
                  fmt(gap / se) + " SEs from " + std::to_string(count) + " coordinates)";
  return result;
}

CheckResult check_clip_inactivity(std::uint64_t seed) {
  CheckResult result{"clip_inactivity", true, ""};
  const int n = 1000, l = 100, d = 5;
  const double kappa = 0.01;
  const HyperParams hp = calibrate(n, l, d, 0.0, kappa, 1.0);
  RngStream rng(seed, stream_id(1005));
  long clipped = 0, total = 0;
  const auto batch = generate_batch(rng, n, SamplerConfig{d, l, 0.0});
  for (const auto& prompt : batch) {
    for (Eigen::Index i = 0; i < prompt.responses.size(); ++i) {
      if (std::abs(prompt.responses[i]) > hp.clip_bound) ++clipped;
      ++total;
    }
  }
  const double fraction = static_cast<double>(clipped) / total;
  result.pass = total >= 100000 && fraction <= 0.02;
  result.detail = "clipped fraction " + fmt(fraction) + " of " + std::to_string(total) +
                  " responses at clip bound " + fmt(hp.clip_bound);
  return result;
}

CheckResult check_run_determinism(std::uint64_t seed) {
  CheckResult result{"run_determinism", true, ""};
  ExperimentConfig cfg = default_config(Suite::privacy_sweep_low);
  cfg.batch_sizes = {60};
  cfg.epsilons = {1.0};
  cfg.dim = 3;
  cfg.context_len = 8;
  cfg.trials = 3;
  cfg.n_test = 20;
  cfg.master_seed = seed;

  const auto base = std::filesystem::temp_directory_path() /
                    ("noisyhead-selftest-" + std::to_string(seed));
  std::filesystem::remove_all(base);
  std::string first_summary, first_trials;
  bool identical = true;
  for (int workers = 1; workers <= 2 && identical; ++workers) {
    for (int repeat = 0; repeat < 2 && identical; ++repeat) {
      cfg.threads = workers;
      const SuiteResult run = run_suite(cfg);
      const auto dir = base / (std::to_string(workers) + "-" + std::to_string(repeat));
      const auto paths = write_results(run.table, run.records, make_manifest(cfg), dir);
      const std::string summary = read_file(paths.summary);
      const std::string trials = read_file(paths.trials);
      if (first_summary.empty()) {
        first_summary = summary;
        first_trials = trials;
      } else if (summary != first_summary || trials != first_trials) {
        identical = false;
      }
    }
  }
  std::filesystem::remove_all(base);
  result.pass = identical && !first_summary.empty();
  result.detail = identical ? "summary.csv and trials.csv byte-identical across 4 runs, 1-2 workers"
                            : "outputs differ across runs or worker counts";
  return result;
}

std::vector<CheckResult> run_selftest(std::uint64_t seed) {
  std::vector<CheckResult> checks;
  checks.push_back(check_gd_ridge_equivalence(8, seed));
  checks.push_back(check_ridge_normal_equations(30, seed));
  checks.push_back(check_sensitivity_bound(200, seed));
  checks.push_back(check_noise_law(100000, seed));
  checks.push_back(check_clip_inactivity(seed));
  checks.push_back(check_run_determinism(seed));
  return checks;
}

}  // namespace noisyhead
