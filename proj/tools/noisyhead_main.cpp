// Experiment CLI: privacy-risk sweeps, the early-stopping study, the
// robustness comparison, hyperparameter calibration, and a selftest.
//
// Exit codes: 0 success, 1 runtime failure, 2 configuration error.

#include <array>
#include <atomic>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <string>

#include <CLI11.hpp>

#include "noisyhead/experiments.hpp"
#include "noisyhead/results_io.hpp"
#include "noisyhead/selftest.hpp"
#include "noisyhead/version.hpp"

namespace {

using namespace noisyhead;

struct SuiteCliOptions {
  ExperimentConfig cfg;
  std::string out_dir;
  double lambda = 0, eta0 = 0, sigma = 0, kappa = 1, r_const = 1, noise_const = 1;
  int iters = 0;
  bool proof_form = false;
};

std::string default_out_dir(const std::string& suite) {
  const char* env = std::getenv("NOISYHEAD_OUT_DIR");
  const std::string base = (env && *env) ? env : "results";
  return base + "/" + suite;
}

// Options shared by the four suite subcommands. Precedence: flags over
// config file over paper defaults.
void add_suite_options(CLI::App* sub, SuiteCliOptions& opt) {
  sub->set_config("--config", "", "Flat key=value configuration file");
  sub->add_option("--b", opt.cfg.trials, "Monte Carlo trials per grid point")->check(CLI::PositiveNumber);
  sub->add_option("--seed", opt.cfg.master_seed, "Master seed");
  sub->add_option("--n-test", opt.cfg.n_test, "Held-out test prompts per trial")->check(CLI::PositiveNumber);
  sub->add_option("--threads", opt.cfg.threads, "Worker threads (0 = all cores)");
  sub->add_option("--out", opt.out_dir, "Output directory");
  sub->add_option("--n", opt.cfg.batch_sizes, "Batch size grid")->delimiter(',');
  sub->add_option("--eps", opt.cfg.epsilons, "Privacy epsilon grid")->delimiter(',');
  sub->add_option("--t", opt.cfg.iteration_grid, "Iteration grid (early-stop)")->delimiter(',');
  sub->add_option("--c", opt.cfg.poison_scales, "Poison scale grid (robustness)")->delimiter(',');
  sub->add_option("--p", opt.cfg.poison_exponents, "Poison exponent grid (robustness)")->delimiter(',');
  sub->add_option("--d", opt.cfg.dim, "Feature dimension (0 = suite rule)");
  sub->add_option("--l", opt.cfg.context_len, "Context length (0 = suite rule)");
  sub->add_option("--tau2", opt.cfg.tau2, "Response noise variance");
  sub->add_option("--delta", opt.cfg.delta, "Privacy delta");
  sub->add_option("--mu", opt.cfg.feature_shift, "Feature shift of the poisoned prompt");
  sub->add_option("--lambda", opt.lambda, "Ridge penalty override");
  sub->add_option("--eta0", opt.eta0, "Step size override");
  sub->add_option("--sigma", opt.sigma, "Noise scale override (0 disables noise)");
  sub->add_option("--kappa", opt.kappa, "Calibration confidence parameter");
  sub->add_option("--r-const", opt.r_const, "Proportionality constant in the parameter radius");
  sub->add_option("--noise-const", opt.noise_const, "sigma = noise-const * 2G(C + RG)");
  sub->add_option("--iters", opt.iters, "Fixed iteration count override");
  sub->add_flag("--proof-form", opt.proof_form, "Use fourth-root correction factors");
}

void collect_overrides(const CLI::App* sub, SuiteCliOptions& opt) {
  auto given = [&](const char* name) { return sub->get_option(name)->count() > 0; };
  if (given("--lambda")) opt.cfg.overrides.ridge_penalty = opt.lambda;
  if (given("--eta0")) opt.cfg.overrides.step_size = opt.eta0;
  if (given("--sigma")) opt.cfg.overrides.noise_scale = opt.sigma;
  if (given("--kappa")) opt.cfg.overrides.kappa = opt.kappa;
  if (given("--r-const")) opt.cfg.overrides.r_const = opt.r_const;
  if (given("--noise-const")) opt.cfg.overrides.noise_const = opt.noise_const;
  if (given("--iters")) opt.cfg.overrides.iterations = opt.iters;
  opt.cfg.overrides.proof_form = opt.proof_form;
}

void print_resolution_warnings(const RunManifest& manifest) {
  bool warned_sigma = false, warned_step = false;
  for (const auto& point : manifest.resolved) {
    const HyperParams& hp = point.hyper;
    const double floor = min_noise_scale(hp.feature_radius, hp.clip_bound, hp.param_radius);
    if (!warned_sigma && hp.noise_scale < floor) {
      std::cerr << "warning: noise scale " << format_double(hp.noise_scale)
                << " is below the privacy floor 2G(C+RG) = " << format_double(floor) << "\n";
      warned_sigma = true;
    }
    if (!warned_step && hp.step_size > step_size_upper_bound(hp.ridge_penalty, hp.feature_radius)) {
      std::cerr << "note: step size " << format_double(hp.step_size)
                << " exceeds the contraction bound lambda/(2 lambda + G^2)^2\n";
      warned_step = true;
    }
  }
}

void print_table(const SummaryTable& table) {
  for (const auto& col : table.grid_columns) std::cout << col << '\t';
  for (const auto& name : table.metric_names) std::cout << name << "_mean\t" << name << "_se\t";
  std::cout << "B\n";
  for (const auto& row : table.rows) {
    for (double v : row.grid_values) std::cout << format_grid_value(v) << '\t';
    for (std::size_t j = 0; j < table.metric_names.size(); ++j) {
      std::cout << format_double(row.means[j]) << '\t' << format_double(row.ses[j]) << '\t';
    }
    std::cout << row.trials << '\n';
  }
}

int run_suite_command(SuiteCliOptions& opt, const CLI::App* sub) {
  collect_overrides(sub, opt);
  if (opt.out_dir.empty()) opt.out_dir = default_out_dir(suite_name(opt.cfg.suite));

  RunManifest manifest = make_manifest(opt.cfg);  // resolves every grid point up front
  print_resolution_warnings(manifest);
  write_manifest(manifest, opt.out_dir);

  const std::size_t total = manifest.resolved.size() * static_cast<std::size_t>(opt.cfg.trials);
  std::cerr << suite_name(opt.cfg.suite) << ": " << manifest.resolved.size() << " grid points x "
            << opt.cfg.trials << " trials\n";
  std::mutex io_mutex;
  std::atomic<std::size_t> done{0};
  ProgressFn progress = [&](std::size_t, int) {
    const std::size_t d = done.fetch_add(1) + 1;
    if (d % 10 == 0 || d == total) {
      std::lock_guard<std::mutex> lock(io_mutex);
      std::cerr << '\r' << d << '/' << total << " trials" << (d == total ? "\n" : "") << std::flush;
    }
  };

  const SuiteResult result = run_suite(opt.cfg, progress);
  const OutputPaths paths = write_results(result.table, result.records, manifest, opt.out_dir);

  print_table(result.table);
  std::cout << "summary: " << paths.summary.string() << "\n"
            << "trials: " << paths.trials.string() << "\n"
            << "manifest: " << paths.manifest.string() << "\n";

  bool failed = false;
  for (std::size_t g = 0; g < result.point_errors.size(); ++g) {
    if (result.point_errors[g].empty()) continue;
    failed = true;
    std::cerr << "error: grid point " << g << " aborted: " << result.point_errors[g] << "\n";
  }
  return failed ? 1 : 0;
}

int run_calibrate(int n, int l, int d, double tau2, double kappa, double lambda, double r_const,
                  bool proof_form) {
  const HyperParams hp = calibrate(n, l, d, tau2, kappa, lambda, r_const,
                                   proof_form ? CorrectionForm::fourth_root
                                              : CorrectionForm::square_root);
  std::cout << "response_variance (nu) = " << format_double(hp.response_variance) << "\n"
            << "clip_bound (C) = " << format_double(hp.clip_bound) << "\n"
            << "feature_radius (G) = " << format_double(hp.feature_radius) << "\n"
            << "test_feature_radius (G0) = " << format_double(hp.test_feature_radius) << "\n"
            << "param_radius (R) = " << format_double(hp.param_radius) << "\n"
            << "confidence (kappa) = " << format_double(hp.confidence) << "\n"
            << "ridge_penalty (lambda) = " << format_double(hp.ridge_penalty) << "\n"
            << "min_noise_scale = "
            << format_double(min_noise_scale(hp.feature_radius, hp.clip_bound, hp.param_radius))
            << "\n";
  return 0;
}

int run_selftest_command(std::uint64_t seed) {
  bool all_pass = true;
  for (const CheckResult& check : run_selftest(seed)) {
    std::cout << (check.pass ? "[PASS] " : "[FAIL] ") << check.name << ": " << check.detail << "\n";
    all_pass = all_pass && check.pass;
  }
  std::cout << (all_pass ? "selftest passed\n" : "selftest FAILED\n");
  return all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Differentially private pretraining of a linear attention head "
               "for in-context linear regression"};
  app.set_version_flag("--version", noisyhead::kVersion);
  app.require_subcommand(1);

  std::array<SuiteCliOptions, 4> suite_options;
  const std::array<Suite, 4> suites = {Suite::privacy_sweep_low, Suite::privacy_sweep_high,
                                       Suite::early_stopping, Suite::robustness};
  const std::array<const char*, 4> descriptions = {
      "Low-dimensional privacy-risk sweep over (N, epsilon)",
      "High-dimensional privacy-risk sweep over (N, epsilon)",
      "Early-stopping phase transition over the iteration grid",
      "Adversarial robustness comparison over (c, p)"};
  std::array<CLI::App*, 4> suite_subs{};
  for (std::size_t i = 0; i < suites.size(); ++i) {
    suite_options[i].cfg = default_config(suites[i]);
    suite_subs[i] = app.add_subcommand(suite_name(suites[i]), descriptions[i]);
    add_suite_options(suite_subs[i], suite_options[i]);
  }

  auto* cal = app.add_subcommand("calibrate", "Print calibrated hyperparameters without running");
  int cal_n = 1000, cal_l = 31, cal_d = 5;
  double cal_tau2 = 0, cal_kappa = 1, cal_lambda = 5, cal_r_const = 1;
  bool cal_proof = false;
  cal->add_option("--n", cal_n, "Training prompts")->required();
  cal->add_option("--l", cal_l, "Context length")->required();
  cal->add_option("--d", cal_d, "Feature dimension")->required();
  cal->add_option("--tau2", cal_tau2, "Response noise variance");
  cal->add_option("--kappa", cal_kappa, "Confidence parameter");
  cal->add_option("--lambda", cal_lambda, "Ridge penalty");
  cal->add_option("--r-const", cal_r_const, "Parameter radius constant");
  cal->add_flag("--proof-form", cal_proof, "Use fourth-root correction factors");

  auto* self = app.add_subcommand("selftest", "Run the oracle-equivalence and invariant suites");
  std::uint64_t self_seed = 20240817;
  self->add_option("--seed", self_seed, "Selftest seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    for (std::size_t i = 0; i < suites.size(); ++i) {
      if (suite_subs[i]->parsed()) return run_suite_command(suite_options[i], suite_subs[i]);
    }
    if (cal->parsed()) {
      return run_calibrate(cal_n, cal_l, cal_d, cal_tau2, cal_kappa, cal_lambda, cal_r_const,
                           cal_proof);
    }
    if (self->parsed()) return run_selftest_command(self_seed);
  } catch (const std::invalid_argument& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
