// Monte Carlo harness and the experiment suites: the two privacy-risk
// sweeps, the early-stopping phase-transition study, and the adversarial
// robustness comparison.
//
// Reproducibility contract: every random draw in a trial comes from a
// stream addressed by (master_seed, hash(suite, grid_index, trial, use)),
// so results are bit-identical across runs and worker counts.

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "noisyhead/calibration.hpp"
#include "noisyhead/mechanisms.hpp"
#include "noisyhead/sampling.hpp"

namespace noisyhead {

enum class Suite { privacy_sweep_low, privacy_sweep_high, early_stopping, robustness };

std::string suite_name(Suite suite);
std::optional<Suite> suite_from_name(const std::string& name);

// Optional replacements for calibrated or suite-default hyperparameters.
struct Overrides {
  std::optional<double> ridge_penalty;
  std::optional<double> step_size;
  std::optional<double> noise_scale;   // sigma; 0 disables injection
  std::optional<double> kappa;
  std::optional<double> r_const;       // proportionality constant in R
  std::optional<double> noise_const;   // sigma = noise_const * 2G(C + RG)
  std::optional<int> iterations;       // fixed T (sweeps)
  bool proof_form = false;             // fourth-root correction factors
};

struct ExperimentConfig {
  Suite suite = Suite::privacy_sweep_low;
  std::vector<int> batch_sizes;          // N grid (single entry outside the sweeps)
  std::vector<double> epsilons;          // epsilon grid (single entry outside the sweeps)
  std::vector<int> iteration_grid;       // early stopping T grid
  std::vector<double> poison_scales;     // robustness c grid
  std::vector<double> poison_exponents;  // robustness p grid
  int dim = 0;          // 0 = suite rule
  int context_len = 0;  // 0 = suite rule
  double tau2 = 0.0;
  double delta = 1e-5;
  double feature_shift = 1.0;  // robustness mu
  int n_test = 500;
  int trials = 50;  // paper runs use 500; desk default keeps trends significant
  std::uint64_t master_seed = 1;
  int threads = 0;  // 0 = hardware concurrency
  Overrides overrides;
};

/// Paper-default grids and parameters for a suite (desk-scale trial count).
ExperimentConfig default_config(Suite suite);

struct TrialRecord {
  std::size_t grid_index = 0;
  int trial_id = 0;
  std::vector<std::pair<std::string, double>> metrics;
};

struct SummaryRow {
  std::vector<double> grid_values;
  std::vector<double> means;
  std::vector<double> ses;
  int trials = 0;
};

struct SummaryTable {
  std::vector<std::string> grid_columns;
  std::vector<std::string> metric_names;
  std::vector<SummaryRow> rows;
};

// Fully resolved per-grid-point configuration, recorded in the manifest.
struct GridPointInfo {
  std::vector<double> grid_values;
  int batch_size = 0;
  SamplerConfig sampler;
  HyperParams hyper;
  PrivacyBudget budget;
  double feature_shift = 0;
  double response_shift = 0;
};

struct SuiteResult {
  SummaryTable table;
  std::vector<TrialRecord> records;          // successful grid points only
  std::vector<GridPointInfo> resolved;       // one per grid point
  std::vector<std::string> point_errors;     // one per grid point; empty = ok
};

/// Resolves the per-point configuration without running anything; used for
/// the manifest (written before the run) and the calibrate command.
std::vector<GridPointInfo> resolve_grid(const ExperimentConfig& cfg);

using TrialFn =
    std::function<std::vector<std::pair<std::string, double>>(std::size_t grid_index, int trial)>;

/// Called after each completed trial; must be thread-safe.
using ProgressFn = std::function<void(std::size_t grid_index, int trial)>;

struct MonteCarloOutput {
  std::vector<TrialRecord> records;
  std::vector<std::string> point_errors;
};

/// Runs trial_fn over grid x trials on a deterministic worker pool. A trial
/// error (exception or non-finite metric) voids its whole grid point; all
/// other points proceed. Output is independent of scheduling.
MonteCarloOutput monte_carlo(std::size_t grid_size, int trials, int threads, const TrialFn& trial_fn,
                             const ProgressFn& progress = {});

/// Per-point means and standard errors of the mean (0 when trials == 1).
SummaryTable summarize(const std::vector<std::string>& grid_columns,
                       const std::vector<GridPointInfo>& resolved,
                       const std::vector<std::string>& metric_names,
                       const std::vector<TrialRecord>& records,
                       const std::vector<std::string>& point_errors, int trials);

SuiteResult run_privacy_sweep(const ExperimentConfig& cfg, bool low_dim,
                              const ProgressFn& progress = {});
SuiteResult run_early_stopping(const ExperimentConfig& cfg, const ProgressFn& progress = {});
SuiteResult run_robustness(const ExperimentConfig& cfg, const ProgressFn& progress = {});

/// Dispatches on cfg.suite.
SuiteResult run_suite(const ExperimentConfig& cfg, const ProgressFn& progress = {});

}  // namespace noisyhead
