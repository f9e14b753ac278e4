#include <doctest.h>

#include <cmath>
#include <map>

#include "noisyhead/experiments.hpp"

using namespace noisyhead;

namespace {

ExperimentConfig tiny_sweep() {
  ExperimentConfig cfg = default_config(Suite::privacy_sweep_low);
  cfg.batch_sizes = {50, 80};
  cfg.epsilons = {0.5, 1.0};
  cfg.dim = 2;
  cfg.context_len = 6;
  cfg.trials = 3;
  cfg.n_test = 10;
  cfg.master_seed = 424242;
  return cfg;
}

bool tables_equal(const SummaryTable& a, const SummaryTable& b) {
  if (a.grid_columns != b.grid_columns || a.metric_names != b.metric_names ||
      a.rows.size() != b.rows.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    if (a.rows[i].grid_values != b.rows[i].grid_values || a.rows[i].means != b.rows[i].means ||
        a.rows[i].ses != b.rows[i].ses || a.rows[i].trials != b.rows[i].trials) {
      return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("monte_carlo aggregates a constant function with zero SE") {
  const TrialFn fn = [](std::size_t, int) {
    return std::vector<std::pair<std::string, double>>{{"m", 3.25}};
  };
  const auto mc = monte_carlo(2, 4, 1, fn);
  REQUIRE(mc.records.size() == 8);
  std::vector<GridPointInfo> resolved(2);
  resolved[0].grid_values = {0.0};
  resolved[1].grid_values = {1.0};
  const SummaryTable table = summarize({"g"}, resolved, {"m"}, mc.records, mc.point_errors, 4);
  REQUIRE(table.rows.size() == 2);
  for (const auto& row : table.rows) {
    CHECK(row.means[0] == 3.25);
    CHECK(row.ses[0] == 0.0);
    CHECK(row.trials == 4);
  }
}

TEST_CASE("monte_carlo reports a zero SE for a single trial") {
  const TrialFn fn = [](std::size_t, int) {
    return std::vector<std::pair<std::string, double>>{{"m", 1.0}};
  };
  const auto mc = monte_carlo(1, 1, 1, fn);
  std::vector<GridPointInfo> resolved(1);
  resolved[0].grid_values = {0.0};
  const SummaryTable table = summarize({"g"}, resolved, {"m"}, mc.records, mc.point_errors, 1);
  CHECK(table.rows[0].ses[0] == 0.0);
}

TEST_CASE("monte_carlo output is independent of the worker count") {
  const TrialFn fn = [](std::size_t g, int b) {
    return std::vector<std::pair<std::string, double>>{
        {"m", std::sin(static_cast<double>(g * 31 + b))}};
  };
  const auto one = monte_carlo(3, 5, 1, fn);
  const auto four = monte_carlo(3, 5, 4, fn);
  REQUIRE(one.records.size() == four.records.size());
  for (std::size_t i = 0; i < one.records.size(); ++i) {
    CHECK(one.records[i].grid_index == four.records[i].grid_index);
    CHECK(one.records[i].trial_id == four.records[i].trial_id);
    CHECK(one.records[i].metrics == four.records[i].metrics);
  }
}

TEST_CASE("a failing trial aborts only its grid point") {
  const TrialFn fn = [](std::size_t g, int b) {
    if (g == 1 && b == 2) throw std::runtime_error("boom");
    return std::vector<std::pair<std::string, double>>{{"m", 1.0}};
  };
  const auto mc = monte_carlo(3, 4, 2, fn);
  CHECK(mc.point_errors[0].empty());
  CHECK(mc.point_errors[1].find("boom") != std::string::npos);
  CHECK(mc.point_errors[2].empty());
  CHECK(mc.records.size() == 8);  // points 0 and 2 only
  for (const auto& r : mc.records) CHECK(r.grid_index != 1);
}

TEST_CASE("non-finite metrics are treated as trial failures") {
  const TrialFn fn = [](std::size_t g, int) {
    return std::vector<std::pair<std::string, double>>{
        {"m", g == 0 ? std::numeric_limits<double>::quiet_NaN() : 1.0}};
  };
  const auto mc = monte_carlo(2, 2, 1, fn);
  CHECK(!mc.point_errors[0].empty());
  CHECK(mc.point_errors[1].empty());
}

TEST_CASE("suite runs are reproducible and thread-count invariant") {
  ExperimentConfig cfg = tiny_sweep();
  cfg.threads = 1;
  const SuiteResult a = run_suite(cfg);
  const SuiteResult b = run_suite(cfg);
  cfg.threads = 3;
  const SuiteResult c = run_suite(cfg);
  CHECK(tables_equal(a.table, b.table));
  CHECK(tables_equal(a.table, c.table));
  REQUIRE(a.table.rows.size() == 4);
  for (const auto& row : a.table.rows) CHECK(row.means[0] >= 0.0);
}

TEST_CASE("summary means equal the arithmetic mean of the records") {
  const SuiteResult res = run_suite(tiny_sweep());
  std::map<std::size_t, std::pair<double, int>> acc;
  for (const auto& record : res.records) {
    acc[record.grid_index].first += record.metrics[0].second;
    acc[record.grid_index].second += 1;
  }
  REQUIRE(res.table.rows.size() == acc.size());
  std::size_t row_index = 0;
  for (const auto& [g, sum_count] : acc) {
    const double mean = sum_count.first / sum_count.second;
    CHECK(res.table.rows[row_index].means[0] ==
          doctest::Approx(mean).epsilon(1e-12));
    ++row_index;
  }
}

TEST_CASE("low-dimensional sweep resolves the paper defaults") {
  ExperimentConfig cfg = default_config(Suite::privacy_sweep_low);
  cfg.batch_sizes = {1000};
  cfg.epsilons = {0.2};
  const auto resolved = resolve_grid(cfg);
  REQUIRE(resolved.size() == 1);
  const GridPointInfo& p = resolved[0];
  CHECK(p.sampler.dim == 5);
  CHECK(p.sampler.context_len == 31);
  CHECK(p.hyper.ridge_penalty == 5.0);
  CHECK(p.hyper.clip_bound == doctest::Approx(4.5479).epsilon(1e-4));
  CHECK(p.hyper.step_size ==
        doctest::Approx(3.17 / std::pow(5.0 + std::pow(p.hyper.feature_radius, 2), 2)));
  CHECK(p.hyper.iterations ==
        iterations_from_r(std::pow(1000.0, 2.5), p.hyper.step_size, 5.0));
  CHECK(p.hyper.noise_scale ==
        doctest::Approx(min_noise_scale(p.hyper.feature_radius, p.hyper.clip_bound,
                                        p.hyper.param_radius)));
  CHECK(p.budget.epsilon == 0.2);
  CHECK(p.budget.delta == 1e-5);
}

TEST_CASE("early stopping with zero noise collapses the two costs") {
  ExperimentConfig cfg = default_config(Suite::early_stopping);
  cfg.batch_sizes = {50};
  cfg.dim = 3;
  cfg.context_len = 4;
  cfg.iteration_grid = {1, 5};
  cfg.trials = 2;
  cfg.n_test = 8;
  cfg.master_seed = 7;
  cfg.overrides.noise_scale = 0.0;
  const SuiteResult res = run_early_stopping(cfg);
  REQUIRE(res.records.size() == 4);
  for (const auto& record : res.records) {
    REQUIRE(record.metrics.size() == 2);
    CHECK(record.metrics[0].first == "cost_descent");
    CHECK(record.metrics[1].first == "cost_privacy");
    CHECK(record.metrics[0].second == record.metrics[1].second);  // exact equality
  }
}

TEST_CASE("early stopping resolves lambda = N/D and the B-rule step size") {
  ExperimentConfig cfg = default_config(Suite::early_stopping);
  cfg.iteration_grid = {10};
  const auto resolved = resolve_grid(cfg);
  REQUIRE(resolved.size() == 1);
  const GridPointInfo& p = resolved[0];
  CHECK(p.sampler.dim == 31);
  CHECK(p.sampler.context_len == 31);
  CHECK(p.hyper.ridge_penalty == doctest::Approx(1000.0 / 31.0));
  const double g2 = p.hyper.feature_radius * p.hyper.feature_radius;
  CHECK(p.hyper.step_size ==
        doctest::Approx(0.007 * p.hyper.ridge_penalty /
                        std::pow(p.hyper.ridge_penalty + g2, 2)));
  CHECK(p.hyper.iterations == 10);
  CHECK(p.budget.epsilon == 0.8);
}

TEST_CASE("an identity perturbation makes both robustness risks exactly zero") {
  ExperimentConfig cfg = default_config(Suite::robustness);
  cfg.batch_sizes = {40};
  cfg.dim = 2;
  cfg.context_len = 5;
  cfg.poison_scales = {0.0};
  cfg.poison_exponents = {2.0};
  cfg.feature_shift = 0.0;
  cfg.trials = 2;
  cfg.n_test = 6;
  cfg.master_seed = 11;
  const SuiteResult res = run_robustness(cfg);
  REQUIRE(res.records.size() == 2);
  for (const auto& record : res.records) {
    CHECK(record.metrics[0].first == "risk_dp");
    CHECK(record.metrics[0].second == 0.0);  // paired noise streams cancel exactly
    CHECK(record.metrics[1].first == "risk_ridge");
    CHECK(record.metrics[1].second == 0.0);
  }
}

TEST_CASE("robustness resolves alpha = c * N^p and the fixed defaults") {
  ExperimentConfig cfg = default_config(Suite::robustness);
  cfg.batch_sizes = {1000};
  cfg.context_len = 100;
  cfg.poison_scales = {2.0};
  cfg.poison_exponents = {2.0, 2.1};
  const auto resolved = resolve_grid(cfg);
  REQUIRE(resolved.size() == 2);
  CHECK(resolved[0].response_shift == doctest::Approx(2.0e6));
  CHECK(resolved[1].response_shift == doctest::Approx(2.0 * std::pow(1000.0, 2.1)));
  CHECK(resolved[0].feature_shift == 1.0);
  CHECK(resolved[0].hyper.ridge_penalty == 0.01);
  CHECK(resolved[0].hyper.iterations == 7);  // ceil(ln 1000)
  CHECK(resolved[0].budget.epsilon == 0.5);
  CHECK(resolved[0].budget.delta == 1e-2);
}

TEST_CASE("sweep defaults match the documented grids") {
  const ExperimentConfig low = default_config(Suite::privacy_sweep_low);
  CHECK(low.batch_sizes == std::vector<int>{1000, 1500, 2000, 2500, 3000, 3500, 4000});
  CHECK(low.epsilons == std::vector<double>{0.2, 0.4, 0.6, 0.8, 1.0});
  const ExperimentConfig early = default_config(Suite::early_stopping);
  REQUIRE(early.iteration_grid.size() == 25);
  CHECK(early.iteration_grid.front() == 1);
  CHECK(early.iteration_grid[1] == 20);
  CHECK(early.iteration_grid.back() == 480);
  const ExperimentConfig rob = default_config(Suite::robustness);
  CHECK(rob.poison_exponents == std::vector<double>{2.0, 2.02, 2.04, 2.06, 2.08, 2.1});
}

TEST_CASE("suite names round-trip") {
  for (Suite s : {Suite::privacy_sweep_low, Suite::privacy_sweep_high, Suite::early_stopping,
                  Suite::robustness}) {
    CHECK(suite_from_name(suite_name(s)) == s);
  }
  CHECK(!suite_from_name("nonsense").has_value());
}
