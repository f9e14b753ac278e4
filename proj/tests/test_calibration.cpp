#include <doctest.h>

#include <cmath>

#include "noisyhead/calibration.hpp"
#include "noisyhead/rng.hpp"

using namespace noisyhead;

TEST_CASE("calibration at the paper's low-dimensional setting") {
  const HyperParams hp = calibrate(1000, 31, 5, 0.0, 1.0, 5.0);
  CHECK(hp.response_variance == 1.0);
  CHECK(hp.clip_bound == doctest::Approx(std::sqrt(2.0 * std::log(31000.0))).epsilon(1e-14));
  CHECK(hp.clip_bound == doctest::Approx(4.5480).epsilon(1e-4));
  CHECK(hp.test_feature_radius == doctest::Approx(0.8169).epsilon(1e-4));
  // kappa = 1 kills the log(1/kappa) corrections
  CHECK(hp.test_feature_radius ==
        doctest::Approx(hp.clip_bound / std::sqrt(31.0)).epsilon(1e-14));
  CHECK(hp.param_radius ==
        doctest::Approx(hp.clip_bound * hp.clip_bound / 5.0 * std::sqrt(1000.0 / 31.0))
            .epsilon(1e-14));
}

TEST_CASE("calibration rejects out-of-domain inputs") {
  CHECK_THROWS_AS(calibrate(1, 1, 1, 0.0, 2.0, 1.0), std::invalid_argument);  // NL <= kappa
  CHECK_THROWS_AS(calibrate(10, 5, 2, -0.1, 1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(calibrate(10, 5, 2, 0.0, 0.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(calibrate(10, 5, 2, 0.0, 1.0, 0.0), std::invalid_argument);
}

TEST_CASE("clip bound grows with N; feature radii shrink with L") {
  double prev_c = 0;
  for (int n : {100, 400, 1600, 6400}) {
    const double c = calibrate(n, 20, 4, 0.3, 0.5, 1.0).clip_bound;
    CHECK(c >= prev_c);
    prev_c = c;
  }
  double prev_g = 1e300, prev_g0 = 1e300;
  for (int l : {4, 16, 64, 256}) {
    const HyperParams hp = calibrate(2000, l, 4, 0.3, 0.5, 1.0);
    CHECK(hp.feature_radius <= prev_g);
    CHECK(hp.test_feature_radius <= prev_g0);
    prev_g = hp.feature_radius;
    prev_g0 = hp.test_feature_radius;
  }
}

TEST_CASE("G0 never exceeds G for kappa below one") {
  RngStream rng(40, stream_id(61));
  for (int rep = 0; rep < 30; ++rep) {
    const int n = 10 + static_cast<int>(rng.uniform_below(5000));
    const int l = 1 + static_cast<int>(rng.uniform_below(100));
    const int d = 1 + static_cast<int>(rng.uniform_below(40));
    const double kappa = 0.01 + 0.98 * rng.uniform01();
    const HyperParams hp = calibrate(n, l, d, rng.uniform01(), kappa, 0.5 + rng.uniform01());
    CHECK(hp.test_feature_radius <= hp.feature_radius * (1 + 1e-12));
  }
}

TEST_CASE("proof-form correction uses the fourth root") {
  const int n = 500, l = 22, d = 7;
  const double kappa = 0.05;
  const HyperParams hp = calibrate(n, l, d, 0.0, kappa, 1.0, 1.0, CorrectionForm::fourth_root);
  const double base = hp.clip_bound / std::sqrt(static_cast<double>(l));
  const double expected = base * (1.0 + std::pow(std::log(n / kappa) / (d * d), 0.25));
  CHECK(hp.feature_radius == doctest::Approx(expected).epsilon(1e-13));
}

TEST_CASE("low-dimensional iteration schedule") {
  CHECK(iterations_low_dim(10, 3, 1, 0.5, 1.0) == 9);  // ceil(ln 300 / ln 2)
  // numerator grows with N
  CHECK(iterations_low_dim(20, 3, 1, 0.5, 1.0) > iterations_low_dim(10, 3, 1, 0.5, 1.0));
  // a faster contraction shrinks T
  CHECK(iterations_low_dim(10, 3, 1, 0.9, 1.0) < iterations_low_dim(10, 3, 1, 0.5, 1.0));
  CHECK_THROWS_AS(iterations_low_dim(10, 3, 1, 1.5, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(iterations_low_dim(10, 3, 1, 0.0, 1.0), std::invalid_argument);
}

TEST_CASE("contraction-target schedule") {
  CHECK(iterations_from_r(1.0 / (1.0 - 0.25), 0.25, 1.0) == 1);
  CHECK(iterations_from_r(std::exp(1.0), 1.0 - std::exp(-1.0), 1.0) == 1);
  CHECK(iterations_from_r(1000.0, 0.2, 0.5) == 66);  // ceil(ln 1000 / ln(1/0.9))
  CHECK_THROWS_AS(iterations_from_r(1.0, 0.2, 0.5), std::invalid_argument);
}

TEST_CASE("schedules reach the prescribed contraction within one step") {
  RngStream rng(41, stream_id(62));
  for (int rep = 0; rep < 30; ++rep) {
    const int n = 2 + static_cast<int>(rng.uniform_below(3000));
    const int l = 1 + static_cast<int>(rng.uniform_below(60));
    const int d = 1 + static_cast<int>(rng.uniform_below(30));
    const double rate = 0.01 + 0.9 * rng.uniform01();
    const int t = iterations_low_dim(n, l, d, rate, 1.0);
    const double target = 1.0 / (static_cast<double>(n) * n * l * d * d * d);
    CHECK(std::pow(1.0 - rate, t) <= target * (1 + 1e-9));
    if (t > 1) CHECK(std::pow(1.0 - rate, t - 1) >= target * (1 - 1e-9));
  }
}

TEST_CASE("experiment step sizes evaluate the four formulas verbatim") {
  CHECK(experiment_step_size(Regime::low_dim, 1000, 5, 5.0, 0.0) == doctest::Approx(0.1268));
  CHECK(experiment_step_size(Regime::high_dim, 900, 30, 30.0, 1.0) ==
        doctest::Approx(0.07 * 27000.0 / (930.0 * 930.0)).epsilon(1e-14));
  CHECK(experiment_step_size(Regime::high_dim, 900, 30, 30.0, 1.0) ==
        doctest::Approx(0.002185).epsilon(1e-3));
  CHECK(experiment_step_size(Regime::robustness, 5000, 5, 0.01, 0.0) == doctest::Approx(70.0));
  const double lambda = 32.0, g = 0.9;
  CHECK(experiment_step_size(Regime::early_stop, 1000, 31, lambda, g) ==
        doctest::Approx(0.007 * lambda / std::pow(lambda + g * g, 2)).epsilon(1e-14));
}

TEST_CASE("step size upper bound") {
  CHECK(step_size_upper_bound(1.0, 0.0) == doctest::Approx(0.25));
  CHECK(step_size_upper_bound(2.0, 1.0) == doctest::Approx(2.0 / 25.0));
}
