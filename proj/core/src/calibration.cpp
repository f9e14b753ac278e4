#include "noisyhead/calibration.hpp"

#include <cmath>
#include <stdexcept>

namespace noisyhead {

namespace {

double correction(double log_term, int dim, CorrectionForm form) {
  const double clamped = std::max(log_term, 0.0);
  switch (form) {
    case CorrectionForm::square_root:
      return 1.0 + std::sqrt(clamped) / dim;
    case CorrectionForm::fourth_root:
      return 1.0 + std::pow(clamped / (static_cast<double>(dim) * dim), 0.25);
  }
  throw std::invalid_argument("unknown correction form");
}

// ceil with a relative guard so ratios that are integers up to float error
// (e.g. log r exactly matching the contraction log) do not round up.
int guarded_ceil(double x) {
  return static_cast<int>(std::ceil(x - 1e-9 * std::max(1.0, std::abs(x))));
}

double contraction_log(double step_size, double lambda) {
  const double rate = step_size * lambda;
  if (!(rate > 0) || !(rate < 1)) {
    throw std::invalid_argument("eta0 * lambda must lie in (0, 1)");
  }
  return std::log(1.0 / (1.0 - rate));
}

}  // namespace

HyperParams calibrate(int batch_size, int context_len, int dim, double tau2, double kappa,
                      double lambda, double r_const, CorrectionForm form) {
  if (batch_size < 1 || context_len < 1 || dim < 1) {
    throw std::invalid_argument("calibrate needs N, L, D >= 1");
  }
  if (tau2 < 0) throw std::invalid_argument("tau^2 must be >= 0");
  if (!(kappa > 0)) throw std::invalid_argument("kappa must be > 0");
  if (!(lambda > 0)) throw std::invalid_argument("lambda must be > 0");
  if (!(r_const > 0)) throw std::invalid_argument("r_const must be > 0");
  const double nl_log = std::log(static_cast<double>(batch_size) * context_len / kappa);
  if (!(nl_log > 0)) throw std::invalid_argument("N*L must exceed kappa");

  HyperParams hp;
  hp.response_variance = 1.0 + tau2;
  hp.confidence = kappa;
  hp.ridge_penalty = lambda;
  hp.clip_bound = std::sqrt(2.0 * hp.response_variance * nl_log);

  const double base = hp.clip_bound / std::sqrt(static_cast<double>(context_len));
  const double n_log = std::log(static_cast<double>(batch_size) / kappa);
  const double inv_log = std::log(1.0 / kappa);
  hp.feature_radius = base * correction(n_log, dim, form);
  hp.test_feature_radius = base * correction(inv_log, dim, form);
  hp.param_radius = r_const / lambda * hp.clip_bound * hp.clip_bound *
                    std::sqrt(static_cast<double>(batch_size) / context_len) *
                    correction(inv_log, dim, form);
  return hp;
}

int iterations_low_dim(int batch_size, int context_len, int dim, double step_size, double lambda) {
  if (batch_size < 1 || context_len < 1 || dim < 1) {
    throw std::invalid_argument("schedule needs N, L, D >= 1");
  }
  const double numerator = 2.0 * std::log(static_cast<double>(batch_size)) +
                           std::log(static_cast<double>(context_len)) +
                           3.0 * std::log(static_cast<double>(dim));
  const int t = guarded_ceil(numerator / contraction_log(step_size, lambda));
  return std::max(t, 1);
}

int iterations_from_r(double r, double step_size, double lambda) {
  if (!(r > 1)) throw std::invalid_argument("contraction target r must exceed 1");
  const int t = guarded_ceil(std::log(r) / contraction_log(step_size, lambda));
  return std::max(t, 1);
}

double experiment_step_size(Regime regime, int batch_size, int dim, double lambda,
                            double feature_radius) {
  if (batch_size < 1 || dim < 1) throw std::invalid_argument("step size needs N, D >= 1");
  if (feature_radius < 0) throw std::invalid_argument("feature radius must be >= 0");
  const double g2 = feature_radius * feature_radius;
  switch (regime) {
    case Regime::low_dim:
      return 3.17 / ((5.0 + g2) * (5.0 + g2));
    case Regime::high_dim: {
      const double n = batch_size;
      const double denom = n + dim * g2;
      return 0.07 * n * dim / (denom * denom);
    }
    case Regime::early_stop:
      if (!(lambda > 0)) throw std::invalid_argument("lambda must be > 0");
      return 0.007 * lambda / ((lambda + g2) * (lambda + g2));
    case Regime::robustness:
      return 0.007 / ((0.01 + g2) * (0.01 + g2));
  }
  throw std::invalid_argument("unknown step-size regime");
}

double step_size_upper_bound(double lambda, double feature_radius) {
  if (!(lambda > 0)) throw std::invalid_argument("lambda must be > 0");
  const double s = 2.0 * lambda + feature_radius * feature_radius;
  return lambda / (s * s);
}

}  // namespace noisyhead
