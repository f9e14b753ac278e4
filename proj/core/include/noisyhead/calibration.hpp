// Closed-form hyperparameter calibration and iteration schedules.
//
// All logarithms are natural. The clipping bound and the three projection
// radii come from the high-probability calibration
//   nu = 1 + tau^2,
//   C  = sqrt(2 nu log(N L / kappa)),
//   G  = (C / sqrt(L)) * (1 + sqrt(log(N / kappa)) / D),
//   G0 = (C / sqrt(L)) * (1 + sqrt(log(1 / kappa)) / D),
//   R  = r_const * C^2 / lambda * sqrt(N / L) * (1 + sqrt(log(1 / kappa)) / D),
// with log(1/kappa) (and log(N/kappa)) floored at zero so kappa = 1 is a
// valid setting. CorrectionForm::fourth_root swaps the correction factor
// (1 + sqrt(log x) / D) for (1 + (log x / D^2)^(1/4)), the variant used by
// the concentration argument behind the calibration.

#pragma once

#include <optional>

#include "noisyhead/prompt.hpp"

namespace noisyhead {

struct HyperParams {
  double response_variance = 1;   // nu = 1 + tau^2
  double clip_bound = 0;          // C
  double feature_radius = 0;      // G
  double test_feature_radius = 0; // G0
  double param_radius = 0;        // R
  double confidence = 1;          // kappa
  double ridge_penalty = 1;       // lambda
  double step_size = 0;           // eta0
  int iterations = 0;             // T
  double noise_scale = 0;         // sigma
};

enum class CorrectionForm { square_root, fourth_root };

/// Fills the calibrated fields (nu, C, G, G0, R) plus kappa and lambda;
/// step size, iteration count and noise scale are left for the caller.
/// Requires N*L > kappa.
HyperParams calibrate(int batch_size, int context_len, int dim, double tau2, double kappa,
                      double lambda, double r_const = 1.0,
                      CorrectionForm form = CorrectionForm::square_root);

/// Low-dimensional schedule: ceil(log(N^2 L D^3) / log(1/(1 - eta0 lambda))).
int iterations_low_dim(int batch_size, int context_len, int dim, double step_size, double lambda);

/// Contraction-target schedule: ceil(log r / log(1/(1 - eta0 lambda))).
/// With r of order N this is the early-stopping rule T ~ log N.
int iterations_from_r(double r, double step_size, double lambda);

enum class Regime { low_dim, high_dim, early_stop, robustness };

/// The experiment suites' step-size formulas, evaluated verbatim:
///   low_dim:    3.17 / (5 + G^2)^2
///   high_dim:   0.07 N D / (N + D G^2)^2
///   early_stop: 0.007 lambda / (lambda + G^2)^2
///   robustness: 0.007 / (0.01 + G^2)^2
double experiment_step_size(Regime regime, int batch_size, int dim, double lambda,
                            double feature_radius);

/// Theorem-style admissible step-size interval (lambda/(c (2 lambda+G^2)^2),
/// lambda/((2 lambda+G^2)^2)); returns its upper end. Used for diagnostics
/// only: the suite formulas above are applied verbatim even when outside.
double step_size_upper_bound(double lambda, double feature_radius);

}  // namespace noisyhead
