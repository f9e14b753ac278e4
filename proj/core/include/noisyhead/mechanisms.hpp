// Privacy primitives: response clipping, Frobenius-ball projection, the
// clipped/projected context feature, the per-iteration Gaussian noise law,
// the minimum noise scale for (epsilon, delta)-privacy, and the per-step
// l2-sensitivity bound of the gradient update.

#pragma once

#include "noisyhead/prompt.hpp"
#include "noisyhead/rng.hpp"

namespace noisyhead {

struct PrivacyBudget {
  double epsilon = 1.0;
  double delta = 1e-5;
};

/// Throws std::invalid_argument unless epsilon > 0 and 0 < delta < 1.
void validate(const PrivacyBudget& budget);

// Per-coordinate standard deviation of the noise matrix injected at each
// iteration. The vec'd noise is N(0, std^2 I) over the D^2 coordinates.
struct NoiseLaw {
  double per_coordinate_std = 0;
};

/// min(max(x, -bound), bound).
double clip_scalar(double x, double bound);

/// Radial projection onto the Frobenius ball of the given radius.
Eigen::MatrixXd project_frobenius(const Eigen::MatrixXd& x, double radius);

/// Context feature with responses clipped to [-clip_bound, clip_bound]
/// before summation, then projected onto the radius-`feature_radius` ball.
ContextFeature clipped_feature(const Prompt& prompt, double clip_bound, double feature_radius);

/// Noise law of one iteration:
///   std = eta0 * (T * sigma / (epsilon * N)) * sqrt(2 * log(1.25 T / delta)).
NoiseLaw noise_std(double step_size, int iterations, double noise_scale,
                   const PrivacyBudget& budget, int batch_size);

/// dim x dim matrix with i.i.d. N(0, std^2) entries.
Eigen::MatrixXd sample_noise(RngStream& rng, int dim, const NoiseLaw& law);

/// Smallest noise scale guaranteeing privacy: 2 G (C + R G).
double min_noise_scale(double feature_radius, double clip_bound, double param_radius);

/// Per-step l2-sensitivity bound of the un-noised update:
///   2 eta0 (R G^2 + C G) / N.
/// Equals step_size * min_noise_scale / batch_size.
double sensitivity_bound(double step_size, int batch_size, double param_radius,
                         double feature_radius, double clip_bound);

}  // namespace noisyhead
