#include "noisyhead/mechanisms.hpp"

#include <cmath>
#include <stdexcept>

namespace noisyhead {

void validate(const PrivacyBudget& budget) {
  if (!(budget.epsilon > 0)) throw std::invalid_argument("epsilon must be > 0");
  if (!(budget.delta > 0) || !(budget.delta < 1)) throw std::invalid_argument("delta must lie in (0, 1)");
}

double clip_scalar(double x, double bound) {
  if (bound < 0) throw std::invalid_argument("clip bound must be >= 0");
  return std::min(std::max(x, -bound), bound);
}

Eigen::MatrixXd project_frobenius(const Eigen::MatrixXd& x, double radius) {
  if (radius < 0) throw std::invalid_argument("projection radius must be >= 0");
  const double n = x.norm();
  if (n <= radius) return x;
  if (n == 0.0) return Eigen::MatrixXd::Zero(x.rows(), x.cols());
  return x * (radius / n);
}

ContextFeature clipped_feature(const Prompt& prompt, double clip_bound, double feature_radius) {
  validate(prompt);
  const auto l = prompt.context_len();
  Eigen::VectorXd clipped = prompt.responses.head(l);
  for (Eigen::Index i = 0; i < l; ++i) clipped[i] = clip_scalar(clipped[i], clip_bound);
  const Eigen::VectorXd weighted_sum = prompt.features.leftCols(l) * clipped / static_cast<double>(l);
  Eigen::MatrixXd raw = prompt.query_feature() * weighted_sum.transpose();
  return ContextFeature{project_frobenius(raw, feature_radius)};
}

NoiseLaw noise_std(double step_size, int iterations, double noise_scale,
                   const PrivacyBudget& budget, int batch_size) {
  if (!(step_size > 0)) throw std::invalid_argument("step size must be > 0");
  if (iterations < 1) throw std::invalid_argument("iteration count must be >= 1");
  if (noise_scale < 0) throw std::invalid_argument("noise scale must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  validate(budget);
  const double log_arg = 1.25 * iterations / budget.delta;
  if (!(log_arg > 1)) throw std::invalid_argument("1.25 T / delta must exceed 1");
  const double std = step_size * (iterations * noise_scale / (budget.epsilon * batch_size)) *
                     std::sqrt(2.0 * std::log(log_arg));
  return NoiseLaw{std};
}

Eigen::MatrixXd sample_noise(RngStream& rng, int dim, const NoiseLaw& law) {
  if (dim < 1) throw std::invalid_argument("noise dimension must be >= 1");
  if (law.per_coordinate_std < 0) throw std::invalid_argument("noise std must be >= 0");
  Eigen::MatrixXd z(dim, dim);
  for (Eigen::Index j = 0; j < dim; ++j) {
    for (Eigen::Index i = 0; i < dim; ++i) z(i, j) = law.per_coordinate_std * rng.normal();
  }
  return z;
}

double min_noise_scale(double feature_radius, double clip_bound, double param_radius) {
  if (feature_radius < 0 || clip_bound < 0 || param_radius < 0) {
    throw std::invalid_argument("radii must be >= 0");
  }
  return 2.0 * feature_radius * (clip_bound + param_radius * feature_radius);
}

double sensitivity_bound(double step_size, int batch_size, double param_radius,
                         double feature_radius, double clip_bound) {
  if (!(step_size > 0)) throw std::invalid_argument("step size must be > 0");
  if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  if (param_radius < 0 || feature_radius < 0 || clip_bound < 0) {
    throw std::invalid_argument("radii must be >= 0");
  }
  return 2.0 * step_size *
         (param_radius * feature_radius * feature_radius + clip_bound * feature_radius) /
         batch_size;
}

}  // namespace noisyhead
