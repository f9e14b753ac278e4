#include "noisyhead/trainers.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Cholesky>

namespace noisyhead {

namespace {

// Stacked vec(Z~_k) rows with clipped labels and the cached normal-equation
// pieces the descent loop needs: gram = M^T M and moment = M^T y.
struct Design {
  Eigen::Index dim = 0;
  Eigen::Index batch_size = 0;
  Eigen::MatrixXd gram;    // D^2 x D^2, lower triangle valid
  Eigen::VectorXd moment;  // D^2
  long clipped_responses = 0;
  long feature_projections = 0;
};

Eigen::Map<const Eigen::VectorXd> as_vec(const Eigen::MatrixXd& m) {
  return {m.data(), m.size()};
}

Design build_design(const std::vector<Prompt>& batch, bool truncate, double clip_bound,
                    double feature_radius) {
  if (batch.empty()) throw std::invalid_argument("trainer needs a non-empty batch");
  const Eigen::Index d = batch.front().dim();
  const Eigen::Index p = d * d;
  const Eigen::Index n = static_cast<Eigen::Index>(batch.size());

  Design design;
  design.dim = d;
  design.batch_size = n;

  Eigen::MatrixXd m(n, p);
  Eigen::VectorXd labels(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Prompt& prompt = batch[static_cast<std::size_t>(k)];
    if (prompt.dim() != d) throw std::invalid_argument("mixed prompt dimensions in batch");
    double label = prompt.query_response();
    if (truncate) {
      const Eigen::Index l = prompt.context_len();
      Eigen::VectorXd clipped = prompt.responses.head(l);
      for (Eigen::Index i = 0; i < l; ++i) {
        if (std::abs(clipped[i]) > clip_bound) {
          clipped[i] = clip_scalar(clipped[i], clip_bound);
          ++design.clipped_responses;
        }
      }
      const Eigen::VectorXd weighted_sum =
          prompt.features.leftCols(l) * clipped / static_cast<double>(l);
      Eigen::MatrixXd z = prompt.query_feature() * weighted_sum.transpose();
      const double norm = z.norm();
      if (norm > feature_radius) {
        z *= feature_radius / norm;
        ++design.feature_projections;
      }
      if (std::abs(label) > clip_bound) {
        label = clip_scalar(label, clip_bound);
        ++design.clipped_responses;
      }
      m.row(k) = as_vec(z);
    } else {
      m.row(k) = as_vec(build_context_feature(prompt).matrix);
    }
    labels[k] = label;
  }

  design.gram = Eigen::MatrixXd::Zero(p, p);
  design.gram.selfadjointView<Eigen::Lower>().rankUpdate(m.transpose());
  design.moment = m.transpose() * labels;
  return design;
}

void validate_train_config(const TrainConfig& cfg) {
  if (cfg.hyper.iterations < 1) throw std::invalid_argument("iteration count must be >= 1");
  if (cfg.hyper.step_size < 0) throw std::invalid_argument("step size must be >= 0");
  if (!(cfg.hyper.ridge_penalty > 0)) throw std::invalid_argument("lambda must be > 0");
  if (cfg.hyper.noise_scale < 0) throw std::invalid_argument("noise scale must be >= 0");
  if (cfg.truncate && (cfg.hyper.clip_bound < 0 || cfg.hyper.feature_radius < 0 ||
                       cfg.hyper.param_radius < 0)) {
    throw std::invalid_argument("truncation radii must be >= 0");
  }
}

FitResult run_descent(const std::vector<Prompt>& batch, const TrainConfig& cfg, RngStream* rng) {
  validate_train_config(cfg);
  const HyperParams& hp = cfg.hyper;
  const Design design = build_design(batch, cfg.truncate, hp.clip_bound, hp.feature_radius);
  const Eigen::Index d = design.dim;
  const Eigen::Index p = d * d;
  const double n = static_cast<double>(design.batch_size);

  validate(cfg.budget);
  double noise_sd = 0.0;
  if (rng && hp.noise_scale > 0 && hp.step_size > 0) {
    noise_sd = noise_std(hp.step_size, hp.iterations, hp.noise_scale, cfg.budget,
                         static_cast<int>(design.batch_size))
                   .per_coordinate_std;
  }

  FitResult result;
  result.diagnostics.clipped_responses = design.clipped_responses;
  result.diagnostics.feature_projections = design.feature_projections;
  if (cfg.truncate) {
    result.diagnostics.noise_scale_below_privacy_floor =
        hp.noise_scale < min_noise_scale(hp.feature_radius, hp.clip_bound, hp.param_radius);
  }

  Eigen::VectorXd iterate = Eigen::VectorXd::Zero(p);
  if (cfg.initial) {
    if (cfg.initial->gamma.rows() != d || cfg.initial->gamma.cols() != d) {
      throw std::invalid_argument("initial parameter dimension mismatch");
    }
    iterate = as_vec(cfg.initial->gamma);
    if (cfg.truncate) {
      const double norm = iterate.norm();
      if (norm > hp.param_radius) iterate *= hp.param_radius / norm;
    }
  }

  const double shrink = 1.0 - 2.0 * hp.ridge_penalty * hp.step_size;
  const double data_coeff = (cfg.exact_gradient ? 2.0 : 1.0) * hp.step_size / n;
  if (cfg.record_trajectory) result.trajectory.reserve(static_cast<std::size_t>(hp.iterations));

  Eigen::VectorXd gradient(p);
  for (int t = 0; t < hp.iterations; ++t) {
    gradient.noalias() = design.gram.selfadjointView<Eigen::Lower>() * iterate;
    gradient -= design.moment;
    iterate = shrink * iterate - data_coeff * gradient;
    if (noise_sd > 0) {
      for (Eigen::Index i = 0; i < p; ++i) iterate[i] += noise_sd * rng->normal();
    }
    if (cfg.truncate) {
      const double norm = iterate.norm();
      if (norm > hp.param_radius) {
        iterate *= hp.param_radius / norm;
        ++result.diagnostics.param_projections;
      }
    }
    if (cfg.record_trajectory) {
      result.trajectory.push_back(
          AttentionParams{Eigen::Map<const Eigen::MatrixXd>(iterate.data(), d, d)});
    }
  }

  result.gamma.gamma = Eigen::Map<const Eigen::MatrixXd>(iterate.data(), d, d);
  return result;
}

}  // namespace

FitResult ridge_fit(const std::vector<Prompt>& batch, double lambda) {
  if (!(lambda > 0)) throw std::invalid_argument("ridge penalty must be > 0");
  const Design design = build_design(batch, /*truncate=*/false, 0, 0);
  Eigen::MatrixXd system = design.gram;
  system.diagonal().array() += lambda * static_cast<double>(design.batch_size);
  const Eigen::LLT<Eigen::MatrixXd, Eigen::Lower> llt(system);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("ridge normal equations are not positive definite");
  }
  const Eigen::VectorXd solution = llt.solve(design.moment);
  FitResult result;
  result.gamma.gamma = Eigen::Map<const Eigen::MatrixXd>(solution.data(), design.dim, design.dim);
  return result;
}

FitResult noisyhead_fit(const std::vector<Prompt>& batch, const TrainConfig& cfg, RngStream& rng) {
  return run_descent(batch, cfg, &rng);
}

FitResult gd_fit(const std::vector<Prompt>& batch, const TrainConfig& cfg) {
  return run_descent(batch, cfg, nullptr);
}

AttentionParams descent_step(const std::vector<Prompt>& batch, const AttentionParams& gamma,
                             const TrainConfig& cfg) {
  TrainConfig one_step = cfg;
  one_step.hyper.iterations = 1;
  one_step.initial = gamma;
  return gd_fit(batch, one_step).gamma;
}

}  // namespace noisyhead
