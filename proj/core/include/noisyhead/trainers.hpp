// The three pretraining procedures for the bilinear attention head:
//
//  * ridge_fit      — exact regularized least squares on raw context
//                     features, solved as the D^2 x D^2 normal equations
//                     vec(G*) = (lambda N I + sum vec(Z_k) vec(Z_k)^T)^{-1}
//                               sum y_k vec(Z_k).
//  * noisyhead_fit  — private full-batch descent: responses clipped at C,
//                     features projected to the G-ball once up front, then
//                     T iterations of
//                       G <- P_R((1 - 2 lambda eta0) G
//                                 - eta0/N sum (<G, Zt_k> - clip(y_k)) Zt_k
//                                 + z_t)
//                     with fresh Gaussian noise z_t per step.
//  * gd_fit         — the identical loop with z_t = 0, so the pair differs
//                     only by injected noise.
//
// The descent update implements the data term with unit coefficient, which
// makes the noiseless fixed point the ridge solution at penalty 2*lambda.
// TrainConfig::exact_gradient doubles the data term (the true gradient of
// the mean-squared loss), whose fixed point is the ridge solution at
// lambda; that variant backs the ridge-equivalence oracle tests.

#pragma once

#include <optional>
#include <vector>

#include "noisyhead/calibration.hpp"
#include "noisyhead/mechanisms.hpp"
#include "noisyhead/prompt.hpp"
#include "noisyhead/rng.hpp"

namespace noisyhead {

struct TrainConfig {
  HyperParams hyper;
  PrivacyBudget budget;
  bool record_trajectory = false;
  bool exact_gradient = false;
  // When false the loop skips clipping and both projections; used to study
  // the untruncated comparator. Default keeps truncation so DP and GD
  // trajectories differ only by noise.
  bool truncate = true;
  // Initial parameter; absent means zero. Projected onto the R-ball.
  std::optional<AttentionParams> initial;
};

struct FitDiagnostics {
  long clipped_responses = 0;    // context responses plus labels hitting C
  long feature_projections = 0;  // prompts whose raw Z exceeded the G-ball
  long param_projections = 0;    // iterations where the R-ball bound
  bool noise_scale_below_privacy_floor = false;  // sigma < 2 G (C + R G)
};

struct FitResult {
  AttentionParams gamma;
  std::vector<AttentionParams> trajectory;  // filled when requested
  FitDiagnostics diagnostics;
};

FitResult ridge_fit(const std::vector<Prompt>& batch, double lambda);

FitResult noisyhead_fit(const std::vector<Prompt>& batch, const TrainConfig& cfg, RngStream& rng);

FitResult gd_fit(const std::vector<Prompt>& batch, const TrainConfig& cfg);

/// One un-noised update from `gamma` (clip, descend, project); exposes the
/// step map whose per-prompt sensitivity the noise scale is calibrated to.
AttentionParams descent_step(const std::vector<Prompt>& batch, const AttentionParams& gamma,
                             const TrainConfig& cfg);

}  // namespace noisyhead
