// Oracle-equivalence and invariant checks shared by the `selftest` CLI
// command and the acceptance suite. Each check is deterministic for a
// fixed seed and returns a one-line verdict.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace noisyhead {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

/// Exact-gradient descent against the closed-form ridge solution on small
/// random instances with truncation inactive.
CheckResult check_gd_ridge_equivalence(int instances, std::uint64_t seed,
                                       double tolerance = 1e-6);

/// Residual of the ridge normal equations on random instances.
CheckResult check_ridge_normal_equations(int instances, std::uint64_t seed,
                                         double tolerance = 1e-8);

/// Un-noised one-step update difference across neighboring batches never
/// exceeds 2 eta0 (R G^2 + C G)/N (+1e-10 float slack).
CheckResult check_sensitivity_bound(int pairs, std::uint64_t seed);

/// Pooled empirical variance of injected noise matches the per-iteration
/// law within 3 standard errors.
CheckResult check_noise_law(int min_samples, std::uint64_t seed);

/// With the calibrated clip bound at kappa = 0.01, at most 2% of generated
/// responses are clipped (checked on >= 1e5 tokens).
CheckResult check_clip_inactivity(std::uint64_t seed);

/// A small sweep run twice and under different worker counts produces
/// byte-identical summary/trials files.
CheckResult check_run_determinism(std::uint64_t seed);

/// The fast battery (reduced instance counts), for the CLI selftest.
std::vector<CheckResult> run_selftest(std::uint64_t seed);

}  // namespace noisyhead
