// Seeded generation of tasks, prompts and batches from the noisy linear
// model, and the single-prompt adversarial perturbation.

#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "noisyhead/prompt.hpp"
#include "noisyhead/rng.hpp"

namespace noisyhead {

struct SamplerConfig {
  int dim = 1;           // D
  int context_len = 1;   // L
  double noise_var = 0;  // response noise variance tau^2
};

void validate(const SamplerConfig& cfg);

// Additive perturbation of one prompt: `feature_shift` is added to every
// coordinate of every token, `response_shift` to every response including
// the stored true query response. No target index means pick uniformly.
struct PerturbationSpec {
  double feature_shift = 0;   // mu
  double response_shift = 0;  // alpha
  std::optional<int> target_index;
};

/// Uniform draw from the unit sphere (normalized Gaussian vector).
Eigen::VectorXd sample_sphere(RngStream& rng, int dim);

/// Task weight w with i.i.d. standard normal coordinates.
Eigen::VectorXd sample_task(RngStream& rng, int dim);

/// One prompt: fresh w, L+1 sphere features, responses w.x + noise.
/// All L+1 responses are generated, including the query's true response.
Prompt generate_prompt(RngStream& rng, const SamplerConfig& cfg);

/// n independent prompts, each with its own task weight.
std::vector<Prompt> generate_batch(RngStream& rng, int n, const SamplerConfig& cfg);

/// Shifted copy; perturbed features are intentionally not renormalized.
Prompt perturb_prompt(const Prompt& prompt, const PerturbationSpec& spec);

/// Replaces exactly one prompt by its perturbation; returns the new batch
/// and the poisoned index.
std::pair<std::vector<Prompt>, int> poison_batch(RngStream& rng, const std::vector<Prompt>& batch,
                                                 const PerturbationSpec& spec);

}  // namespace noisyhead
