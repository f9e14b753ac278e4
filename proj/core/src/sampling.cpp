#include "noisyhead/sampling.hpp"

#include <cmath>
#include <stdexcept>

namespace noisyhead {

void validate(const SamplerConfig& cfg) {
  if (cfg.dim < 1) throw std::invalid_argument("sampler dim must be >= 1");
  if (cfg.context_len < 1) throw std::invalid_argument("sampler context length must be >= 1");
  if (cfg.noise_var < 0) throw std::invalid_argument("sampler noise variance must be >= 0");
}

Eigen::VectorXd sample_sphere(RngStream& rng, int dim) {
  if (dim < 1) throw std::invalid_argument("sphere dimension must be >= 1");
  Eigen::VectorXd v = rng.normal_vector(dim);
  double n = v.norm();
  while (n == 0.0) {  // probability-zero guard
    v = rng.normal_vector(dim);
    n = v.norm();
  }
  return v / n;
}

Eigen::VectorXd sample_task(RngStream& rng, int dim) {
  if (dim < 1) throw std::invalid_argument("task dimension must be >= 1");
  return rng.normal_vector(dim);
}

Prompt generate_prompt(RngStream& rng, const SamplerConfig& cfg) {
  validate(cfg);
  const int l = cfg.context_len;
  Prompt prompt;
  prompt.task_weight = sample_task(rng, cfg.dim);
  prompt.features.resize(cfg.dim, l + 1);
  prompt.responses.resize(l + 1);
  const double noise_sd = std::sqrt(cfg.noise_var);
  for (int j = 0; j <= l; ++j) {
    prompt.features.col(j) = sample_sphere(rng, cfg.dim);
    prompt.responses[j] = prompt.task_weight->dot(prompt.features.col(j));
    if (noise_sd > 0) prompt.responses[j] += noise_sd * rng.normal();
  }
  return prompt;
}

std::vector<Prompt> generate_batch(RngStream& rng, int n, const SamplerConfig& cfg) {
  if (n < 1) throw std::invalid_argument("batch size must be >= 1");
  std::vector<Prompt> batch;
  batch.reserve(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) batch.push_back(generate_prompt(rng, cfg));
  return batch;
}

Prompt perturb_prompt(const Prompt& prompt, const PerturbationSpec& spec) {
  Prompt out = prompt;
  out.features.array() += spec.feature_shift;
  out.responses.array() += spec.response_shift;
  return out;
}

std::pair<std::vector<Prompt>, int> poison_batch(RngStream& rng, const std::vector<Prompt>& batch,
                                                 const PerturbationSpec& spec) {
  if (batch.empty()) throw std::invalid_argument("cannot poison an empty batch");
  int index;
  if (spec.target_index) {
    index = *spec.target_index;
    if (index < 0 || index >= static_cast<int>(batch.size())) {
      throw std::invalid_argument("poison target index out of range");
    }
  } else {
    index = static_cast<int>(rng.uniform_below(batch.size()));
  }
  std::vector<Prompt> out = batch;
  out[static_cast<std::size_t>(index)] = perturb_prompt(batch[static_cast<std::size_t>(index)], spec);
  return {std::move(out), index};
}

}  // namespace noisyhead
