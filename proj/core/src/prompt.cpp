#include "noisyhead/prompt.hpp"

#include <stdexcept>
#include <string>

namespace noisyhead {

void validate(const Prompt& prompt) {
  const auto d = prompt.features.rows();
  const auto cols = prompt.features.cols();
  if (d < 1 || cols < 2) {
    throw std::invalid_argument("prompt needs D >= 1 and at least one context token");
  }
  if (prompt.responses.size() != cols) {
    throw std::invalid_argument("prompt has " + std::to_string(cols) + " tokens but " +
                                std::to_string(prompt.responses.size()) + " responses");
  }
  if (prompt.task_weight && prompt.task_weight->size() != d) {
    throw std::invalid_argument("task weight dimension mismatch");
  }
}

TokenMatrix build_embedding(const Prompt& prompt) {
  validate(prompt);
  const auto d = prompt.dim();
  const auto l = prompt.context_len();
  Eigen::MatrixXd e(d + 1, l + 1);
  e.topRows(d) = prompt.features;
  e.bottomRows(1) = prompt.responses.transpose();
  e(d, l) = 0.0;  // query response is masked
  return TokenMatrix{std::move(e)};
}

ContextFeature build_context_feature(const Prompt& prompt) {
  validate(prompt);
  const auto l = prompt.context_len();
  const Eigen::VectorXd weighted_sum =
      prompt.features.leftCols(l) * prompt.responses.head(l) / static_cast<double>(l);
  return ContextFeature{prompt.query_feature() * weighted_sum.transpose()};
}

double predict(const AttentionParams& params, const ContextFeature& z) {
  if (params.gamma.rows() != z.matrix.rows() || params.gamma.cols() != z.matrix.cols()) {
    throw std::invalid_argument("parameter/feature dimension mismatch");
  }
  return params.gamma.cwiseProduct(z.matrix).sum();
}

double test_loss(const AttentionParams& params, const Prompt& test_prompt) {
  const double gap = test_prompt.query_response() - predict(params, build_context_feature(test_prompt));
  return gap * gap;
}

double excess_risk(const AttentionParams& gamma_hat, const AttentionParams& gamma_star,
                   const std::vector<ContextFeature>& test_features) {
  if (test_features.empty()) {
    throw std::invalid_argument("excess_risk needs a non-empty test set");
  }
  const AttentionParams diff{gamma_hat.gamma - gamma_star.gamma};
  double total = 0.0;
  for (const auto& z : test_features) {
    const double g = predict(diff, z);
    total += g * g;
  }
  return total / static_cast<double>(test_features.size());
}

}  // namespace noisyhead
