// Domain types for in-context linear regression prompts and the bilinear
// attention predictor, plus loss / excess-risk evaluation.

#pragma once

#include <optional>
#include <vector>

#include <Eigen/Core>

namespace noisyhead {

// One prompt: L context tokens plus a query token. Column j of `features`
// is token j's feature vector; `responses[j]` is its response. The last
// response is the query's true response: it is kept here as the training
// label but never written into the embedded token matrix.
struct Prompt {
  Eigen::MatrixXd features;   // D x (L+1)
  Eigen::VectorXd responses;  // L+1
  std::optional<Eigen::VectorXd> task_weight;  // kept for diagnostics

  Eigen::Index dim() const { return features.rows(); }
  Eigen::Index context_len() const { return features.cols() - 1; }

  Eigen::VectorXd query_feature() const { return features.col(features.cols() - 1); }
  double query_response() const { return responses[responses.size() - 1]; }
};

/// Throws std::invalid_argument if field shapes disagree or L < 1, D < 1.
void validate(const Prompt& prompt);

// The (D+1) x (L+1) embedding: features on top, responses in the last row,
// and a structural zero in the query-response slot.
struct TokenMatrix {
  Eigen::MatrixXd entries;
};

// The D x D sufficient statistic of a prompt for the bilinear predictor.
// Raw construction is rank one; the clipped/projected variant (mechanisms)
// may be a scaled copy.
struct ContextFeature {
  Eigen::MatrixXd matrix;
};

// The learned D x D attention parameter.
struct AttentionParams {
  Eigen::MatrixXd gamma;
};

/// Embeds a prompt; the query-response slot is zero by construction.
TokenMatrix build_embedding(const Prompt& prompt);

/// Z = (1/L) * x_query * (sum_i y_i x_i)^T with raw responses.
ContextFeature build_context_feature(const Prompt& prompt);

/// Frobenius inner product <gamma, z>.
double predict(const AttentionParams& params, const ContextFeature& z);

/// Squared prediction error on the query token of a test prompt.
double test_loss(const AttentionParams& params, const Prompt& test_prompt);

/// Mean of <gamma_hat - gamma_star, Z_k>^2 over a non-empty test set.
double excess_risk(const AttentionParams& gamma_hat, const AttentionParams& gamma_star,
                   const std::vector<ContextFeature>& test_features);

}  // namespace noisyhead
