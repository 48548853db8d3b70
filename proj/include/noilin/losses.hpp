#pragma once

#include <span>

#include <Eigen/Core>

#include "noilin/model.hpp"
#include "noilin/tensor.hpp"

namespace noilin {

/// Mean over the batch of -log softmax(logits)[y].
Tensor cross_entropy(const Tensor& logits, std::span<const int> labels);

/// Per-sample cross-entropy, (B x 1).
Tensor cross_entropy_per_sample(const Tensor& logits, std::span<const int> labels);

/// Mean over the batch of KL(softmax(p) || softmax(q)), via log-softmax.
Tensor kl_divergence(const Tensor& p_logits, const Tensor& q_logits);

/// KL(softmax(p) || softmax(q)) per row, without a tape.
Eigen::VectorXd kl_rows(const Mat& p_logits, const Mat& q_logits);

inline constexpr double kTradesBeta = 6.0;

/// CE(f(x_nat), y) + beta * KL(f(x_nat) || f(x_adv)).
Tensor trades_loss(const MlpClassifier& model, const Tensor& x_nat, const Tensor& x_adv, std::span<const int> labels,
                   double beta = kTradesBeta);

/// Target distribution with 1 - rho on the true class and rho / (C - 1) elsewhere.
struct SmoothedLabel {
    Eigen::VectorXd distribution;
};

SmoothedLabel smooth_label(int y, int class_count, double rho);

/// Rows of smooth_label(labels[i], C, rho), as a (B x C) target matrix.
Mat smoothed_targets(std::span<const int> labels, int class_count, double rho);

/// Mean over the batch of -sum_j target_j log softmax(logits)_j. Target rows
/// must be distributions (non-negative, summing to 1).
Tensor soft_cross_entropy(const Tensor& logits, const Mat& targets);

}  // namespace noilin
