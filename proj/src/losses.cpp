#include "noilin/losses.hpp"

#include <cmath>
#include <string>

#include "noilin/errors.hpp"

namespace noilin {

Tensor cross_entropy_per_sample(const Tensor& logits, std::span<const int> labels) {
    return scale(pick(log_softmax(logits), labels), -1.0);
}

Tensor cross_entropy(const Tensor& logits, std::span<const int> labels) {
    return mean(cross_entropy_per_sample(logits, labels));
}

Tensor kl_divergence(const Tensor& p_logits, const Tensor& q_logits) {
    if (p_logits.shape() != q_logits.shape())
        throw ShapeError("kl_divergence: shape mismatch " + shape_string(p_logits.shape()) + " vs " +
                         shape_string(q_logits.shape()));
    Tensor log_p = log_softmax(p_logits);
    Tensor log_q = log_softmax(q_logits);
    Tensor terms = mul(exp(log_p), sub(log_p, log_q));
    return scale(sum(terms), 1.0 / static_cast<double>(p_logits.rows()));
}

Eigen::VectorXd kl_rows(const Mat& p_logits, const Mat& q_logits) {
    if (p_logits.rows() != q_logits.rows() || p_logits.cols() != q_logits.cols())
        throw ShapeError("kl_rows: shape mismatch");
    Mat log_p = detail::log_softmax_rows(p_logits);
    Mat log_q = detail::log_softmax_rows(q_logits);
    return (log_p.array().exp() * (log_p - log_q).array()).rowwise().sum().matrix();
}

Tensor trades_loss(const MlpClassifier& model, const Tensor& x_nat, const Tensor& x_adv, std::span<const int> labels,
                   double beta) {
    if (!(beta >= 0.0)) throw ConfigError("trades_loss: beta must be >= 0");
    if (x_nat.shape() != x_adv.shape())
        throw ShapeError("trades_loss: natural batch " + shape_string(x_nat.shape()) + " vs adversarial batch " +
                         shape_string(x_adv.shape()));
    Tensor nat_logits = model.forward(x_nat);
    Tensor ce = cross_entropy(nat_logits, labels);
    if (beta == 0.0) return ce;
    Tensor adv_logits = model.forward(x_adv);
    return add(ce, scale(kl_divergence(nat_logits, adv_logits), beta));
}

SmoothedLabel smooth_label(int y, int class_count, double rho) {
    if (class_count < 2) throw ConfigError("smooth_label: need at least 2 classes");
    if (!(rho >= 0.0 && rho < 1.0)) throw ConfigError("smooth_label: rho must lie in [0, 1), got " + std::to_string(rho));
    if (y < 0 || y >= class_count) throw ConfigError("smooth_label: label out of range");
    SmoothedLabel out{Eigen::VectorXd::Constant(class_count, rho / (class_count - 1))};
    out.distribution(y) = 1.0 - rho;
    return out;
}

Mat smoothed_targets(std::span<const int> labels, int class_count, double rho) {
    Mat t(static_cast<Index>(labels.size()), class_count);
    for (std::size_t i = 0; i < labels.size(); ++i)
        t.row(static_cast<Index>(i)) = smooth_label(labels[i], class_count, rho).distribution.transpose();
    return t;
}

Tensor soft_cross_entropy(const Tensor& logits, const Mat& targets) {
    if (targets.rows() != logits.rows() || targets.cols() != logits.cols())
        throw ShapeError("soft_cross_entropy: logits " + shape_string(logits.shape()) + " vs targets (" +
                         std::to_string(targets.rows()) + "x" + std::to_string(targets.cols()) + ")");
    for (Index i = 0; i < targets.rows(); ++i) {
        if (targets.row(i).minCoeff() < 0.0 || std::abs(targets.row(i).sum() - 1.0) > 1e-9)
            throw ConfigError("soft_cross_entropy: target row " + std::to_string(i) + " is not a distribution");
    }
    Tensor weighted = mul(Tensor(targets), log_softmax(logits));
    return scale(sum(weighted), -1.0 / static_cast<double>(logits.rows()));
}

}  // namespace noilin
