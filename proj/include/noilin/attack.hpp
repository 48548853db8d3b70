#pragma once

#include <optional>
#include <span>
#include <string>

#include "noilin/data.hpp"
#include "noilin/model.hpp"
#include "noilin/rng.hpp"
#include "noilin/tensor.hpp"

namespace noilin {

enum class AttackObjective {
    cross_entropy,       // CE(f(x), y)
    cw,                  // max(max_{j!=y} f_j - f_y - kappa, 0)
    kl,                  // KL(f(x_nat) || f(x)), the TRADES inner objective
    soft_cross_entropy,  // soft CE against smoothed targets
};

std::string to_string(AttackObjective o);
AttackObjective parse_attack_objective(const std::string& name);

struct AttackConfig {
    double epsilon = 8.0 / 255.0;  // L-inf radius
    double alpha = 2.0 / 255.0;    // step size
    int steps = 10;
    AttackObjective objective = AttackObjective::cross_entropy;
    double kappa = 0.0;  // cw margin
    bool random_start = true;
    std::optional<DomainBounds> clamp_domain;

    void validate() const;
};

/// What the attack ascends against. `labels` drive cross_entropy and cw; the
/// other two objectives take their targets from the matching pointer.
struct AttackGoal {
    std::span<const int> labels;
    const Mat* natural_logits = nullptr;  // kl
    const Mat* soft_targets = nullptr;    // soft_cross_entropy
};

/// Per-sample CW-inf hinge, (B x 1): max(max_{j!=y} f_j - f_y - kappa, 0).
Tensor cw_objective(const Tensor& logits, std::span<const int> labels, double kappa);

/// Projection onto the L-inf ball around x0, then onto the domain box.
Mat project(const Mat& x, const Mat& x0, double epsilon, const std::optional<DomainBounds>& domain);

/// K steps of x <- proj(x + alpha * sign(grad_x objective)). sign(0) = 0.
/// The model and x0 are left untouched. With random_start, the first iterate
/// is x0 + U(-eps, eps) per coordinate (then projected onto the domain).
Mat pgd(const MlpClassifier& model, const Mat& x0, const AttackGoal& goal, const AttackConfig& cfg, Rng& rng);

inline Mat pgd(const MlpClassifier& model, const Mat& x0, std::span<const int> labels, const AttackConfig& cfg, Rng& rng) {
    return pgd(model, x0, AttackGoal{labels}, cfg, rng);
}

/// Evaluation presets: PGD-K on cross-entropy and CW-PGD-K, step eps/4.
AttackConfig pgd_preset(double epsilon, int steps, std::optional<DomainBounds> domain);
AttackConfig cw_preset(double epsilon, int steps, std::optional<DomainBounds> domain, double kappa = 0.0);

}  // namespace noilin
