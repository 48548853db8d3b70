#include "noilin/attack.hpp"

#include <cmath>
#include <random>

#include "noilin/errors.hpp"
#include "noilin/losses.hpp"

namespace noilin {

std::string to_string(AttackObjective o) {
    switch (o) {
        case AttackObjective::cross_entropy: return "cross_entropy";
        case AttackObjective::cw: return "cw";
        case AttackObjective::kl: return "kl";
        case AttackObjective::soft_cross_entropy: return "soft_cross_entropy";
    }
    return "?";
}

AttackObjective parse_attack_objective(const std::string& name) {
    if (name == "cross_entropy") return AttackObjective::cross_entropy;
    if (name == "cw") return AttackObjective::cw;
    if (name == "kl") return AttackObjective::kl;
    if (name == "soft_cross_entropy") return AttackObjective::soft_cross_entropy;
    throw ConfigError("unknown attack objective '" + name + "' (valid: cross_entropy, cw, kl, soft_cross_entropy)");
}

void AttackConfig::validate() const {
    if (!(epsilon >= 0.0)) throw ConfigError("attack: epsilon must be >= 0");
    if (steps < 0) throw ConfigError("attack: steps must be >= 0");
    if (steps > 0 && !(alpha > 0.0)) throw ConfigError("attack: alpha must be > 0 when steps > 0");
    if (!(kappa >= 0.0)) throw ConfigError("attack: kappa must be >= 0");
    if (clamp_domain && !(clamp_domain->lo <= clamp_domain->hi)) throw ConfigError("attack: empty clamp domain");
}

Tensor cw_objective(const Tensor& logits, std::span<const int> labels, double kappa) {
    if (logits.cols() < 2) throw ConfigError("cw_objective: need at least 2 classes");
    if (!(kappa >= 0.0)) throw ConfigError("cw_objective: kappa must be >= 0");
    Tensor margin = sub(max_excluding(logits, labels), pick(logits, labels));
    return relu(add_scalar(margin, -kappa));
}

Mat project(const Mat& x, const Mat& x0, double epsilon, const std::optional<DomainBounds>& domain) {
    Mat out = x.array().max(x0.array() - epsilon).min(x0.array() + epsilon).matrix();
    if (domain) out = out.array().max(domain->lo).min(domain->hi).matrix();
    return out;
}

namespace {

Tensor attack_loss(const Tensor& logits, const AttackGoal& goal, const AttackConfig& cfg) {
    switch (cfg.objective) {
        case AttackObjective::cross_entropy: return sum(cross_entropy_per_sample(logits, goal.labels));
        case AttackObjective::cw: return sum(cw_objective(logits, goal.labels, cfg.kappa));
        case AttackObjective::kl: {
            if (!goal.natural_logits) throw ConfigError("pgd: kl objective needs natural logits");
            Tensor nat(*goal.natural_logits);
            return scale(kl_divergence(nat, logits), static_cast<double>(logits.rows()));
        }
        case AttackObjective::soft_cross_entropy: {
            if (!goal.soft_targets) throw ConfigError("pgd: soft_cross_entropy objective needs targets");
            return scale(soft_cross_entropy(logits, *goal.soft_targets), static_cast<double>(logits.rows()));
        }
    }
    throw ConfigError("pgd: unknown objective");
}

}  // namespace

Mat pgd(const MlpClassifier& model, const Mat& x0, const AttackGoal& goal, const AttackConfig& cfg, Rng& rng) {
    cfg.validate();
    if (x0.cols() != model.input_dim())
        throw ShapeError("pgd: input dimension " + std::to_string(x0.cols()) + " does not match model " +
                         std::to_string(model.input_dim()));
    bool label_objective = cfg.objective == AttackObjective::cross_entropy || cfg.objective == AttackObjective::cw;
    if (label_objective && static_cast<Index>(goal.labels.size()) != x0.rows())
        throw ShapeError("pgd: " + std::to_string(goal.labels.size()) + " attack labels for a batch of " +
                         std::to_string(x0.rows()));

    Mat x = x0;
    if (cfg.random_start && cfg.epsilon > 0.0) {
        std::uniform_real_distribution<double> noise(-cfg.epsilon, cfg.epsilon);
        for (Index i = 0; i < x.size(); ++i) x.data()[i] += noise(rng);
        x = project(x, x0, cfg.epsilon, cfg.clamp_domain);
    }
    if (cfg.steps == 0) return x;

    MlpClassifier net = model.frozen();
    for (int step = 0; step < cfg.steps; ++step) {
        Tensor xt(x, true);
        Tape tape;
        Tensor loss = attack_loss(net.forward(xt), goal, cfg);
        tape.backward(loss);
        if (!xt.has_grad()) break;  // objective does not depend on x
        const Mat& g = xt.grad();
        if (!g.allFinite())
            throw NumericError("pgd: non-finite input gradient at step " + std::to_string(step) + " (objective " +
                               to_string(cfg.objective) + ", loss " + std::to_string(loss.item()) + ")");
        Mat direction = g.unaryExpr([](double v) { return double((v > 0.0) - (v < 0.0)); });
        x = project(x + cfg.alpha * direction, x0, cfg.epsilon, cfg.clamp_domain);
    }
    return x;
}

AttackConfig pgd_preset(double epsilon, int steps, std::optional<DomainBounds> domain) {
    AttackConfig c;
    c.epsilon = epsilon;
    c.alpha = epsilon / 4.0;
    c.steps = steps;
    c.objective = AttackObjective::cross_entropy;
    c.random_start = true;
    c.clamp_domain = domain;
    return c;
}

AttackConfig cw_preset(double epsilon, int steps, std::optional<DomainBounds> domain, double kappa) {
    AttackConfig c = pgd_preset(epsilon, steps, domain);
    c.objective = AttackObjective::cw;
    c.kappa = kappa;
    return c;
}

}  // namespace noilin
