#pragma once

#include <algorithm>
#include <array>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "noilin/attack.hpp"
#include "noilin/losses.hpp"
#include "noilin/model.hpp"
#include "oracles.hpp"

namespace noilin::testing {

/// One differentiable computation, reduced to a scalar, with a generator of
/// random inputs kept away from its kinks.
struct GradientCase {
    std::string name;
    std::function<Mat(std::mt19937_64&)> input;
    std::function<Tensor(const Tensor&)> build;
};

namespace detail {

// sum(op(x) * W) for a fixed weight W, so a non-scalar output is probed along
// a random direction.
inline std::function<Tensor(const Tensor&)> weighted(std::function<Tensor(const Tensor&)> op, Mat w) {
    return [op, w](const Tensor& x) { return sum(mul(op(x), Tensor(w))); };
}

inline std::vector<int> labels_for(Index rows, int classes, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> d(0, classes - 1);
    std::vector<int> y(static_cast<std::size_t>(rows));
    for (auto& v : y) v = d(rng);
    return y;
}

// Model with layer `which` parameter `slot` (0 weight, 1 bias) replaced by p.
inline MlpClassifier with_parameter(const MlpClassifier& base, std::size_t which, int slot, const Tensor& p) {
    auto layers = base.layers();
    if (slot == 0)
        layers[which].weight = p;
    else
        layers[which].bias = p;
    return MlpClassifier::from_layers(layers, base.seed());
}

}  // namespace detail

/// Elementary ops of the autodiff core. Each factory call draws fresh fixed
/// operands from `seed`.
inline std::vector<GradientCase> primitive_cases(std::uint64_t seed) {
    std::mt19937_64 r(seed);
    const Index B = 3, C = 4;
    Mat w = random_matrix(r, B, C), w_col = random_matrix(r, B, 1);
    Mat other = random_matrix(r, B, C), other_row = random_matrix(r, 1, C), right = random_matrix(r, C, 2);
    Mat w_right = random_matrix(r, B, 2), left = random_matrix(r, B, B);
    auto y = detail::labels_for(B, static_cast<int>(C), seed ^ 0x5a5a);
    auto plain = [](std::mt19937_64& g) { return random_matrix(g, 3, 4); };
    auto positive = [](std::mt19937_64& g) { return random_matrix(g, 3, 4, 0.2, 2.0); };
    auto kinkless = [](std::mt19937_64& g) { return away_from_zero(random_matrix(g, 3, 4)); };
    auto row = [](std::mt19937_64& g) { return random_matrix(g, 1, 4); };
    // distinct entries per row keep max_excluding away from ties
    auto spread = [](std::mt19937_64& g) {
        Mat m = random_matrix(g, 3, 4);
        for (Index i = 0; i < m.rows(); ++i)
            for (Index j = 0; j < m.cols(); ++j) m(i, j) += 0.5 * static_cast<double>((j * 7 + i) % 4);
        return m;
    };
    using detail::weighted;
    return {
        {"add", plain, weighted([other](const Tensor& x) { return add(x, Tensor(other)); }, w)},
        {"add_row_broadcast", row, weighted([other](const Tensor& x) { return add(Tensor(other), x); }, w)},
        {"sub_lhs", plain, weighted([other](const Tensor& x) { return sub(x, Tensor(other)); }, w)},
        {"sub_rhs", plain, weighted([other](const Tensor& x) { return sub(Tensor(other), x); }, w)},
        {"sub_row_broadcast", row, weighted([other](const Tensor& x) { return sub(Tensor(other), x); }, w)},
        {"mul", plain, weighted([other](const Tensor& x) { return mul(x, Tensor(other)); }, w)},
        {"mul_self", plain, [](const Tensor& x) { return sum(mul(x, x)); }},
        {"mul_row_broadcast", row, weighted([other](const Tensor& x) { return mul(Tensor(other), x); }, w)},
        {"matmul_lhs", plain, weighted([right](const Tensor& x) { return matmul(x, Tensor(right)); }, w_right)},
        {"matmul_rhs", [](std::mt19937_64& g) { return random_matrix(g, 3, 4); },
         weighted([left](const Tensor& x) { return matmul(Tensor(left), x); }, w)},
        {"relu", kinkless, weighted([](const Tensor& x) { return relu(x); }, w)},
        {"exp", plain, weighted([](const Tensor& x) { return exp(x); }, w)},
        {"log", positive, weighted([](const Tensor& x) { return log(x); }, w)},
        {"softmax", plain, weighted([](const Tensor& x) { return softmax(x); }, w)},
        {"log_softmax", plain, weighted([](const Tensor& x) { return log_softmax(x); }, w)},
        {"sum", plain, [](const Tensor& x) { return sum(x); }},
        {"mean", plain, [](const Tensor& x) { return mean(x); }},
        {"row_sum", plain, weighted([](const Tensor& x) { return row_sum(x); }, w_col)},
        {"l2_norm", plain, [](const Tensor& x) { return l2_norm(x); }},
        {"scale", plain, weighted([](const Tensor& x) { return scale(x, -2.5); }, w)},
        {"add_scalar", plain, weighted([](const Tensor& x) { return add_scalar(x, 0.75); }, w)},
        {"pick", plain, weighted([y](const Tensor& x) { return pick(x, y); }, w_col)},
        {"max_excluding", spread, weighted([y](const Tensor& x) { return max_excluding(x, y); }, w_col)},
        {"broadcast_rhs_operand", plain,
         weighted([other_row](const Tensor& x) { return add(x, Tensor(other_row)); }, w)},
    };
}

/// Whole losses, differentiated with respect to inputs and parameters.
inline std::vector<GradientCase> composite_cases(std::uint64_t seed) {
    std::mt19937_64 r(seed);
    const Index B = 4, D = 3, K = 3;
    auto y = detail::labels_for(B, static_cast<int>(K), seed ^ 0x77);
    MlpClassifier model = MlpClassifier::init({static_cast<int>(D), 5, static_cast<int>(K)}, seed);
    Mat x_nat = random_matrix(r, B, D), x_adv_fixed = random_matrix(r, B, D), q = random_matrix(r, B, K);
    Mat targets = smoothed_targets(y, static_cast<int>(K), 0.2);
    auto logits = [](std::mt19937_64& g) { return random_matrix(g, 4, 3, -2.0, 2.0); };
    auto inputs = [](std::mt19937_64& g) { return random_matrix(g, 4, 3); };
    // well separated logits keep both the hinge and the max away from ties
    auto cw_logits = [](std::mt19937_64& g) {
        Mat m(4, 3);
        std::uniform_real_distribution<double> jitter(-0.1, 0.1);
        for (Index i = 0; i < m.rows(); ++i) {
            std::array<double, 3> levels{-1.5, -0.3, 0.9};
            std::shuffle(levels.begin(), levels.end(), g);
            for (Index j = 0; j < 3; ++j) m(i, j) = levels[j] + jitter(g);
        }
        return m;
    };
    auto weight = [model](std::mt19937_64& g) {
        return Mat(model.layers()[0].weight.value() + 0.1 * random_matrix(g, 3, 5));
    };
    return {
        {"cross_entropy", logits, [y](const Tensor& z) { return cross_entropy(z, y); }},
        {"kl_divergence_p", logits, [q](const Tensor& z) { return kl_divergence(z, Tensor(q)); }},
        {"kl_divergence_q", logits, [q](const Tensor& z) { return kl_divergence(Tensor(q), z); }},
        {"soft_cross_entropy", logits, [targets](const Tensor& z) { return soft_cross_entropy(z, targets); }},
        {"cw_hinge", cw_logits, [y](const Tensor& z) { return sum(cw_objective(z, y, 0.0)); }},
        {"model_ce_input", inputs, [model, y](const Tensor& x) { return cross_entropy(model.forward(x), y); }},
        {"trades_wrt_adversarial", inputs,
         [model, x_nat, y](const Tensor& x) { return trades_loss(model, Tensor(x_nat), x, y); }},
        {"trades_wrt_natural", inputs,
         [model, x_adv_fixed, y](const Tensor& x) { return trades_loss(model, x, Tensor(x_adv_fixed), y); }},
        {"trades_wrt_weight", weight,
         [model, x_nat, x_adv_fixed, y](const Tensor& w) {
             MlpClassifier m = detail::with_parameter(model, 0, 0, w);
             return trades_loss(m, Tensor(x_nat), Tensor(x_adv_fixed), y);
         }},
        {"model_ce_wrt_weight", weight,
         [model, x_nat, y](const Tensor& w) {
             return cross_entropy(detail::with_parameter(model, 0, 0, w).forward(Tensor(x_nat)), y);
         }},
        {"model_soft_ce_wrt_bias", [](std::mt19937_64& g) { return random_matrix(g, 1, 3, -0.5, 0.5); },
         [model, x_nat, targets](const Tensor& b) {
             return soft_cross_entropy(detail::with_parameter(model, 1, 1, b).forward(Tensor(x_nat)), targets);
         }},
    };
}

}  // namespace noilin::testing
