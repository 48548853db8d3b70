#pragma once

#include <cstdint>

#include "noilin/train.hpp"

namespace noilin::testing {

/// The synthetic three-class task: unit-side triangle of centers, so the
/// closest point of a wrong region is 1/(2 sqrt 3) ~ 0.29 from a center.
struct TernaryTask {
    LabeledDataset train;
    LabeledDataset valid;
    LabeledDataset test;
};

inline TernaryTask ternary_task(std::uint64_t seed, int per_class = 200, double sigma = 0.2) {
    const auto centers = default_ternary_centers();
    return {make_ternary_gaussian(per_class, centers, sigma, derive_seed(seed, Stream::split, 0)),
            make_ternary_gaussian(per_class / 4, centers, sigma, derive_seed(seed, Stream::split, 1)),
            make_ternary_gaussian(per_class / 2, centers, sigma, derive_seed(seed, Stream::split, 2))};
}

inline TrainConfig ternary_sat_config(std::uint64_t seed, int epochs, double epsilon) {
    TrainConfig c;
    c.epochs = epochs;
    c.batch_size = 32;
    c.lr = {LrSchedule::piecewise, 0.05};
    c.weight_decay = 5e-4;
    c.attack.epsilon = epsilon;
    c.attack.alpha = epsilon / 4.0;
    c.attack.steps = 10;
    c.seed = seed;
    return c;
}

inline RunOptions ternary_options(double epsilon) {
    RunOptions o;
    o.hidden = {32, 32};
    o.eval.epsilon = epsilon;
    o.eval.pgd40 = false;
    o.eval.cw30 = false;
    return o;
}

/// SAT on the ternary task; returns the final model.
inline MlpClassifier train_ternary(std::uint64_t seed, int epochs, double epsilon, const TernaryTask& task) {
    auto result = run(ternary_sat_config(seed, epochs, epsilon), {task.train, task.valid, task.test},
                      ternary_options(epsilon));
    return std::move(result.final_model);
}

}  // namespace noilin::testing
