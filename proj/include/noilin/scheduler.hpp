#pragma once

#include <vector>

namespace noilin {

struct NoilinParams {
    double eta_min = 0.05;
    double eta_max = 0.6;
    int tau = 10;
    double gamma = 0.1;

    void validate() const;

    static NoilinParams sat_defaults() { return {0.05, 0.6, 10, 0.1}; }
    static NoilinParams trades_defaults() { return {0.05, 0.4, 10, 0.05}; }
};

/// Adaptive noise-rate schedule. After each epoch the robust validation
/// accuracy A_e is observed; when the trailing window sum
/// A_{e-tau} + ... + A_e falls below the window one epoch earlier,
/// A_{e-tau-1} + ... + A_{e-1}, the rate is boosted to
/// min(eta * (1 + gamma), eta_max).
///
/// Both windows need tau + 1 entries, so nothing fires before tau + 2
/// observations. The comparison is exact: the shared partial sum is formed
/// once and the two totals are compared through their rounding error terms,
/// so the outcome always agrees with A_e < A_{e-tau-1}.
class NoilinScheduler {
public:
    explicit NoilinScheduler(const NoilinParams& params);

    /// Records A_e in [0, 1]; returns true when the rate was boosted.
    bool observe(double accuracy);

    double current_eta() const { return eta_; }
    const NoilinParams& params() const { return params_; }
    const std::vector<double>& history() const { return history_; }

    /// Whether the windowed trigger holds for the current history.
    bool window_degraded() const;

private:
    NoilinParams params_;
    double eta_;
    std::vector<double> history_;
};

}  // namespace noilin
