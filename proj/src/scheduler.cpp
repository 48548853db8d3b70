#include "noilin/scheduler.hpp"

#include <algorithm>
#include <string>

#include "noilin/errors.hpp"

namespace noilin {

namespace {

// s = a + b exactly as hi + lo (Knuth's TwoSum).
struct ExactSum {
    double hi;
    double lo;
};

ExactSum two_sum(double a, double b) {
    double hi = a + b;
    double bv = hi - a;
    double av = hi - bv;
    return {hi, (a - av) + (b - bv)};
}

bool less(const ExactSum& x, const ExactSum& y) { return x.hi < y.hi || (x.hi == y.hi && x.lo < y.lo); }

}  // namespace

void NoilinParams::validate() const {
    if (!(0.0 <= eta_min && eta_min <= eta_max && eta_max <= 1.0))
        throw ConfigError("noilin: need 0 <= eta_min <= eta_max <= 1 (got eta_min=" + std::to_string(eta_min) +
                          ", eta_max=" + std::to_string(eta_max) + ")");
    if (tau < 1) throw ConfigError("noilin: tau must be >= 1");
    if (!(gamma > 0.0)) throw ConfigError("noilin: gamma must be > 0");
}

NoilinScheduler::NoilinScheduler(const NoilinParams& params) : params_(params), eta_(params.eta_min) {
    params_.validate();
}

bool NoilinScheduler::window_degraded() const {
    const auto tau = static_cast<std::size_t>(params_.tau);
    const std::size_t e = history_.size();  // A_1 .. A_e are history_[0 .. e-1]
    if (e < tau + 2) return false;
    // shared terms A_{e-tau} .. A_{e-1}
    double shared = 0.0;
    for (std::size_t i = e - tau; i <= e - 1; ++i) shared += history_[i - 1];
    ExactSum newer = two_sum(shared, history_[e - 1]);        // sum_{i=e-tau}^{e} A_i
    ExactSum older = two_sum(history_[e - tau - 2], shared);  // sum_{j=e-tau-1}^{e-1} A_j
    return less(newer, older);
}

bool NoilinScheduler::observe(double accuracy) {
    if (!(accuracy >= 0.0 && accuracy <= 1.0))
        throw ConfigError("noilin: accuracy must lie in [0, 1], got " + std::to_string(accuracy));
    history_.push_back(accuracy);
    if (!window_degraded()) return false;
    eta_ = std::min(eta_ * (1.0 + params_.gamma), params_.eta_max);
    return true;
}

}  // namespace noilin
