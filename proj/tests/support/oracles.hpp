#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "noilin/tensor.hpp"

namespace noilin::testing {

/// Central finite differences of a scalar function of a matrix.
inline Mat numeric_gradient(const std::function<double(const Mat&)>& f, const Mat& x, double h = 1e-5) {
    Mat g(x.rows(), x.cols());
    Mat probe = x;
    for (Index i = 0; i < x.rows(); ++i)
        for (Index j = 0; j < x.cols(); ++j) {
            const double keep = probe(i, j);
            probe(i, j) = keep + h;
            const double up = f(probe);
            probe(i, j) = keep - h;
            const double down = f(probe);
            probe(i, j) = keep;
            g(i, j) = (up - down) / (2.0 * h);
        }
    return g;
}

/// ||a - b|| / max(||a|| + ||b||, floor): symmetric, and safe when both
/// gradients vanish.
inline double relative_error(const Mat& a, const Mat& b, double floor = 1e-8) {
    return (a - b).norm() / std::max(a.norm() + b.norm(), floor);
}

inline Mat random_matrix(std::mt19937_64& rng, Index rows, Index cols, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Mat m(rows, cols);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
    return m;
}

/// Pushes entries away from zero so kinks at the origin stay out of reach of
/// a finite-difference probe.
inline Mat away_from_zero(Mat m, double gap = 1e-2) {
    for (Index i = 0; i < m.size(); ++i) {
        double& v = m.data()[i];
        if (std::abs(v) < gap) v = v < 0 ? v - gap : v + gap;
    }
    return m;
}

/// Analytic gradient of build(x) with respect to x, via the tape.
inline Mat tape_gradient(const std::function<Tensor(const Tensor&)>& build, const Mat& x) {
    Tape tape;
    Tensor input(x, true);
    Tensor out = build(input);
    tape.backward(out);
    return input.grad();
}

inline double tape_value(const std::function<Tensor(const Tensor&)>& build, const Mat& x) {
    return build(Tensor(x)).item();
}

/// Relative error between tape and finite-difference gradients of build at x.
inline double gradient_check(const std::function<Tensor(const Tensor&)>& build, const Mat& x) {
    Mat analytic = tape_gradient(build, x);
    Mat numeric = numeric_gradient([&](const Mat& p) { return tape_value(build, p); }, x);
    return relative_error(analytic, numeric);
}

}  // namespace noilin::testing
