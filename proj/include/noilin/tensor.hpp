#pragma once

// Dense rank-2 tensors with a reverse-mode gradient tape.
//
// Values are Eigen row-major matrices; a batch of samples is a (batch x
// features) matrix and a scalar is 1x1. Operations are free functions that
// record onto the tape active on the calling thread whenever an operand
// requires a gradient. Without an active tape they evaluate eagerly and record
// nothing, which is what evaluation code wants.

#include <Eigen/Core>

#include <array>
#include <cmath>
#include <functional>
#include <memory>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "noilin/errors.hpp"

namespace noilin {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Index = Eigen::Index;
using Shape = std::array<Index, 2>;

inline std::string shape_string(const Shape& s) {
    std::ostringstream os;
    os << "(" << s[0] << "x" << s[1] << ")";
    return os.str();
}

template <typename Scalar>
class BasicTape;

namespace detail {

template <typename Scalar>
struct Node {
    Matrix<Scalar> value;
    Matrix<Scalar> grad;  // empty until a gradient arrives
    bool requires_grad = false;

    void accumulate(const Matrix<Scalar>& delta) {
        if (!requires_grad) return;
        if (grad.size() == 0)
            grad = delta;
        else
            grad += delta;
    }
};

}  // namespace detail

template <typename Scalar>
class BasicTensor {
public:
    using Mat = Matrix<Scalar>;
    using NodePtr = std::shared_ptr<detail::Node<Scalar>>;

    BasicTensor() : node_(std::make_shared<detail::Node<Scalar>>()) {}

    explicit BasicTensor(Mat value, bool requires_grad = false) : BasicTensor() {
        node_->value = std::move(value);
        node_->requires_grad = requires_grad;
    }

    static BasicTensor zeros(Index rows, Index cols, bool requires_grad = false) {
        return BasicTensor(Mat::Zero(rows, cols), requires_grad);
    }

    static BasicTensor scalar(Scalar v, bool requires_grad = false) {
        Mat m(1, 1);
        m(0, 0) = v;
        return BasicTensor(std::move(m), requires_grad);
    }

    static BasicTensor row(std::initializer_list<Scalar> values, bool requires_grad = false) {
        Mat m(1, static_cast<Index>(values.size()));
        Index j = 0;
        for (Scalar v : values) m(0, j++) = v;
        return BasicTensor(std::move(m), requires_grad);
    }

    Index rows() const { return node_->value.rows(); }
    Index cols() const { return node_->value.cols(); }
    Index size() const { return node_->value.size(); }
    Shape shape() const { return {rows(), cols()}; }
    bool is_scalar() const { return size() == 1; }

    const Mat& value() const { return node_->value; }
    /// In-place access for optimizers and attack iterates. Never call while
    /// the tensor is referenced by a live tape record.
    Mat& mutable_value() { return node_->value; }

    Scalar item() const {
        if (!is_scalar()) throw ShapeError("item(): tensor of shape " + shape_string(shape()) + " is not scalar");
        return node_->value(0, 0);
    }

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool on) { node_->requires_grad = on; }

    bool has_grad() const { return node_->grad.size() != 0; }
    const Mat& grad() const { return node_->grad; }
    void clear_grad() { node_->grad.resize(0, 0); }

    /// Copy of the value with no gradient history.
    BasicTensor detach() const { return BasicTensor(node_->value, false); }

    const NodePtr& node() const { return node_; }

private:
    NodePtr node_;
};

template <typename Scalar>
class BasicTape {
public:
    using Mat = Matrix<Scalar>;
    using Backward = std::function<void(const Mat&)>;

    BasicTape() : previous_(active_) { active_ = this; }
    ~BasicTape() { active_ = previous_; }
    BasicTape(const BasicTape&) = delete;
    BasicTape& operator=(const BasicTape&) = delete;

    static BasicTape* active() { return active_; }

    std::size_t size() const { return records_.size(); }
    void clear() { records_.clear(); }

    void record(typename BasicTensor<Scalar>::NodePtr out, Backward fn) {
        records_.push_back({std::move(out), std::move(fn)});
    }

    /// Replays the tape in reverse from a scalar loss. Gradients accumulate
    /// into every reachable tensor that requires them.
    void backward(const BasicTensor<Scalar>& loss) {
        if (!loss.is_scalar())
            throw ShapeError("backward(): loss must be scalar, got shape " + shape_string(loss.shape()));
        if (records_.empty()) throw Error("backward(): tape is empty");
        loss.node()->accumulate(Mat::Ones(1, 1));
        for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
            if (it->out->grad.size() != 0) it->backward(it->out->grad);
        }
    }

private:
    struct Record {
        typename BasicTensor<Scalar>::NodePtr out;
        Backward backward;
    };

    std::vector<Record> records_;
    BasicTape* previous_;
    static inline thread_local BasicTape* active_ = nullptr;
};

using Tensor = BasicTensor<double>;
using Tape = BasicTape<double>;
using Mat = Matrix<double>;

namespace detail {

template <typename Scalar>
bool tracking(std::initializer_list<const BasicTensor<Scalar>*> operands) {
    if (BasicTape<Scalar>::active() == nullptr) return false;
    for (auto* t : operands)
        if (t->requires_grad()) return true;
    return false;
}

template <typename Scalar>
BasicTensor<Scalar> make_result(Matrix<Scalar> value, bool track) {
    return BasicTensor<Scalar>(std::move(value), track);
}

template <typename Scalar>
[[noreturn]] void shape_mismatch(const char* op, const BasicTensor<Scalar>& a, const BasicTensor<Scalar>& b) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
}

enum class Broadcast { none, lhs_row, rhs_row };

// Elementwise operands must match exactly, or one may be a single row that
// broadcasts over the leading batch axis.
template <typename Scalar>
Broadcast elementwise_layout(const char* op, const BasicTensor<Scalar>& a, const BasicTensor<Scalar>& b) {
    if (a.shape() == b.shape()) return Broadcast::none;
    if (a.cols() == b.cols() && b.rows() == 1) return Broadcast::rhs_row;
    if (a.cols() == b.cols() && a.rows() == 1) return Broadcast::lhs_row;
    shape_mismatch(op, a, b);
}

template <typename Scalar>
Matrix<Scalar> expand(const Matrix<Scalar>& m, Index rows) {
    return m.rows() == rows ? m : Matrix<Scalar>(m.replicate(rows, 1));
}

// Gradient for an operand of the given row count (sums over the batch axis
// for a broadcast row).
template <typename Scalar>
Matrix<Scalar> reduce_to(const Matrix<Scalar>& g, Index rows) {
    if (g.rows() == rows) return g;
    return g.colwise().sum();
}

template <typename Scalar>
Matrix<Scalar> softmax_rows(const Matrix<Scalar>& z) {
    Matrix<Scalar> out = z.colwise() - z.rowwise().maxCoeff();
    out = out.array().exp().matrix();
    out.array().colwise() /= out.rowwise().sum().array();
    return out;
}

template <typename Scalar>
Matrix<Scalar> log_softmax_rows(const Matrix<Scalar>& z) {
    Matrix<Scalar> shifted = z.colwise() - z.rowwise().maxCoeff();
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> lse = shifted.array().exp().rowwise().sum().log();
    shifted.colwise() -= lse;
    return shifted;
}

}  // namespace detail

template <typename Scalar>
BasicTensor<Scalar> add(const BasicTensor<Scalar>& a, const BasicTensor<Scalar>& b) {
    detail::elementwise_layout("add", a, b);
    Index rows = std::max(a.rows(), b.rows());
    auto out = detail::make_result<Scalar>(detail::expand(a.value(), rows) + detail::expand(b.value(), rows),
                                           detail::tracking({&a, &b}));
    if (out.requires_grad()) {
        BasicTape<Scalar>::active()->record(out.node(), [an = a.node(), bn = b.node()](const Matrix<Scalar>& g) {
            an->accumulate(detail::reduce_to(g, an->value.rows()));
            bn->accumulate(detail::reduce_to(g, bn->value.rows()));
        });
    }
    return out;
}

template <typename Scalar>
BasicTensor<Scalar> sub(const BasicTensor<Scalar>& a, const BasicTensor<Scalar>& b) {
    detail::elementwise_layout("sub", a, b);
    Index rows = std::max(a.rows(), b.rows());
    auto out = detail::make_result<Scalar>(detail::expand(a.value(), rows) - detail::expand(b.value(), rows),
                                           detail::tracking({&a, &b}));
    if (out.requires_grad()) {
        BasicTape<Scalar>::active()->record(out.node(), [an = a.node(), bn = b.node()](const Matrix<Scalar>& g) {
            an->accumulate(detail::reduce_to(g, an->value.rows()));
            bn->accumulate(detail::reduce_to(Matrix<Scalar>(-g), bn->value.rows()));
        });
    }
    return out;
}

/// Elementwise product.
template <typename Scalar>
BasicTensor<Scalar> mul(const BasicTensor<Scalar>& a, const BasicTensor<Scalar>& b) {
    detail::elementwise_layout("mul", a, b);
    Index rows = std::max(a.rows(), b.rows());
    Matrix<Scalar> av = detail::expand(a.value(), rows);
    Matrix<Scalar> bv = detail::expand(b.value(), rows);
    auto out = detail::make_result<Scalar>(av.cwiseProduct(bv), detail::tracking({&a, &b}));
    if (out.requires_grad()) {
        BasicTape<Scalar>::active()->record(
            out.node(), [an = a.node(), bn = b.node(), av, bv](const Matrix<Scalar>& g) {
                if (an->requires_grad) an->accumulate(detail::reduce_to<Scalar>(g.cwiseProduct(bv), an->value.rows()));
                if (bn->requires_grad) bn->accumulate(detail::reduce_to<Scalar>(g.cwiseProduct(av), bn->value.rows()));
            });
    }
    return out;
}

template <typename Scalar>
BasicTensor<Scalar> matmul(const BasicTensor<Scalar>& a, const BasicTensor<Scalar>& b) {
    if (a.cols() != b.rows()) detail::shape_mismatch("matmul", a, b);
    auto out = detail::make_result<Scalar>(a.value() * b.value(), detail::tracking({&a, &b}));
    if (out.requires_grad()) {
        BasicTape<Scalar>::active()->record(out.node(), [an = a.node(), bn = b.node()](const Matrix<Scalar>& g) {
            if (an->requires_grad) an->accumulate(g * bn->value.transpose());
            if (bn->requires_grad) bn->accumulate(an->value.transpose() * g);
        });
    }
    return out;
}

/// max(x, 0); the subgradient at 0 is 0.
template <typename Scalar>
BasicTensor<Scalar> relu(const BasicTensor<Scalar>& a) {
    auto out = detail::make_result<Scalar>(a.value().cwiseMax(Scalar(0)), detail::tracking({&a}));
    if (out.requires_grad()) {
        BasicTape<Scalar>::active()->record(out.node(), [an = a.node()](const Matrix<Scalar>& g) {
            an->accumulate((an->value.array() > Scalar(0)).select(g, Scalar(0)));
        });
    }
    return out;
}

template <typename Scalar>
BasicTensor<Scalar> exp(const BasicTensor<Scalar>& a) {
    auto out = detail::make_result<Scalar>(a.value().array().exp().matrix(), detail::tracking({&a}));
    if (out.requires_grad()) {
        BasicTape<Scalar>::active()->record(out.node(), [an = a.node(), on = out.node().get()](const Matrix<Scalar>& g) {
            an->accumulate(g.cwiseProduct(on->value));
        });
    }
    return out;
}

template <typename Scalar>
BasicTensor<Scalar> log(const BasicTensor<Scalar>& a) {
    auto out = detail::make_result<Scalar>(a.value().array().log().matrix(), detail::tracking({&a}));
    if (out.requires_grad()) {
        BasicTape<Scalar>::active()->record(out.node(), [an = a.node()](const Matrix<Scalar>& g) {
            an->accumulate(g.cwiseQuotient(an->value));
        });
    }
    return out;
}

/// Row-wise softmax, max-shifted.
template <typename Scalar>
BasicTensor<Scalar> softmax(const BasicTensor<Scalar>& a) {
    auto out = detail::make_result<Scalar>(detail::softmax_rows(a.value()), detail::tracking({&a}));
    if (out.requires_grad()) {
        BasicTape<Scalar>::active()->record(out.node(), [an = a.node(), on = out.node().get()](const Matrix<Scalar>& g) {
            const auto& s = on->value;
            Eigen::Matrix<Scalar, Eigen::Dynamic, 1> dot = g.cwiseProduct(s).rowwise().sum();
            Matrix<Scalar> centered = g.colwise() - dot;
            an->accumulate(s.cwiseProduct(centered));
        });
    }
    return out;
}

/// Row-wise log-softmax via log-sum-exp.
template <typename Scalar>
BasicTensor<Scalar> log_softmax(const BasicTensor<Scalar>& a) {
    auto out = detail::make_result<Scalar>(detail::log_softmax_rows(a.value()), detail::tracking({&a}));
    if (out.requires_grad()) {
        BasicTape<Scalar>::active()->record(out.node(), [an = a.node(), on = out.node().get()](const Matrix<Scalar>& g) {
            Matrix<Scalar> s = on->value.array().exp().matrix();
            Eigen::Matrix<Scalar, Eigen::Dynamic, 1> total = g.rowwise().sum();
            s.array().colwise() *= total.array();
            an->accumulate(g - s);
        });
    }
    return out;
}

/// Sum of all entries, as a 1x1 tensor.
template <typename Scalar>
BasicTensor<Scalar> sum(const BasicTensor<Scalar>& a) {
    auto out = BasicTensor<Scalar>::scalar(a.value().sum(), detail::tracking({&a}));
    if (out.requires_grad()) {
        BasicTape<Scalar>::active()->record(out.node(), [an = a.node()](const Matrix<Scalar>& g) {
            an->accumulate(Matrix<Scalar>::Constant(an->value.rows(), an->value.cols(), g(0, 0)));
        });
    }
    return out;
}

template <typename Scalar>
BasicTensor<Scalar> mean(const BasicTensor<Scalar>& a) {
    if (a.size() == 0) throw ShapeError("mean(): empty tensor");
    auto out = BasicTensor<Scalar>::scalar(a.value().mean(), detail::tracking({&a}));
    if (out.requires_grad()) {
        BasicTape<Scalar>::active()->record(out.node(), [an = a.node()](const Matrix<Scalar>& g) {
            Scalar n = static_cast<Scalar>(an->value.size());
            an->accumulate(Matrix<Scalar>::Constant(an->value.rows(), an->value.cols(), g(0, 0) / n));
        });
    }
    return out;
}

/// Per-row sum: (B x n) -> (B x 1).
template <typename Scalar>
BasicTensor<Scalar> row_sum(const BasicTensor<Scalar>& a) {
    auto out = detail::make_result<Scalar>(a.value().rowwise().sum(), detail::tracking({&a}));
    if (out.requires_grad()) {
        BasicTape<Scalar>::active()->record(out.node(), [an = a.node()](const Matrix<Scalar>& g) {
            an->accumulate(g.replicate(1, an->value.cols()));
        });
    }
    return out;
}

/// Euclidean norm of all entries; gradient at the origin is taken as 0.
template <typename Scalar>
BasicTensor<Scalar> l2_norm(const BasicTensor<Scalar>& a) {
    Scalar n = a.value().norm();
    auto out = BasicTensor<Scalar>::scalar(n, detail::tracking({&a}));
    if (out.requires_grad()) {
        BasicTape<Scalar>::active()->record(out.node(), [an = a.node(), n](const Matrix<Scalar>& g) {
            if (n == Scalar(0)) {
                an->accumulate(Matrix<Scalar>::Zero(an->value.rows(), an->value.cols()));
                return;
            }
            an->accumulate(an->value * (g(0, 0) / n));
        });
    }
    return out;
}

template <typename Scalar>
BasicTensor<Scalar> scale(const BasicTensor<Scalar>& a, Scalar s) {
    auto out = detail::make_result<Scalar>(a.value() * s, detail::tracking({&a}));
    if (out.requires_grad()) {
        BasicTape<Scalar>::active()->record(out.node(), [an = a.node(), s](const Matrix<Scalar>& g) {
            an->accumulate(g * s);
        });
    }
    return out;
}

template <typename Scalar>
BasicTensor<Scalar> add_scalar(const BasicTensor<Scalar>& a, Scalar s) {
    auto out = detail::make_result<Scalar>((a.value().array() + s).matrix(), detail::tracking({&a}));
    if (out.requires_grad()) {
        BasicTape<Scalar>::active()->record(out.node(), [an = a.node()](const Matrix<Scalar>& g) { an->accumulate(g); });
    }
    return out;
}

namespace detail {

template <typename Scalar>
void check_labels(const char* op, const BasicTensor<Scalar>& a, std::span<const int> labels) {
    if (static_cast<Index>(labels.size()) != a.rows())
        throw ShapeError(std::string(op) + ": " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(a.rows()) + " rows");
    for (int y : labels)
        if (y < 0 || y >= a.cols())
            throw ConfigError(std::string(op) + ": label " + std::to_string(y) + " outside [0, " +
                              std::to_string(a.cols()) + ")");
}

}  // namespace detail

/// Selects a(i, labels[i]) per row: (B x C) -> (B x 1).
template <typename Scalar>
BasicTensor<Scalar> pick(const BasicTensor<Scalar>& a, std::span<const int> labels) {
    detail::check_labels("pick", a, labels);
    Matrix<Scalar> v(a.rows(), 1);
    for (Index i = 0; i < a.rows(); ++i) v(i, 0) = a.value()(i, labels[i]);
    auto out = detail::make_result<Scalar>(std::move(v), detail::tracking({&a}));
    if (out.requires_grad()) {
        std::vector<int> ys(labels.begin(), labels.end());
        BasicTape<Scalar>::active()->record(out.node(), [an = a.node(), ys](const Matrix<Scalar>& g) {
            Matrix<Scalar> d = Matrix<Scalar>::Zero(an->value.rows(), an->value.cols());
            for (Index i = 0; i < d.rows(); ++i) d(i, ys[i]) = g(i, 0);
            an->accumulate(d);
        });
    }
    return out;
}

/// max over j != labels[i] of a(i, j): (B x C) -> (B x 1). The gradient goes
/// to the first maximizing column.
template <typename Scalar>
BasicTensor<Scalar> max_excluding(const BasicTensor<Scalar>& a, std::span<const int> labels) {
    detail::check_labels("max_excluding", a, labels);
    if (a.cols() < 2) throw ShapeError("max_excluding: need at least 2 columns, got " + shape_string(a.shape()));
    Matrix<Scalar> v(a.rows(), 1);
    std::vector<Index> arg(a.rows());
    for (Index i = 0; i < a.rows(); ++i) {
        Index best = -1;
        for (Index j = 0; j < a.cols(); ++j) {
            if (j == labels[i]) continue;
            if (best < 0 || a.value()(i, j) > a.value()(i, best)) best = j;
        }
        arg[i] = best;
        v(i, 0) = a.value()(i, best);
    }
    auto out = detail::make_result<Scalar>(std::move(v), detail::tracking({&a}));
    if (out.requires_grad()) {
        BasicTape<Scalar>::active()->record(out.node(), [an = a.node(), arg](const Matrix<Scalar>& g) {
            Matrix<Scalar> d = Matrix<Scalar>::Zero(an->value.rows(), an->value.cols());
            for (Index i = 0; i < d.rows(); ++i) d(i, arg[i]) = g(i, 0);
            an->accumulate(d);
        });
    }
    return out;
}

template <typename Scalar>
BasicTensor<Scalar> operator+(const BasicTensor<Scalar>& a, const BasicTensor<Scalar>& b) {
    return add(a, b);
}
template <typename Scalar>
BasicTensor<Scalar> operator-(const BasicTensor<Scalar>& a, const BasicTensor<Scalar>& b) {
    return sub(a, b);
}
template <typename Scalar>
BasicTensor<Scalar> operator*(const BasicTensor<Scalar>& a, const BasicTensor<Scalar>& b) {
    return mul(a, b);
}

}  // namespace noilin
