// Copyright 2026 The specfuse Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Dense 2-D tensors and a define-by-run reverse-mode differentiation tape.
//
// A Tape records every operation applied to its Vars in execution order, so
// the node list is already topologically sorted and backward() is a single
// reverse sweep. Tapes are cheap to rebuild; callers create a fresh tape for
// every forward pass.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "specfuse/errors.hpp"

namespace specfuse::numgrad {

template <typename Scalar>
using Tensor = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Tensor2 = Tensor<double>;

template <typename Scalar>
using ColumnVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

inline std::string shape_string(Eigen::Index rows, Eigen::Index cols) {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

template <typename Derived>
std::string shape_string(const Eigen::MatrixBase<Derived> &m) {
  return shape_string(m.rows(), m.cols());
}

enum class OpKind : std::uint8_t {
  kParameter,
  kConstant,
  kMatMul,
  kAdd,
  kSub,
  kMul,
  kAddRow,
  kMulCol,
  kAffine,
  kSoftplus,
  kSigmoid,
  kLog,
  kExp,
  kSqrt,
  kSquare,
  kReciprocal,
  kClamp,
  kConcatCols,
  kSliceCols,
  kCumprodExclusive,
  kSum,
  kRowSum,
  kMean,
};

const char *op_name(OpKind kind);

template <typename Scalar>
class Tape;

/// Handle to a node on a tape. Cheap to copy; valid while its tape lives.
template <typename Scalar>
struct Var {
  Tape<Scalar> *tape = nullptr;
  std::uint32_t id = 0;

  const Tensor<Scalar> &value() const { return tape->value(*this); }
  const Tensor<Scalar> &grad() const { return tape->grad(*this); }
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
};

/// Overflow-safe elementwise log(1 + exp(x)).
template <typename Scalar>
Scalar softplus_scalar(Scalar x) {
  return std::max(x, Scalar(0)) + std::log1p(std::exp(-std::abs(x)));
}

/// Overflow-safe elementwise 1 / (1 + exp(-x)).
template <typename Scalar>
Scalar sigmoid_scalar(Scalar x) {
  if (x >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-x));
  const Scalar e = std::exp(x);
  return e / (Scalar(1) + e);
}

template <typename Scalar>
class Tape {
 public:
  using Matrix = Tensor<Scalar>;
  using VarT = Var<Scalar>;

  struct Node {
    OpKind kind = OpKind::kConstant;
    std::vector<std::uint32_t> inputs;
    Matrix value;
    Matrix grad;
    Scalar p0 = 0;
    Scalar p1 = 0;
    Eigen::Index offset = 0;
    bool requires_grad = false;
  };

  Tape() { nodes_.reserve(128); }
  Tape(const Tape &) = delete;
  Tape &operator=(const Tape &) = delete;

  /// Learnable leaf: receives a gradient on backward().
  VarT parameter(Matrix value) { return leaf(std::move(value), OpKind::kParameter, true); }
  /// Fixed leaf: never receives a gradient.
  VarT constant(Matrix value) { return leaf(std::move(value), OpKind::kConstant, false); }

  const Matrix &value(VarT v) const { return nodes_.at(v.id).value; }

  /// Gradient accumulated into `v`. All-zero (of the value's shape) if
  /// backward() has not reached it.
  const Matrix &grad(VarT v) const {
    const Node &n = nodes_.at(v.id);
    if (n.grad.size() == 0) {
      zero_cache_.setZero(n.value.rows(), n.value.cols());
      return zero_cache_;
    }
    return n.grad;
  }

  std::size_t size() const { return nodes_.size(); }
  const Node &node(VarT v) const { return nodes_.at(v.id); }

  /// Propagates d(loss)/d(node) to every node that depends on a parameter.
  /// Parameter gradients accumulate across calls; interior gradients are
  /// recomputed each call.
  void backward(VarT loss) {
    check_owner(loss);
    Node &root = nodes_[loss.id];
    if (root.value.rows() != 1 || root.value.cols() != 1) {
      throw ContractError("backward requires a scalar (1x1) loss, got " +
                          shape_string(root.value));
    }
    for (std::uint32_t i = 0; i <= loss.id; ++i) {
      Node &n = nodes_[i];
      if (!n.requires_grad) continue;
      if (n.kind != OpKind::kParameter || n.grad.size() == 0) {
        n.grad.setZero(n.value.rows(), n.value.cols());
      }
    }
    if (!root.requires_grad) return;
    root.grad(0, 0) += Scalar(1);
    for (std::int64_t i = loss.id; i >= 0; --i) {
      Node &n = nodes_[static_cast<std::uint32_t>(i)];
      if (!n.requires_grad || n.kind == OpKind::kParameter) continue;
      propagate(n);
    }
  }

  void zero_grad() {
    for (Node &n : nodes_) {
      if (n.grad.size() != 0) n.grad.setZero();
    }
  }

  // --- recording primitives, used by the free functions below -------------

  VarT record(OpKind kind, std::vector<std::uint32_t> inputs, Matrix value, Scalar p0 = 0,
              Scalar p1 = 0, Eigen::Index offset = 0) {
    if (!value.allFinite()) {
      throw NumericalError(std::string("non-finite value produced by ") + op_name(kind));
    }
    Node n;
    n.kind = kind;
    n.requires_grad = false;
    for (std::uint32_t in : inputs) n.requires_grad = n.requires_grad || nodes_[in].requires_grad;
    n.inputs = std::move(inputs);
    n.value = std::move(value);
    n.p0 = p0;
    n.p1 = p1;
    n.offset = offset;
    nodes_.push_back(std::move(n));
    return VarT{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
  }

  void check_owner(VarT v) const {
    if (v.tape != this || v.id >= nodes_.size()) {
      throw ContractError("variable does not belong to this tape");
    }
  }

 private:
  VarT leaf(Matrix value, OpKind kind, bool requires_grad) {
    if (!value.allFinite()) throw NumericalError("non-finite leaf value");
    Node n;
    n.kind = kind;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    nodes_.push_back(std::move(n));
    return VarT{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
  }

  Node &in(const Node &n, std::size_t k) { return nodes_[n.inputs[k]]; }

  void propagate(const Node &n) {
    const Matrix &g = n.grad;
    switch (n.kind) {
      case OpKind::kParameter:
      case OpKind::kConstant:
        break;
      case OpKind::kMatMul: {
        Node &a = in(n, 0);
        Node &b = in(n, 1);
        if (a.requires_grad) a.grad.noalias() += g * b.value.transpose();
        if (b.requires_grad) b.grad.noalias() += a.value.transpose() * g;
        break;
      }
      case OpKind::kAdd: {
        for (std::size_t k = 0; k < 2; ++k) {
          Node &a = in(n, k);
          if (a.requires_grad) a.grad += g;
        }
        break;
      }
      case OpKind::kSub: {
        Node &a = in(n, 0);
        Node &b = in(n, 1);
        if (a.requires_grad) a.grad += g;
        if (b.requires_grad) b.grad -= g;
        break;
      }
      case OpKind::kMul: {
        Node &a = in(n, 0);
        Node &b = in(n, 1);
        if (a.requires_grad) a.grad.array() += g.array() * b.value.array();
        if (b.requires_grad) b.grad.array() += g.array() * a.value.array();
        break;
      }
      case OpKind::kAddRow: {
        Node &a = in(n, 0);
        Node &row = in(n, 1);
        if (a.requires_grad) a.grad += g;
        if (row.requires_grad) row.grad += g.colwise().sum();
        break;
      }
      case OpKind::kMulCol: {
        Node &a = in(n, 0);
        Node &col = in(n, 1);
        if (a.requires_grad) {
          a.grad.array() += g.array().colwise() * col.value.col(0).array();
        }
        if (col.requires_grad) {
          col.grad.col(0) += (g.array() * a.value.array()).rowwise().sum().matrix();
        }
        break;
      }
      case OpKind::kAffine: {
        Node &a = in(n, 0);
        if (a.requires_grad) a.grad += n.p0 * g;
        break;
      }
      case OpKind::kSoftplus: {
        Node &a = in(n, 0);
        if (a.requires_grad) {
          a.grad.array() += g.array() * a.value.unaryExpr([](Scalar x) {
                                              return sigmoid_scalar(x);
                                            }).array();
        }
        break;
      }
      case OpKind::kSigmoid: {
        Node &a = in(n, 0);
        if (a.requires_grad) {
          a.grad.array() += g.array() * n.value.array() * (Scalar(1) - n.value.array());
        }
        break;
      }
      case OpKind::kLog: {
        Node &a = in(n, 0);
        if (a.requires_grad) a.grad.array() += g.array() / a.value.array();
        break;
      }
      case OpKind::kExp: {
        Node &a = in(n, 0);
        if (a.requires_grad) a.grad.array() += g.array() * n.value.array();
        break;
      }
      case OpKind::kSqrt: {
        Node &a = in(n, 0);
        if (a.requires_grad) a.grad.array() += g.array() / (Scalar(2) * n.value.array());
        break;
      }
      case OpKind::kSquare: {
        Node &a = in(n, 0);
        if (a.requires_grad) a.grad.array() += Scalar(2) * g.array() * a.value.array();
        break;
      }
      case OpKind::kReciprocal: {
        Node &a = in(n, 0);
        if (a.requires_grad) a.grad.array() -= g.array() * n.value.array().square();
        break;
      }
      case OpKind::kClamp: {
        Node &a = in(n, 0);
        if (a.requires_grad) {
          const Scalar lo = n.p0;
          const Scalar hi = n.p1;
          a.grad.array() +=
              (a.value.array() >= lo && a.value.array() <= hi).template cast<Scalar>() * g.array();
        }
        break;
      }
      case OpKind::kConcatCols: {
        Eigen::Index col = 0;
        for (std::size_t k = 0; k < n.inputs.size(); ++k) {
          Node &a = in(n, k);
          const Eigen::Index w = a.value.cols();
          if (a.requires_grad) a.grad += g.middleCols(col, w);
          col += w;
        }
        break;
      }
      case OpKind::kSliceCols: {
        Node &a = in(n, 0);
        if (a.requires_grad) a.grad.middleCols(n.offset, g.cols()) += g;
        break;
      }
      case OpKind::kCumprodExclusive: {
        // out_j = prod_{k<j} x_k. d out / d x_k is accumulated without
        // division using r_k = sum_{j>k} g_j prod_{k<i<j} x_i.
        Node &a = in(n, 0);
        if (!a.requires_grad) break;
        const Eigen::Index cols = g.cols();
        for (Eigen::Index r = 0; r < g.rows(); ++r) {
          Scalar acc = 0;
          for (Eigen::Index k = cols - 2; k >= 0; --k) {
            acc = g(r, k + 1) + (k + 1 < cols - 1 ? a.value(r, k + 1) * acc : Scalar(0));
            a.grad(r, k) += n.value(r, k) * acc;
          }
        }
        break;
      }
      case OpKind::kSum: {
        Node &a = in(n, 0);
        if (a.requires_grad) a.grad.array() += g(0, 0);
        break;
      }
      case OpKind::kRowSum: {
        Node &a = in(n, 0);
        if (a.requires_grad) a.grad.colwise() += g.col(0);
        break;
      }
      case OpKind::kMean: {
        Node &a = in(n, 0);
        if (a.requires_grad) a.grad.array() += g(0, 0) / Scalar(a.value.size());
        break;
      }
    }
  }

  std::vector<Node> nodes_;
  mutable Matrix zero_cache_;
};

inline const char *op_name(OpKind kind) {
  switch (kind) {
    case OpKind::kParameter: return "parameter";
    case OpKind::kConstant: return "constant";
    case OpKind::kMatMul: return "matmul";
    case OpKind::kAdd: return "add";
    case OpKind::kSub: return "sub";
    case OpKind::kMul: return "mul";
    case OpKind::kAddRow: return "add_row";
    case OpKind::kMulCol: return "mul_col";
    case OpKind::kAffine: return "affine";
    case OpKind::kSoftplus: return "softplus";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kLog: return "log";
    case OpKind::kExp: return "exp";
    case OpKind::kSqrt: return "sqrt";
    case OpKind::kSquare: return "square";
    case OpKind::kReciprocal: return "reciprocal";
    case OpKind::kClamp: return "clamp";
    case OpKind::kConcatCols: return "concat_cols";
    case OpKind::kSliceCols: return "slice_cols";
    case OpKind::kCumprodExclusive: return "cumprod_exclusive";
    case OpKind::kSum: return "sum";
    case OpKind::kRowSum: return "row_sum";
    case OpKind::kMean: return "mean";
  }
  return "unknown";
}

namespace detail {

template <typename Scalar>
Tape<Scalar> &same_tape(Var<Scalar> a, Var<Scalar> b) {
  if (a.tape == nullptr || a.tape != b.tape) {
    throw ContractError("operands belong to different tapes");
  }
  return *a.tape;
}

template <typename Scalar>
void require_same_shape(const char *op, Var<Scalar> a, Var<Scalar> b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         shape_string(a.rows(), a.cols()) + " vs " +
                         shape_string(b.rows(), b.cols()));
  }
}

template <typename Scalar, typename F>
Var<Scalar> unary(OpKind kind, Var<Scalar> x, F &&f) {
  Tensor<Scalar> out = x.value().unaryExpr(std::forward<F>(f));
  return x.tape->record(kind, {x.id}, std::move(out));
}

}  // namespace detail

// --- differentiable operations ----------------------------------------------

template <typename Scalar>
Var<Scalar> matmul(Var<Scalar> a, Var<Scalar> b) {
  Tape<Scalar> &t = detail::same_tape(a, b);
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: cannot multiply " + shape_string(a.rows(), a.cols()) + " by " +
                         shape_string(b.rows(), b.cols()));
  }
  Tensor<Scalar> out = a.value() * b.value();
  return t.record(OpKind::kMatMul, {a.id, b.id}, std::move(out));
}

template <typename Scalar>
Var<Scalar> add(Var<Scalar> a, Var<Scalar> b) {
  Tape<Scalar> &t = detail::same_tape(a, b);
  detail::require_same_shape("add", a, b);
  return t.record(OpKind::kAdd, {a.id, b.id}, a.value() + b.value());
}

template <typename Scalar>
Var<Scalar> sub(Var<Scalar> a, Var<Scalar> b) {
  Tape<Scalar> &t = detail::same_tape(a, b);
  detail::require_same_shape("sub", a, b);
  return t.record(OpKind::kSub, {a.id, b.id}, a.value() - b.value());
}

/// Elementwise (Hadamard) product.
template <typename Scalar>
Var<Scalar> mul(Var<Scalar> a, Var<Scalar> b) {
  Tape<Scalar> &t = detail::same_tape(a, b);
  detail::require_same_shape("mul", a, b);
  return t.record(OpKind::kMul, {a.id, b.id}, a.value().cwiseProduct(b.value()));
}

/// a + 1 * row: adds a 1 x n row to every row of a.
template <typename Scalar>
Var<Scalar> add_row(Var<Scalar> a, Var<Scalar> row) {
  Tape<Scalar> &t = detail::same_tape(a, row);
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw DimensionError("add_row: cannot broadcast " + shape_string(row.rows(), row.cols()) +
                         " over " + shape_string(a.rows(), a.cols()));
  }
  Tensor<Scalar> out = a.value().rowwise() + row.value().row(0);
  return t.record(OpKind::kAddRow, {a.id, row.id}, std::move(out));
}

/// Scales row i of a by col(i).
template <typename Scalar>
Var<Scalar> mul_col(Var<Scalar> a, Var<Scalar> col) {
  Tape<Scalar> &t = detail::same_tape(a, col);
  if (col.cols() != 1 || col.rows() != a.rows()) {
    throw DimensionError("mul_col: cannot broadcast " + shape_string(col.rows(), col.cols()) +
                         " over " + shape_string(a.rows(), a.cols()));
  }
  Tensor<Scalar> out = a.value().array().colwise() * col.value().col(0).array();
  return t.record(OpKind::kMulCol, {a.id, col.id}, std::move(out));
}

/// scale * x + shift, elementwise.
template <typename Scalar>
Var<Scalar> affine(Var<Scalar> x, Scalar scale, Scalar shift) {
  Tensor<Scalar> out = (scale * x.value().array() + shift).matrix();
  return x.tape->record(OpKind::kAffine, {x.id}, std::move(out), scale, shift);
}

template <typename Scalar>
Var<Scalar> softplus(Var<Scalar> x) {
  return detail::unary(OpKind::kSoftplus, x, [](Scalar v) { return softplus_scalar(v); });
}

template <typename Scalar>
Var<Scalar> sigmoid(Var<Scalar> x) {
  return detail::unary(OpKind::kSigmoid, x, [](Scalar v) { return sigmoid_scalar(v); });
}

template <typename Scalar>
Var<Scalar> log(Var<Scalar> x) {
  if ((x.value().array() <= Scalar(0)).any()) throw NumericalError("log of non-positive value");
  return detail::unary(OpKind::kLog, x, [](Scalar v) { return std::log(v); });
}

template <typename Scalar>
Var<Scalar> exp(Var<Scalar> x) {
  return detail::unary(OpKind::kExp, x, [](Scalar v) { return std::exp(v); });
}

template <typename Scalar>
Var<Scalar> sqrt(Var<Scalar> x) {
  if ((x.value().array() <= Scalar(0)).any()) {
    throw NumericalError("sqrt requires strictly positive input");
  }
  return detail::unary(OpKind::kSqrt, x, [](Scalar v) { return std::sqrt(v); });
}

template <typename Scalar>
Var<Scalar> square(Var<Scalar> x) {
  return detail::unary(OpKind::kSquare, x, [](Scalar v) { return v * v; });
}

template <typename Scalar>
Var<Scalar> reciprocal(Var<Scalar> x) {
  if ((x.value().array() == Scalar(0)).any()) throw NumericalError("reciprocal of zero");
  return detail::unary(OpKind::kReciprocal, x, [](Scalar v) { return Scalar(1) / v; });
}

/// Clamps into [lo, hi]; the gradient is passed only where the input lies in range.
template <typename Scalar>
Var<Scalar> clamp(Var<Scalar> x, Scalar lo, Scalar hi) {
  Tensor<Scalar> out = x.value().cwiseMax(lo).cwiseMin(hi);
  return x.tape->record(OpKind::kClamp, {x.id}, std::move(out), lo, hi);
}

template <typename Scalar>
Var<Scalar> concat_cols(std::span<const Var<Scalar>> parts) {
  if (parts.empty()) throw ContractError("concat_cols: no operands");
  Tape<Scalar> &t = *parts.front().tape;
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  std::vector<std::uint32_t> ids;
  ids.reserve(parts.size());
  for (const Var<Scalar> &p : parts) {
    detail::same_tape(parts.front(), p);
    if (p.rows() != rows) {
      throw DimensionError("concat_cols: row mismatch " + std::to_string(rows) + " vs " +
                           std::to_string(p.rows()));
    }
    cols += p.cols();
    ids.push_back(p.id);
  }
  Tensor<Scalar> out(rows, cols);
  Eigen::Index at = 0;
  for (const Var<Scalar> &p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  return t.record(OpKind::kConcatCols, std::move(ids), std::move(out));
}

template <typename Scalar>
Var<Scalar> concat_cols(std::initializer_list<Var<Scalar>> parts) {
  return concat_cols(std::span<const Var<Scalar>>(parts.begin(), parts.size()));
}

template <typename Scalar>
Var<Scalar> slice_cols(Var<Scalar> x, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > x.cols()) {
    throw DimensionError("slice_cols: columns [" + std::to_string(start) + ", " +
                         std::to_string(start + count) + ") out of range for " +
                         shape_string(x.rows(), x.cols()));
  }
  Tensor<Scalar> out = x.value().middleCols(start, count);
  return x.tape->record(OpKind::kSliceCols, {x.id}, std::move(out), 0, 0, start);
}

/// Row-wise exclusive cumulative product: out(i, j) = prod_{k<j} x(i, k); out(i, 0) = 1.
template <typename Scalar>
Var<Scalar> cumprod_exclusive(Var<Scalar> x) {
  const Tensor<Scalar> &v = x.value();
  Tensor<Scalar> out(v.rows(), v.cols());
  for (Eigen::Index r = 0; r < v.rows(); ++r) {
    Scalar running = 1;
    for (Eigen::Index c = 0; c < v.cols(); ++c) {
      out(r, c) = running;
      running *= v(r, c);
    }
  }
  return x.tape->record(OpKind::kCumprodExclusive, {x.id}, std::move(out));
}

template <typename Scalar>
Var<Scalar> sum(Var<Scalar> x) {
  Tensor<Scalar> out(1, 1);
  out(0, 0) = x.value().sum();
  return x.tape->record(OpKind::kSum, {x.id}, std::move(out));
}

/// n x m -> n x 1.
template <typename Scalar>
Var<Scalar> row_sum(Var<Scalar> x) {
  Tensor<Scalar> out = x.value().rowwise().sum();
  return x.tape->record(OpKind::kRowSum, {x.id}, std::move(out));
}

template <typename Scalar>
Var<Scalar> mean(Var<Scalar> x) {
  if (x.value().size() == 0) throw ContractError("mean of empty tensor");
  Tensor<Scalar> out(1, 1);
  out(0, 0) = x.value().mean();
  return x.tape->record(OpKind::kMean, {x.id}, std::move(out));
}

template <typename Scalar>
Var<Scalar> operator+(Var<Scalar> a, Var<Scalar> b) {
  return add(a, b);
}
template <typename Scalar>
Var<Scalar> operator-(Var<Scalar> a, Var<Scalar> b) {
  return sub(a, b);
}
template <typename Scalar>
Var<Scalar> operator-(Var<Scalar> a) {
  return affine(a, Scalar(-1), Scalar(0));
}
template <typename Scalar>
Var<Scalar> operator*(Scalar s, Var<Scalar> a) {
  return affine(a, s, Scalar(0));
}

/// Squared Frobenius norm as a 1x1 node.
template <typename Scalar>
Var<Scalar> frobenius_sq(Var<Scalar> x) {
  return sum(square(x));
}

// --- finite-difference gradient check ---------------------------------------

template <typename Scalar>
struct GradCheckReport {
  Scalar max_rel_error = 0;
  /// Worst relative error per parameter block, in the order the blocks were passed.
  std::vector<Scalar> block_max_rel_error;
  std::size_t worst_block = 0;
  Eigen::Index worst_index = 0;
};

template <typename Scalar>
struct GradCheckOptions {
  Scalar step = Scalar(1e-5);
  /// Applied to the analytic gradients before comparison. Test hook.
  std::function<void(std::vector<Tensor<Scalar>> &)> tamper;
};

/// Objective signature: builds a scalar loss on `tape` from one Var per parameter block.
template <typename Scalar>
using TapeObjective = std::function<Var<Scalar>(Tape<Scalar> &, std::span<const Var<Scalar>>)>;

/// Compares reverse-mode gradients of `objective` against central differences
/// for every coordinate of every parameter block. The relative error of a
/// coordinate is |a - n| / max(|a|, |n|, 1e-8).
template <typename Scalar>
GradCheckReport<Scalar> grad_check(const TapeObjective<Scalar> &objective,
                                   std::vector<Tensor<Scalar>> params,
                                   const GradCheckOptions<Scalar> &options = {}) {
  if (!(options.step > Scalar(0))) throw ContractError("grad_check step must be positive");

  auto evaluate = [&](bool with_grad, std::vector<Tensor<Scalar>> *grads) {
    Tape<Scalar> tape;
    std::vector<Var<Scalar>> leaves;
    leaves.reserve(params.size());
    for (const Tensor<Scalar> &p : params) leaves.push_back(tape.parameter(p));
    Var<Scalar> loss;
    try {
      loss = objective(tape, leaves);
    } catch (const NumericalError &e) {
      throw NumericalError(std::string("grad_check: objective evaluation failed: ") + e.what());
    }
    const Scalar value = loss.value()(0, 0);
    if (!std::isfinite(value)) throw NumericalError("grad_check: non-finite objective value");
    if (with_grad) {
      tape.backward(loss);
      grads->clear();
      for (const Var<Scalar> &leaf : leaves) grads->push_back(leaf.grad());
    }
    return value;
  };

  std::vector<Tensor<Scalar>> analytic;
  evaluate(true, &analytic);
  if (options.tamper) options.tamper(analytic);

  GradCheckReport<Scalar> report;
  report.block_max_rel_error.assign(params.size(), Scalar(0));
  for (std::size_t b = 0; b < params.size(); ++b) {
    for (Eigen::Index i = 0; i < params[b].size(); ++i) {
      Scalar &coord = params[b].data()[i];
      const Scalar saved = coord;
      coord = saved + options.step;
      const Scalar plus = evaluate(false, nullptr);
      coord = saved - options.step;
      const Scalar minus = evaluate(false, nullptr);
      coord = saved;
      const Scalar numeric = (plus - minus) / (Scalar(2) * options.step);
      const Scalar a = analytic[b].data()[i];
      const Scalar denom = std::max({std::abs(a), std::abs(numeric), Scalar(1e-8)});
      const Scalar rel = std::abs(a - numeric) / denom;
      report.block_max_rel_error[b] = std::max(report.block_max_rel_error[b], rel);
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_block = b;
        report.worst_index = i;
      }
    }
  }
  return report;
}

}  // namespace specfuse::numgrad
