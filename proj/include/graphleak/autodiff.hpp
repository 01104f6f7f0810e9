/*
 * Copyright 2026 The graphleak Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Reverse-mode differentiation over an append-only expression graph.
//
// Every primitive appends one node holding its forward value. Backward
// formulas are written with the same primitives, so the adjoints produced by
// ExpressionGraph::gradient_nodes() are ordinary nodes that can be
// differentiated again. That is what lets an attacker minimise a distance
// between two gradients.
//
// Usage:
//
//   ExpressionGraph g;
//   Var x = g.variable(Tensor::scalar(2.0));
//   Var y = x * x * x;
//   Var dy = g.gradient_nodes(y, {x})[0];   // 3x^2, still on the graph
//   Tensor d2y = g.gradients(dy, {x})[0];   // 6x = 12

#include <Eigen/Core>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "graphleak/tensor.hpp"

namespace graphleak {

enum class Op : std::uint8_t {
  kVariable,
  kConstant,
  kMatMul,
  kTranspose,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kScale,
  kAddScalar,
  kSigmoid,
  kRelu,
  kExp,
  kLog,
  kSquare,
  kSqrt,
  kRowSum,
  kColSum,
  kSum,
  kMean,
  kBroadcast,
  kSoftmaxRows,
  kLogSoftmaxRows,
  kSoftmaxCrossEntropy,
  kDiag,
  kDiagEmbed,
};

using NodeId = std::uint32_t;
inline constexpr NodeId kNoParent = std::numeric_limits<NodeId>::max();

struct Node {
  Op op = Op::kConstant;
  std::array<NodeId, 2> parents{kNoParent, kNoParent};
  Tensor value;
  double attr = 0.0;        // kScale factor, kAddScalar offset
  std::size_t index = 0;    // kSoftmaxCrossEntropy label
};

class ExpressionGraph;

/// Handle to a node of an ExpressionGraph. Cheap to copy; valid while the
/// graph is alive and has not been truncated below this node.
class Var {
 public:
  Var() = default;
  Var(ExpressionGraph* graph, NodeId id) : graph_(graph), id_(id) {}

  ExpressionGraph& graph() const {
    if (graph_ == nullptr) throw Error("use of unbound Var");
    return *graph_;
  }
  ExpressionGraph* graph_ptr() const noexcept { return graph_; }
  NodeId id() const noexcept { return id_; }
  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }

 private:
  ExpressionGraph* graph_ = nullptr;
  NodeId id_ = 0;
};

namespace detail {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline Tensor matmul_value(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul " + a.shape_string() + " x " + b.shape_string());
  }
  Tensor out(a.rows(), b.cols());
  if (out.size() == 0) return out;
  if (a.cols() == 0) return out;
  Eigen::Map<const RowMatrix> ma(a.values().data(), a.rows(), a.cols());
  Eigen::Map<const RowMatrix> mb(b.values().data(), b.rows(), b.cols());
  Eigen::Map<RowMatrix> mo(out.values().data(), out.rows(), out.cols());
  mo.noalias() = ma * mb;
  return out;
}

template <typename F>
Tensor map_value(const Tensor& a, F&& f) {
  Tensor out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i]);
  return out;
}

template <typename F>
Tensor zip_value(const Tensor& a, const Tensor& b, const char* what, F&& f) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(what) + " " + a.shape_string() + " vs " + b.shape_string());
  }
  Tensor out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i], b[i]);
  return out;
}

inline Tensor softmax_rows_value(const Tensor& a) {
  Tensor out(a.rows(), a.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < a.cols(); ++c) m = std::max(m, a(r, c));
    double z = 0.0;
    for (std::size_t c = 0; c < a.cols(); ++c) {
      out(r, c) = std::exp(a(r, c) - m);
      z += out(r, c);
    }
    for (std::size_t c = 0; c < a.cols(); ++c) out(r, c) /= z;
  }
  return out;
}

inline Tensor log_softmax_rows_value(const Tensor& a) {
  Tensor out(a.rows(), a.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < a.cols(); ++c) m = std::max(m, a(r, c));
    double z = 0.0;
    for (std::size_t c = 0; c < a.cols(); ++c) z += std::exp(a(r, c) - m);
    const double lse = m + std::log(z);
    for (std::size_t c = 0; c < a.cols(); ++c) out(r, c) = a(r, c) - lse;
  }
  return out;
}

}  // namespace detail

class ExpressionGraph {
 public:
  ExpressionGraph() { nodes_.reserve(256); }
  ExpressionGraph(const ExpressionGraph&) = delete;
  ExpressionGraph& operator=(const ExpressionGraph&) = delete;

  /// Differentiable leaf.
  Var variable(Tensor value) { return push(Op::kVariable, {kNoParent, kNoParent}, std::move(value)); }

  /// Leaf that never receives an adjoint.
  Var constant(Tensor value) { return push(Op::kConstant, {kNoParent, kNoParent}, std::move(value)); }

  std::size_t size() const noexcept { return nodes_.size(); }
  const Node& node(NodeId id) const { return nodes_.at(id); }
  const Tensor& value(NodeId id) const { return nodes_.at(id).value; }

  /// Appends a node. Used by the primitives below; callers normally do not
  /// need it directly.
  Var push(Op op, std::array<NodeId, 2> parents, Tensor value, double attr = 0.0,
           std::size_t index = 0) {
    for (NodeId p : parents) {
      if (p != kNoParent && p >= nodes_.size()) throw Error("parent node out of range");
    }
    Node n;
    n.op = op;
    n.parents = parents;
    n.value = std::move(value);
    n.attr = attr;
    n.index = index;
    nodes_.push_back(std::move(n));
    return Var(this, static_cast<NodeId>(nodes_.size() - 1));
  }

  /// d(root)/d(wrt[i]) as graph nodes, so they can be differentiated again.
  /// Targets that do not influence root get a zero constant of their shape.
  std::vector<Var> gradient_nodes(const Var& root, std::span<const Var> wrt);
  std::vector<Var> gradient_nodes(const Var& root, std::initializer_list<Var> wrt) {
    return gradient_nodes(root, std::span<const Var>(wrt.begin(), wrt.size()));
  }

  /// First-order gradients as plain values. The adjoint nodes are discarded
  /// afterwards, so the graph is left exactly as it was.
  std::vector<Tensor> gradients(const Var& root, std::span<const Var> wrt) {
    const std::size_t mark = nodes_.size();
    std::vector<Var> nodes = gradient_nodes(root, wrt);
    std::vector<Tensor> out;
    out.reserve(nodes.size());
    for (const Var& v : nodes) out.push_back(nodes_[v.id()].value);
    nodes_.erase(nodes_.begin() + static_cast<std::ptrdiff_t>(mark), nodes_.end());
    return out;
  }
  std::vector<Tensor> gradients(const Var& root, std::initializer_list<Var> wrt) {
    return gradients(root, std::span<const Var>(wrt.begin(), wrt.size()));
  }

  void check_owned(const Var& v) const {
    if (v.graph_ptr() != this) throw Error("variable belongs to a different graph");
    if (v.id() >= nodes_.size()) throw Error("variable is not in this graph");
  }

 private:
  std::vector<Var> backward_step(NodeId id, const Var& adjoint);

  std::vector<Node> nodes_;
};

inline const Tensor& Var::value() const { return graph().value(id_); }

// ---------------------------------------------------------------------------
// Primitives

namespace detail {

inline ExpressionGraph& common_graph(const Var& a, const Var& b) {
  if (a.graph_ptr() != b.graph_ptr()) throw Error("operands belong to different graphs");
  return a.graph();
}

}  // namespace detail

inline Var matmul(const Var& a, const Var& b) {
  auto& g = detail::common_graph(a, b);
  return g.push(Op::kMatMul, {a.id(), b.id()}, detail::matmul_value(a.value(), b.value()));
}

inline Var transpose(const Var& a) {
  return a.graph().push(Op::kTranspose, {a.id(), kNoParent}, transposed(a.value()));
}

inline Var operator+(const Var& a, const Var& b) {
  auto& g = detail::common_graph(a, b);
  return g.push(Op::kAdd, {a.id(), b.id()},
                detail::zip_value(a.value(), b.value(), "add", std::plus<>()));
}

inline Var operator-(const Var& a, const Var& b) {
  auto& g = detail::common_graph(a, b);
  return g.push(Op::kSub, {a.id(), b.id()},
                detail::zip_value(a.value(), b.value(), "subtract", std::minus<>()));
}

/// Elementwise (Hadamard) product. Use matmul() for the matrix product.
inline Var operator*(const Var& a, const Var& b) {
  auto& g = detail::common_graph(a, b);
  return g.push(Op::kMul, {a.id(), b.id()},
                detail::zip_value(a.value(), b.value(), "multiply", std::multiplies<>()));
}

inline Var operator/(const Var& a, const Var& b) {
  auto& g = detail::common_graph(a, b);
  for (double d : b.value().values()) {
    if (d == 0.0) throw Error("division by zero");
  }
  return g.push(Op::kDiv, {a.id(), b.id()},
                detail::zip_value(a.value(), b.value(), "divide", std::divides<>()));
}

inline Var scale(const Var& a, double c) {
  return a.graph().push(Op::kScale, {a.id(), kNoParent},
                        detail::map_value(a.value(), [c](double x) { return c * x; }), c);
}
inline Var operator*(double c, const Var& a) { return scale(a, c); }
inline Var operator*(const Var& a, double c) { return scale(a, c); }
inline Var operator-(const Var& a) { return scale(a, -1.0); }

inline Var add_scalar(const Var& a, double c) {
  return a.graph().push(Op::kAddScalar, {a.id(), kNoParent},
                        detail::map_value(a.value(), [c](double x) { return x + c; }), c);
}
inline Var operator+(const Var& a, double c) { return add_scalar(a, c); }
inline Var operator+(double c, const Var& a) { return add_scalar(a, c); }
inline Var operator-(double c, const Var& a) { return add_scalar(scale(a, -1.0), c); }

inline Var sigmoid(const Var& a) {
  return a.graph().push(Op::kSigmoid, {a.id(), kNoParent},
                        detail::map_value(a.value(), [](double x) { return logistic(x); }));
}

/// max(x, 0); the derivative at exactly 0 is taken as 0.
inline Var relu(const Var& a) {
  return a.graph().push(Op::kRelu, {a.id(), kNoParent},
                        detail::map_value(a.value(), [](double x) { return x > 0.0 ? x : 0.0; }));
}

inline Var exp(const Var& a) {
  return a.graph().push(Op::kExp, {a.id(), kNoParent},
                        detail::map_value(a.value(), [](double x) { return std::exp(x); }));
}

inline Var log(const Var& a) {
  for (double x : a.value().values()) {
    if (!(x > 0.0)) throw Error("log of non-positive value");
  }
  return a.graph().push(Op::kLog, {a.id(), kNoParent},
                        detail::map_value(a.value(), [](double x) { return std::log(x); }));
}

inline Var square(const Var& a) {
  return a.graph().push(Op::kSquare, {a.id(), kNoParent},
                        detail::map_value(a.value(), [](double x) { return x * x; }));
}

inline Var sqrt(const Var& a) {
  for (double x : a.value().values()) {
    if (x < 0.0) throw Error("sqrt of negative value");
  }
  return a.graph().push(Op::kSqrt, {a.id(), kNoParent},
                        detail::map_value(a.value(), [](double x) { return std::sqrt(x); }));
}

/// R x C -> R x 1
inline Var row_sum(const Var& a) {
  const Tensor& v = a.value();
  Tensor out(v.rows(), 1);
  for (std::size_t r = 0; r < v.rows(); ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < v.cols(); ++c) s += v(r, c);
    out(r, 0) = s;
  }
  return a.graph().push(Op::kRowSum, {a.id(), kNoParent}, std::move(out));
}

/// R x C -> 1 x C
inline Var col_sum(const Var& a) {
  const Tensor& v = a.value();
  Tensor out(1, v.cols());
  for (std::size_t r = 0; r < v.rows(); ++r)
    for (std::size_t c = 0; c < v.cols(); ++c) out(0, c) += v(r, c);
  return a.graph().push(Op::kColSum, {a.id(), kNoParent}, std::move(out));
}

inline Var sum(const Var& a) {
  double s = 0.0;
  for (double x : a.value().values()) s += x;
  return a.graph().push(Op::kSum, {a.id(), kNoParent}, Tensor::scalar(s));
}

inline Var mean(const Var& a) {
  const Tensor& v = a.value();
  if (v.size() == 0) throw ShapeError("mean of empty tensor");
  double s = 0.0;
  for (double x : v.values()) s += x;
  return a.graph().push(Op::kMean, {a.id(), kNoParent},
                        Tensor::scalar(s / static_cast<double>(v.size())));
}

/// Repeats a 1x1, 1xC or Rx1 tensor to R x C.
inline Var broadcast(const Var& a, std::size_t rows, std::size_t cols) {
  const Tensor& v = a.value();
  const bool ok = (v.rows() == 1 || v.rows() == rows) && (v.cols() == 1 || v.cols() == cols);
  if (!ok) {
    throw ShapeError("broadcast " + v.shape_string() + " to " +
                     Tensor::shape_string(rows, cols));
  }
  Tensor out(rows, cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c)
      out(r, c) = v(v.rows() == 1 ? 0 : r, v.cols() == 1 ? 0 : c);
  return a.graph().push(Op::kBroadcast, {a.id(), kNoParent}, std::move(out));
}

inline Var softmax_rows(const Var& a) {
  return a.graph().push(Op::kSoftmaxRows, {a.id(), kNoParent},
                        detail::softmax_rows_value(a.value()));
}

inline Var log_softmax_rows(const Var& a) {
  return a.graph().push(Op::kLogSoftmaxRows, {a.id(), kNoParent},
                        detail::log_softmax_rows_value(a.value()));
}

/// -log softmax(logits)[label] for a 1 x C row of logits.
inline Var softmax_cross_entropy(const Var& logits, std::size_t label) {
  const Tensor& v = logits.value();
  if (v.rows() != 1) throw ShapeError("cross entropy expects 1xC logits, got " + v.shape_string());
  if (label >= v.cols()) {
    throw ShapeError("label " + std::to_string(label) + " out of range for " + v.shape_string());
  }
  const Tensor ls = detail::log_softmax_rows_value(v);
  return logits.graph().push(Op::kSoftmaxCrossEntropy, {logits.id(), kNoParent},
                             Tensor::scalar(-ls(0, label)), 0.0, label);
}

/// N x N -> N x 1 column of diagonal entries.
inline Var diag(const Var& a) {
  const Tensor& v = a.value();
  if (v.rows() != v.cols()) throw ShapeError("diag of non-square " + v.shape_string());
  Tensor out(v.rows(), 1);
  for (std::size_t i = 0; i < v.rows(); ++i) out(i, 0) = v(i, i);
  return a.graph().push(Op::kDiag, {a.id(), kNoParent}, std::move(out));
}

/// N x 1 -> N x N diagonal matrix.
inline Var diag_embed(const Var& a) {
  const Tensor& v = a.value();
  if (v.cols() != 1) throw ShapeError("diag_embed expects a column, got " + v.shape_string());
  Tensor out(v.rows(), v.rows());
  for (std::size_t i = 0; i < v.rows(); ++i) out(i, i) = v(i, 0);
  return a.graph().push(Op::kDiagEmbed, {a.id(), kNoParent}, std::move(out));
}

// ---------------------------------------------------------------------------
// Backward pass

inline std::vector<Var> ExpressionGraph::backward_step(NodeId id, const Var& g) {
  const Node& n = nodes_[id];
  const Op op = n.op;
  const double attr = n.attr;
  const std::size_t index = n.index;
  const Var self(this, id);
  const Var a(this, n.parents[0]);
  const Var b(this, n.parents[1]);
  // `n` must not be used past this point: pushes below may reallocate.
  switch (op) {
    case Op::kVariable:
    case Op::kConstant:
      return {};
    case Op::kMatMul:
      return {matmul(g, transpose(b)), matmul(transpose(a), g)};
    case Op::kTranspose:
      return {transpose(g)};
    case Op::kAdd:
      return {g, g};
    case Op::kSub:
      return {g, -g};
    case Op::kMul:
      return {g * b, g * a};
    case Op::kDiv:
      return {g / b, -((g * self) / b)};
    case Op::kScale:
      return {scale(g, attr)};
    case Op::kAddScalar:
      return {g};
    case Op::kSigmoid:
      return {g * (self * (1.0 - self))};
    case Op::kRelu: {
      Tensor mask = detail::map_value(a.value(), [](double x) { return x > 0.0 ? 1.0 : 0.0; });
      return {g * constant(std::move(mask))};
    }
    case Op::kExp:
      return {g * self};
    case Op::kLog:
      return {g / a};
    case Op::kSquare:
      return {scale(g * a, 2.0)};
    case Op::kSqrt:
      return {scale(g / self, 0.5)};
    case Op::kRowSum:
    case Op::kColSum:
    case Op::kSum:
      return {broadcast(g, a.rows(), a.cols())};
    case Op::kMean:
      return {scale(broadcast(g, a.rows(), a.cols()),
                    1.0 / static_cast<double>(a.value().size()))};
    case Op::kBroadcast: {
      const std::size_t r = a.rows();
      const std::size_t c = a.cols();
      if (r == self.rows() && c == self.cols()) return {g};
      if (r == 1 && c == 1) return {sum(g)};
      if (r == 1) return {col_sum(g)};
      return {row_sum(g)};
    }
    case Op::kSoftmaxRows:
      return {self * (g - broadcast(row_sum(g * self), self.rows(), self.cols()))};
    case Op::kLogSoftmaxRows:
      return {g - softmax_rows(a) * broadcast(row_sum(g), a.rows(), a.cols())};
    case Op::kSoftmaxCrossEntropy: {
      Tensor onehot(1, a.cols());
      onehot(0, index) = 1.0;
      return {broadcast(g, 1, a.cols()) * (softmax_rows(a) - constant(std::move(onehot)))};
    }
    case Op::kDiag:
      return {diag_embed(g)};
    case Op::kDiagEmbed:
      return {diag(g)};
  }
  throw Error("unknown op in backward pass");
}

inline std::vector<Var> ExpressionGraph::gradient_nodes(const Var& root, std::span<const Var> wrt) {
  check_owned(root);
  if (!root.value().is_scalar()) {
    throw ShapeError("gradient root must be scalar, got " + root.value().shape_string());
  }
  for (const Var& w : wrt) check_owned(w);

  const NodeId r = root.id();
  // A node is relevant when some target lies among its ancestors (or is it).
  std::vector<char> relevant(r + 1, 0);
  for (const Var& w : wrt) {
    if (w.id() <= r) relevant[w.id()] = 1;
  }
  for (NodeId id = 0; id <= r; ++id) {
    if (relevant[id]) continue;
    for (NodeId p : nodes_[id].parents) {
      if (p != kNoParent && relevant[p]) {
        relevant[id] = 1;
        break;
      }
    }
  }

  std::vector<Var> adjoint(r + 1);
  std::vector<char> has(r + 1, 0);
  if (relevant[r]) {
    adjoint[r] = constant(Tensor::scalar(1.0));
    has[r] = 1;
  }
  for (NodeId id = r + 1; id-- > 0;) {
    if (!has[id]) continue;
    const std::array<NodeId, 2> parents = nodes_[id].parents;
    bool any = false;
    for (NodeId p : parents) any = any || (p != kNoParent && relevant[p]);
    if (!any) continue;
    std::vector<Var> contrib = backward_step(id, adjoint[id]);
    for (std::size_t k = 0; k < contrib.size(); ++k) {
      const NodeId p = parents[k];
      if (p == kNoParent || !relevant[p]) continue;
      if (has[p]) {
        adjoint[p] = adjoint[p] + contrib[k];
      } else {
        adjoint[p] = contrib[k];
        has[p] = 1;
      }
    }
  }

  std::vector<Var> out;
  out.reserve(wrt.size());
  for (const Var& w : wrt) {
    if (w.id() <= r && has[w.id()]) {
      out.push_back(adjoint[w.id()]);
    } else {
      out.push_back(constant(Tensor(w.rows(), w.cols())));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Central-difference checking

/// A scalar-valued expression builder: given a graph and the input node,
/// return the scalar output node.
using ScalarExpression = std::function<Var(ExpressionGraph&, const Var&)>;

inline double evaluate_scalar(const ScalarExpression& f, const Tensor& x) {
  ExpressionGraph g;
  const Var y = f(g, g.variable(x));
  const double v = y.value().item();
  if (!std::isfinite(v)) throw Error("finite_diff_check: function produced a non-finite value");
  return v;
}

/// Largest relative error between the reverse-mode gradient of f at x and a
/// central difference with step epsilon. The denominator of each relative
/// error is max(|analytic|, |numeric|, 1e-8).
inline double finite_diff_check(const ScalarExpression& f, const Tensor& x, double epsilon) {
  if (!(epsilon >= 1e-7 && epsilon <= 1e-3)) {
    throw Error("finite_diff_check: epsilon must lie in [1e-7, 1e-3]");
  }
  Tensor analytic;
  {
    ExpressionGraph g;
    const Var xv = g.variable(x);
    const Var y = f(g, xv);
    if (!std::isfinite(y.value().item())) {
      throw Error("finite_diff_check: function produced a non-finite value");
    }
    analytic = g.gradients(y, {xv})[0];
  }
  double worst = 0.0;
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + epsilon;
    const double up = evaluate_scalar(f, probe);
    probe[i] = x[i] - epsilon;
    const double down = evaluate_scalar(f, probe);
    probe[i] = x[i];
    const double numeric = (up - down) / (2.0 * epsilon);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
    worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
  }
  return worst;
}

}  // namespace graphleak
