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

// Adjacency constraining applied to the attacker's logits every iteration:
//
//   A_sym = ((A - diag A) + (A - diag A)^T) / 2
//   A_tmp = sigma(A_sym) on each row's top-n(t) entries, 0 elsewhere
//   n(t)  = max(n0 - alpha t, n_max)
//   A_bin = [A_tmp >= beta]

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "graphleak/autodiff.hpp"

namespace graphleak {

/// How the row-wise top-n selections are merged into a symmetric support.
enum class SelectionRule {
  kUnion,         // keep (i,j) if either endpoint selects it
  kIntersection,  // keep (i,j) only if both endpoints select it
};

struct ConstraintSchedule {
  int n0 = 10;
  double alpha = 0.15;
  int n_max = 4;
  double beta = 0.5;
  SelectionRule rule = SelectionRule::kUnion;

  void validate() const {
    if (n_max < 1) throw Error("schedule: n_max must be at least 1");
    if (n0 < n_max) throw Error("schedule: n0 must be at least n_max");
    if (!(beta > 0.0 && beta < 1.0)) throw Error("schedule: beta must lie in (0, 1)");
    if (!(alpha >= 0.0)) throw Error("schedule: alpha must be non-negative");
  }
};

inline Tensor symmetrize(const Tensor& a) {
  if (a.rows() != a.cols()) throw ShapeError("symmetrize of non-square " + a.shape_string());
  Tensor out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      out(i, j) = i == j ? 0.0 : 0.5 * (a(i, j) + a(j, i));
  return out;
}

/// Differentiable form of symmetrize(), built from graph primitives.
inline Var symmetrize(const Var& a) {
  if (a.rows() != a.cols()) throw ShapeError("symmetrize of non-square " + a.value().shape_string());
  const Var off_diag = a - diag_embed(diag(a));
  return scale(off_diag + transpose(off_diag), 0.5);
}

/// Per-row edge budget at iteration t, floored after taking the max.
inline int edges_at(long long t, const ConstraintSchedule& s) {
  if (t < 0) throw Error("edges_at: iteration must be non-negative");
  const double raw = std::max(static_cast<double>(s.n0) - s.alpha * static_cast<double>(t),
                              static_cast<double>(s.n_max));
  // Absorb representation error such as 10 - 0.15*20 = 6.999999999.
  return static_cast<int>(std::floor(raw + 1e-9));
}

/// 0/1 mask of the entries kept by top-n selection on `scores` (diagonal
/// never kept). Ties go to the lower column index.
inline Tensor selection_mask(const Tensor& scores, int n, SelectionRule rule) {
  if (n < 1) throw Error("sparsify: n must be at least 1");
  if (scores.rows() != scores.cols()) throw ShapeError("sparsify of non-square matrix");
  const std::size_t size = scores.rows();
  Tensor picked(size, size);
  std::vector<std::size_t> cols;
  for (std::size_t i = 0; i < size; ++i) {
    cols.clear();
    for (std::size_t j = 0; j < size; ++j) {
      if (j != i) cols.push_back(j);
    }
    const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(n), cols.size());
    std::partial_sort(cols.begin(), cols.begin() + static_cast<std::ptrdiff_t>(k), cols.end(),
                      [&](std::size_t x, std::size_t y) {
                        if (scores(i, x) != scores(i, y)) return scores(i, x) > scores(i, y);
                        return x < y;
                      });
    for (std::size_t r = 0; r < k; ++r) picked(i, cols[r]) = 1.0;
  }
  Tensor mask(size, size);
  for (std::size_t i = 0; i < size; ++i) {
    for (std::size_t j = 0; j < size; ++j) {
      const bool a = picked(i, j) != 0.0;
      const bool b = picked(j, i) != 0.0;
      mask(i, j) = (rule == SelectionRule::kUnion ? (a || b) : (a && b)) ? 1.0 : 0.0;
    }
  }
  return mask;
}

/// sigma(A_sym) on the selected support, zero elsewhere.
inline Tensor sparsify(const Tensor& a_sym, int n, SelectionRule rule = SelectionRule::kUnion) {
  const Tensor s = logistic(a_sym);
  const Tensor mask = selection_mask(s, n, rule);
  Tensor out(s.rows(), s.cols());
  for (std::size_t i = 0; i < s.size(); ++i) out[i] = mask[i] != 0.0 ? s[i] : 0.0;
  return out;
}

inline Tensor binarize(const Tensor& a_tmp, double beta) {
  Tensor out(a_tmp.rows(), a_tmp.cols());
  for (std::size_t i = 0; i < a_tmp.size(); ++i) {
    const double v = a_tmp[i];
    if (!(v >= 0.0 && v <= 1.0)) {
      throw Error("binarize: entry outside [0, 1]; constraints applied out of order?");
    }
    out[i] = v >= beta ? 1.0 : 0.0;
  }
  return out;
}

struct ConstrainedAdjacency {
  Tensor a_tmp;
  Tensor a_binary;
  Tensor support;  // 0/1 mask of entries kept by sparsification
};

inline ConstrainedAdjacency constrain_adjacency(const Tensor& logits, long long t,
                                                const ConstraintSchedule& schedule) {
  schedule.validate();
  const Tensor sym = symmetrize(logits);
  const Tensor s = logistic(sym);
  ConstrainedAdjacency out;
  out.support = selection_mask(s, edges_at(t, schedule), schedule.rule);
  out.a_tmp = Tensor(s.rows(), s.cols());
  for (std::size_t i = 0; i < s.size(); ++i) out.a_tmp[i] = out.support[i] != 0.0 ? s[i] : 0.0;
  out.a_binary = binarize(out.a_tmp, schedule.beta);
  return out;
}

struct ConstrainedAdjacencyNode {
  Var a_tmp;  // differentiable through the kept entries
  Tensor a_binary;
  Tensor support;
};

/// Graph form of constrain_adjacency(). The selection itself is a
/// stop-gradient mask.
inline ConstrainedAdjacencyNode constrain_adjacency(const Var& logits, long long t,
                                                    const ConstraintSchedule& schedule) {
  schedule.validate();
  ExpressionGraph& g = logits.graph();
  const Var probs = sigmoid(symmetrize(logits));
  ConstrainedAdjacencyNode out;
  out.support = selection_mask(probs.value(), edges_at(t, schedule), schedule.rule);
  out.a_tmp = probs * g.constant(out.support);
  out.a_binary = binarize(out.a_tmp.value(), schedule.beta);
  return out;
}

}  // namespace graphleak
