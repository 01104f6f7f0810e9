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

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "test_support.hpp"

namespace graphleak::testing {

struct Primitive {
  std::string name;
  std::size_t rows, cols;
  double lo, hi;  // input range
  ScalarExpression f;
};

// Each primitive is reduced to a scalar by a fixed random weighting so
// every output entry contributes to the checked gradient.
inline Var weighted(ExpressionGraph& g, const Var& y, std::uint64_t seed) {
  return sum(y * g.constant(uniform_tensor(y.rows(), y.cols(), -1, 1, seed)));
}

inline std::vector<Primitive> primitives() {
  const Tensor b33 = uniform_tensor(3, 3, -2, 2, 101);
  const Tensor b34 = uniform_tensor(3, 4, -2, 2, 102);
  const Tensor pos34 = uniform_tensor(3, 4, 0.5, 2, 103);
  return {
      {"matmul_left", 3, 3, -2, 2, [=](auto& g, auto& x) { return weighted(g, matmul(x, g.constant(b34)), 1); }},
      {"matmul_right", 3, 3, -2, 2, [=](auto& g, auto& x) { return weighted(g, matmul(g.constant(b33), x), 2); }},
      {"matmul_self", 3, 3, -2, 2, [](auto& g, auto& x) { return weighted(g, matmul(x, x), 3); }},
      {"transpose", 3, 4, -2, 2, [](auto& g, auto& x) { return weighted(g, transpose(x), 4); }},
      {"add", 3, 4, -2, 2, [=](auto& g, auto& x) { return weighted(g, x + g.constant(b34), 5); }},
      {"sub", 3, 4, -2, 2, [=](auto& g, auto& x) { return weighted(g, g.constant(b34) - x, 6); }},
      {"mul", 3, 4, -2, 2, [](auto& g, auto& x) { return weighted(g, x * x, 7); }},
      {"div_numerator", 3, 4, -2, 2, [=](auto& g, auto& x) { return weighted(g, x / g.constant(pos34), 8); }},
      {"div_denominator", 3, 4, 0.5, 2, [](auto& g, auto& x) { return weighted(g, g.constant(Tensor(3, 4, 1.5)) / x, 9); }},
      {"scale", 3, 4, -2, 2, [](auto& g, auto& x) { return weighted(g, scale(x, -2.5), 10); }},
      {"add_scalar", 3, 4, -2, 2, [](auto& g, auto& x) { return weighted(g, add_scalar(x, 0.7), 11); }},
      {"sigmoid", 3, 4, -2, 2, [](auto& g, auto& x) { return weighted(g, sigmoid(x), 12); }},
      {"relu", 3, 4, -2, 2, [](auto& g, auto& x) { return weighted(g, relu(x), 13); }},
      {"exp", 3, 4, -2, 2, [](auto& g, auto& x) { return weighted(g, exp(x), 14); }},
      {"log", 3, 4, 0.5, 2, [](auto& g, auto& x) { return weighted(g, log(x), 15); }},
      {"square", 3, 4, -2, 2, [](auto& g, auto& x) { return weighted(g, square(x), 16); }},
      {"sqrt", 3, 4, 0.5, 2, [](auto& g, auto& x) { return weighted(g, sqrt(x), 17); }},
      {"row_sum", 3, 4, -2, 2, [](auto& g, auto& x) { return weighted(g, row_sum(x), 18); }},
      {"col_sum", 3, 4, -2, 2, [](auto& g, auto& x) { return weighted(g, col_sum(x), 19); }},
      {"sum", 3, 4, -2, 2, [](auto&, auto& x) { return square(sum(x)); }},
      {"mean", 3, 4, -2, 2, [](auto&, auto& x) { return square(mean(x)); }},
      {"broadcast_row", 1, 4, -2, 2, [](auto& g, auto& x) { return weighted(g, broadcast(x, 3, 4), 20); }},
      {"broadcast_col", 3, 1, -2, 2, [](auto& g, auto& x) { return weighted(g, broadcast(x, 3, 4), 21); }},
      {"softmax_rows", 3, 4, -2, 2, [](auto& g, auto& x) { return weighted(g, softmax_rows(x), 22); }},
      {"log_softmax_rows", 3, 4, -2, 2, [](auto& g, auto& x) { return weighted(g, log_softmax_rows(x), 23); }},
      {"cross_entropy", 1, 4, -2, 2, [](auto&, auto& x) { return softmax_cross_entropy(x, 2); }},
      {"diag", 3, 3, -2, 2, [](auto& g, auto& x) { return weighted(g, diag(x), 24); }},
      {"diag_embed", 3, 1, -2, 2, [](auto& g, auto& x) { return weighted(g, diag_embed(x), 25); }},
  };
}

/// Moves entries away from the relu kink.
inline Tensor away_from_kink(Tensor t) {
  for (double& v : t.values()) {
    if (std::abs(v) < 1e-2) v = v < 0 ? -0.5 : 0.5;
  }
  return t;
}

}  // namespace graphleak::testing
