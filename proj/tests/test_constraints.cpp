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


#include <gtest/gtest.h>

#include "oracles.hpp"
#include "test_support.hpp"

namespace graphleak {
namespace {

ConstraintSchedule schedule(int n0, double alpha, int n_max, double beta = 0.5) {
  ConstraintSchedule s;
  s.n0 = n0;
  s.alpha = alpha;
  s.n_max = n_max;
  s.beta = beta;
  return s;
}

TEST(Symmetrize, Examples) {
  EXPECT_EQ(symmetrize(Tensor::from_rows({{5, 2}, {0, 7}})), Tensor::from_rows({{0, 1}, {1, 0}}));
  EXPECT_EQ(symmetrize(Tensor::identity(3)), Tensor(3, 3));
  const Tensor fixed = Tensor::from_rows({{0, .3, -1}, {.3, 0, 2}, {-1, 2, 0}});
  EXPECT_EQ(symmetrize(fixed), fixed);
  EXPECT_THROW(symmetrize(Tensor(2, 3)), ShapeError);
}

TEST(Symmetrize, IdempotentAndMatchesGraphForm) {
  const Tensor a = testing::uniform_tensor(6, 6, -3, 3, 4);
  EXPECT_EQ(symmetrize(symmetrize(a)), symmetrize(a));
  ExpressionGraph g;
  EXPECT_LT(max_abs_diff(symmetrize(g.constant(a)).value(), symmetrize(a)), 1e-15);
}

TEST(Schedule, EdgesAt) {
  const auto s = schedule(10, 0.15, 4);
  EXPECT_EQ(edges_at(0, s), 10);
  EXPECT_EQ(edges_at(20, s), 7);
  EXPECT_EQ(edges_at(40, s), 4);
  EXPECT_EQ(edges_at(100000, s), 4);
  int prev = edges_at(0, s);
  for (long long t = 1; t < 200; ++t) {
    const int cur = edges_at(t, s);
    EXPECT_LE(cur, prev);
    EXPECT_GE(cur, 4);
    prev = cur;
  }
  EXPECT_THROW(edges_at(-1, s), Error);
}

TEST(Schedule, Validation) {
  EXPECT_THROW(schedule(3, 0.1, 4).validate(), Error);
  EXPECT_THROW(schedule(5, -0.1, 4).validate(), Error);
  EXPECT_THROW(schedule(5, 0.1, 4, 1.0).validate(), Error);
  EXPECT_THROW(schedule(5, 0.1, 0).validate(), Error);
}

TEST(Sparsify, VacuousBudgetKeepsEverything) {
  const Tensor sym = symmetrize(testing::uniform_tensor(5, 5, -2, 2, 1));
  const Tensor out = sparsify(sym, 4);
  const Tensor s = logistic(sym);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 5; ++j) EXPECT_EQ(out(i, j), i == j ? 0.0 : s(i, j));
}

TEST(Sparsify, TopOneOfRow) {
  // Row 0 has sigma values (-, 0.9, 0.6); rows 1 and 2 prefer each other.
  const double l9 = std::log(9.0), l6 = std::log(1.5), l99 = std::log(99.0);
  const Tensor sym = Tensor::from_rows({{0, l9, l6}, {l9, 0, l99}, {l6, l99, 0}});
  const Tensor out = sparsify(sym, 1);
  EXPECT_NEAR(out(0, 1), 0.9, 1e-12);
  EXPECT_EQ(out(0, 2), 0.0);
  EXPECT_EQ(out, transposed(out));
  EXPECT_THROW(sparsify(sym, 0), Error);
}

TEST(Sparsify, TiesGoToLowerColumn) {
  const Tensor mask = selection_mask(Tensor(4, 4, 0.5), 1, SelectionRule::kIntersection);
  // Every row picks its lowest other column: 0->1, 1->0, 2->0, 3->0.
  EXPECT_EQ(mask(0, 1), 1.0);
  EXPECT_EQ(mask(2, 0), 0.0);  // 0 did not pick 2
  EXPECT_EQ(mask(2, 3), 0.0);
}

TEST(Binarize, Examples) {
  EXPECT_EQ(binarize(Tensor(3, 3), 0.5), Tensor(3, 3));
  EXPECT_EQ(binarize(Tensor::from_rows({{0, .7}, {.7, 0}}), 0.5),
            Tensor::from_rows({{0, 1}, {1, 0}}));
  EXPECT_EQ(binarize(Tensor::from_rows({{0, .5}, {.5, 0}}), 0.5),
            Tensor::from_rows({{0, 1}, {1, 0}}));
  EXPECT_THROW(binarize(Tensor::from_rows({{0, 1.5}, {1.5, 0}}), 0.5), Error);
}

TEST(Constrain, TrueLogitsRecoverTruth) {
  const auto g = testing::make_graph(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 0}, {0, 2}});
  Tensor logits(5, 5);
  for (std::size_t i = 0; i < 25; ++i) logits[i] = g.adjacency[i] > 0 ? 30.0 : -30.0;
  const auto c = constrain_adjacency(logits, 0, schedule(4, 0.15, 3));
  EXPECT_EQ(c.a_binary, g.adjacency);
}

TEST(Constrain, ZeroLogitsGiveAllOnesOnSupport) {
  const auto c = constrain_adjacency(Tensor(5, 5), 1000, schedule(4, 0.15, 2));
  for (std::size_t i = 0; i < 25; ++i) {
    EXPECT_EQ(c.a_binary[i], c.support[i]);
    if (c.support[i] != 0.0) {
      EXPECT_EQ(c.a_tmp[i], 0.5);
    }
  }
}

TEST(Constrain, RowBudgetRespected) {
  const Tensor logits = testing::uniform_tensor(9, 9, -3, 3, 6);
  const auto s = schedule(8, 0.15, 2);
  const Tensor picked = selection_mask(logistic(symmetrize(logits)), 2, SelectionRule::kIntersection);
  for (std::size_t i = 0; i < 9; ++i) {
    double row = 0;
    for (std::size_t j = 0; j < 9; ++j) row += picked(i, j);
    EXPECT_LE(row, 2.0);
  }
  const auto c = constrain_adjacency(logits, 1000, s);
  EXPECT_EQ(c.a_binary, transposed(c.a_binary));
  for (std::size_t i = 0; i < 9; ++i) EXPECT_EQ(c.a_binary(i, i), 0.0);
}

TEST(Constrain, MatchesNaiveOracleOnAllSignPatterns) {
  for (std::size_t n = 2; n <= 4; ++n) {
    const std::size_t pairs = n * (n - 1) / 2;
    for (std::uint64_t pattern = 0; pattern < (1ULL << pairs); ++pattern) {
      for (int magnitudes = 0; magnitudes < 2; ++magnitudes) {
        SplitMix64 rng(pattern * 7 + n);
        Tensor logits(n, n);
        std::size_t bit = 0;
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = i + 1; j < n; ++j, ++bit) {
            const double mag = magnitudes == 0 ? 1.0 : rng.uniform(0.1, 3.0);
            const double v = ((pattern >> bit) & 1) ? mag : -mag;
            logits(i, j) = logits(j, i) = v;
          }
        }
        for (long long t : {0LL, 5LL, 1000LL}) {
          for (int n_max = 1; n_max <= 2; ++n_max) {
            const int n0 = std::max<int>(static_cast<int>(n) - 1, n_max);
            for (bool inter : {false, true}) {
              auto s = schedule(n0, 0.15, n_max);
              s.rule = inter ? SelectionRule::kIntersection : SelectionRule::kUnion;
              const auto got = constrain_adjacency(logits, t, s);
              const auto want = oracle::constrain(logits, t, n0, 0.15, n_max, 0.5, inter);
              ASSERT_EQ(got.a_tmp, want.a_tmp) << "n=" << n << " pattern=" << pattern;
              ASSERT_EQ(got.a_binary, want.a_binary);
            }
          }
        }
      }
    }
  }
}

TEST(Constrain, MatchesNaiveOracleOnRandomSixNodeInstances) {
  for (std::uint64_t k = 0; k < 100; ++k) {
    const Tensor logits = testing::uniform_tensor(6, 6, -3, 3, 500 + k);
    const long long t = static_cast<long long>(k * 3);
    const auto got = constrain_adjacency(logits, t, schedule(5, 0.15, 2, 0.6));
    const auto want = oracle::constrain(logits, t, 5, 0.15, 2, 0.6);
    ASSERT_EQ(got.a_tmp, want.a_tmp) << k;
    ASSERT_EQ(got.a_binary, want.a_binary) << k;
  }
}

TEST(Constrain, GraphFormMatchesAndStopsGradientOffSupport) {
  const Tensor logits = testing::uniform_tensor(6, 6, -2, 2, 31);
  const auto s = schedule(5, 0.15, 2);
  const auto plain = constrain_adjacency(logits, 100, s);
  ExpressionGraph g;
  const Var x = g.variable(logits);
  const auto node = constrain_adjacency(x, 100, s);
  EXPECT_LT(max_abs_diff(node.a_tmp.value(), plain.a_tmp), 1e-15);
  EXPECT_EQ(node.a_binary, plain.a_binary);
  const Tensor grad = g.gradients(sum(node.a_tmp), {x})[0];
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t j = 0; j < 6; ++j) {
      if (plain.support(i, j) == 0.0 && plain.support(j, i) == 0.0) {
        EXPECT_EQ(grad(i, j), 0.0);
      }
    }
  }
}

}  // namespace
}  // namespace graphleak
