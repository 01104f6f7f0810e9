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

Tensor upper(std::size_t n, const std::vector<double>& pairs) {
  Tensor t(n, n);
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) t(i, j) = t(j, i) = pairs.at(k++);
  return t;
}

/// Every symmetric zero-diagonal 0/1 matrix of order n.
std::vector<Tensor> all_graphs(std::size_t n) {
  const std::size_t m = n * (n - 1) / 2;
  std::vector<Tensor> out;
  for (std::size_t mask = 0; mask < (std::size_t{1} << m); ++mask) {
    std::vector<double> bits(m);
    for (std::size_t b = 0; b < m; ++b) bits[b] = (mask >> b) & 1U;
    out.push_back(upper(n, bits));
  }
  return out;
}

TEST(Metrics, WorkedExamples) {
  const Tensor truth = Tensor::from_rows({{0, 1}, {1, 0}});
  EXPECT_EQ(accuracy(Tensor::from_rows({{0, 1}, {0, 0}}), truth), 0.5);
  EXPECT_EQ(accuracy(truth, truth), 1.0);
  EXPECT_EQ(mse(Tensor::from_rows({{0, .5}, {.5, 0}}), truth), 0.125);
  EXPECT_EQ(mse(truth, truth), 0.0);
  Tensor plus = truth;
  for (auto& v : plus.values()) v += 1;
  EXPECT_EQ(mse(plus, truth), 1.0);

  const Tensor p = testing::make_graph(4, {{0, 1}, {1, 2}}).adjacency;
  const Tensor t = testing::make_graph(4, {{0, 1}, {2, 3}}).adjacency;
  EXPECT_DOUBLE_EQ(jaccard(p, t), 1.0 / 3.0);
  EXPECT_EQ(jaccard(Tensor(4, 4), Tensor(4, 4)), 1.0);

  EXPECT_EQ(auc(upper(3, {0.9, 0.4, 0.6}), upper(3, {1, 0, 0})), 1.0);
  EXPECT_EQ(auc(upper(3, {0.9, 0.4, 0.6}), upper(3, {0, 1, 0})), 0.0);
  EXPECT_EQ(auc(Tensor(3, 3, 0.3), upper(3, {0, 1, 0})), 0.5);
}

TEST(Metrics, ContinuousScoresNeverMatchExactly) {
  const Tensor scores = testing::uniform_tensor(6, 6, -3, 3, 5);
  EXPECT_EQ(accuracy(scores, testing::cycle_graph(6).adjacency), 0.0);
}

TEST(Metrics, Errors) {
  EXPECT_THROW(accuracy(Tensor(2, 2), Tensor(3, 3)), ShapeError);
  EXPECT_THROW(jaccard(Tensor(2, 3), Tensor(2, 3)), ShapeError);
  EXPECT_THROW(mse(Tensor(2, 2), Tensor(3, 3)), ShapeError);
  try {
    auc(Tensor(3, 3), Tensor(3, 3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("AUC undefined"), std::string::npos);
  }
  EXPECT_THROW(auc(Tensor(3, 3), upper(3, {1, 1, 1})), Error);
}

TEST(Metrics, MatchOracleOnAllThreeNodeGraphs) {
  const auto graphs = all_graphs(3);
  ASSERT_EQ(graphs.size(), 8u);
  const std::vector<Tensor> scores{upper(3, {0.9, 0.4, 0.6}), upper(3, {0.5, 0.5, 0.2}),
                                   upper(3, {-1, 2, 0.49})};
  for (const auto& truth : graphs) {
    for (const auto& pred : graphs) {
      EXPECT_EQ(accuracy(pred, truth), oracle::accuracy(pred, truth));
      EXPECT_EQ(jaccard(pred, truth), oracle::jaccard(pred, truth));
      EXPECT_EQ(mse(pred, truth), oracle::mse(pred, truth));
    }
    for (const auto& s : scores) {
      EXPECT_EQ(mse(s, truth), oracle::mse(s, truth));
      EXPECT_EQ(jaccard(s, truth), oracle::jaccard(s, truth));
      const double o = oracle::auc(s, truth);
      if (o < 0) {
        EXPECT_THROW(auc(s, truth), Error);
      } else {
        EXPECT_EQ(auc(s, truth), o);
      }
    }
  }
}

TEST(Metrics, MatchOracleOnRandomEightNodeCases) {
  SplitMix64 rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> t(28), b(28), s(28);
    for (int k = 0; k < 28; ++k) {
      t[k] = rng.bernoulli(0.3) ? 1 : 0;
      b[k] = rng.bernoulli(0.3) ? 1 : 0;
      // Coarse grid so ties happen.
      s[k] = static_cast<double>(rng.below(5)) / 4.0;
    }
    t[0] = 1;
    t[1] = 0;
    const Tensor truth = upper(8, t), bin = upper(8, b), sc = upper(8, s);
    EXPECT_EQ(accuracy(bin, truth), oracle::accuracy(bin, truth));
    EXPECT_EQ(jaccard(bin, truth), oracle::jaccard(bin, truth));
    EXPECT_EQ(jaccard(sc, truth), oracle::jaccard(sc, truth));
    EXPECT_EQ(mse(sc, truth), oracle::mse(sc, truth));
    EXPECT_EQ(auc(sc, truth), oracle::auc(sc, truth));
  }
}

TEST(Metrics, AucInvariantUnderMonotoneTransform) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Tensor s = testing::uniform_tensor(7, 7, -4, 4, seed);
    s = symmetrize(s);
    const Tensor truth = testing::make_graph(7, {{0, 1}, {1, 2}, {3, 4}, {2, 6}}).adjacency;
    EXPECT_EQ(auc(s, truth), auc(logistic(s), truth));
  }
}

TEST(Metrics, PerfectReconstructionIffEdgeSetsMatch) {
  for (const auto& truth : all_graphs(4)) {
    for (const auto& pred : all_graphs(4)) {
      const bool same = pred == truth;
      EXPECT_EQ(accuracy(pred, truth) == 1.0, same);
      EXPECT_EQ(jaccard(pred, truth) == 1.0, same);
      EXPECT_EQ(graph_exact(pred, truth), same ? 1.0 : 0.0);
      EXPECT_EQ(mse(pred, truth), mse(truth, pred));
    }
  }
}

TEST(Metrics, ScoreUsesFinalAndContinuousMatrices) {
  AttackResult r;
  r.method = "X";
  r.a_continuous = upper(3, {0.5, 0.5, 0.5});
  r.a_binary = upper(3, {1, 0, 0});
  const auto m = score(r, upper(3, {1, 0, 0}));
  EXPECT_EQ(m.accuracy, 1.0);
  EXPECT_EQ(m.mse, (0.25 * 6) / 9);
  EXPECT_EQ(m.auc, 0.5);
  EXPECT_EQ(m.status, "ok");
  r.a_binary.reset();
  const auto u = score(r, Tensor(3, 3));
  EXPECT_EQ(u.accuracy, 0.0);
  EXPECT_FALSE(u.auc.has_value());
}

TEST(Aggregate, MeanAndPopulationStd) {
  std::vector<MetricsRecord> recs(2);
  recs[0].method = recs[1].method = "A";
  recs[0].accuracy = 0.8;
  recs[1].accuracy = 1.0;
  recs[1].seed = 1;
  const auto rows = aggregate(recs);
  const auto& acc = find_row(rows, "A", Metric::kAccuracy);
  EXPECT_NEAR(acc.overall.mean, 0.9, 1e-15);
  EXPECT_NEAR(acc.overall.std, 0.1, 1e-15);
  EXPECT_EQ(acc.overall.count, 2u);
  EXPECT_EQ(acc.seed_means.count, 2u);

  std::vector<MetricsRecord> same(3);
  for (auto& r : same) {
    r.method = "B";
    r.accuracy = 0.9;
  }
  EXPECT_EQ(find_row(aggregate(same), "B", Metric::kAccuracy).overall.std, 0.0);
  EXPECT_EQ(find_row(aggregate({same[0]}), "B", Metric::kAccuracy).overall.std, 0.0);
  EXPECT_THROW(aggregate({}), Error);
  EXPECT_THROW(find_row(rows, "Z", Metric::kMse), Error);
}

TEST(Aggregate, SkipsFailuresAndMissingAuc) {
  std::vector<MetricsRecord> recs(3);
  for (auto& r : recs) r.method = "A";
  recs[0].auc = 0.7;
  recs[1].auc = std::nullopt;
  recs[2].auc = 0.1;
  recs[2].status = "error";
  const auto rows = aggregate(recs);
  EXPECT_EQ(find_row(rows, "A", Metric::kAuc).overall.count, 1u);
  EXPECT_EQ(find_row(rows, "A", Metric::kAccuracy).overall.count, 2u);
}

}  // namespace
}  // namespace graphleak
