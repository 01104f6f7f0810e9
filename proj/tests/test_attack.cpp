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

#include <cmath>
#include <limits>

#include "test_support.hpp"

namespace graphleak {
namespace {

using testing::make_graph;

struct Victim {
  LabeledGraph graph;
  GcnParams params;
  GradientCapture capture;
};

Victim victim(std::uint64_t seed = 1, std::size_t hidden = 8) {
  Victim v;
  v.graph = make_graph(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {1, 3}}, 3, 1);
  ModelConfig mc;
  mc.features = 3;
  mc.hidden = hidden;
  v.params = GcnParams::initialize(mc, seed);
  v.capture = client_gradient(v.params, v.graph);
  return v;
}

AttackConfig config(Method m, std::size_t iters = 30) {
  AttackConfig c;
  c.method = m;
  c.iterations = iters;
  c.seed = 11;
  c.refine_period = 0;
  return c;
}

double loss_at(const Victim& v, const Tensor& a, const Tensor& x) {
  ExpressionGraph g;
  return matching_loss(g.constant(a), g.constant(x), LabelTarget{v.graph.label, std::nullopt},
                       v.capture, v.params)
      .value()
      .item();
}

TEST(MatchingLoss, MinimalAtTruth) {
  const Victim v = victim();
  EXPECT_LE(loss_at(v, v.graph.adjacency, v.graph.features), 1e-18);
  SplitMix64 rng(3);
  for (int k = 0; k < 10; ++k) {
    Tensor a = v.graph.adjacency;
    const std::size_t i = rng.below(5), j = (i + 1 + rng.below(4)) % 5;
    a(i, j) = a(j, i) = 1.0 - a(i, j);
    const double l = loss_at(v, a, v.graph.features);
    EXPECT_GE(l, 0.0);
    EXPECT_GT(l, 1e-12);
  }
}

TEST(MatchingLoss, SecondOrderGradientsPassCentralDifferences) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const Victim v = victim(seed);
    const Tensor logits = testing::uniform_tensor(5, 5, -1, 1, seed + 10);
    const Tensor x = testing::uniform_tensor(5, 3, 0, 1, seed + 20);
    const ScalarExpression wrt_a = [&](ExpressionGraph& g, const Var& z) {
      return matching_loss(sigmoid(z), g.constant(x), LabelTarget{1, std::nullopt}, v.capture,
                           v.params);
    };
    const ScalarExpression wrt_x = [&](ExpressionGraph& g, const Var& xv) {
      return matching_loss(sigmoid(g.constant(logits)), xv, LabelTarget{1, std::nullopt},
                           v.capture, v.params);
    };
    EXPECT_LT(finite_diff_check(wrt_a, logits, 1e-5), 1e-4);
    EXPECT_LT(finite_diff_check(wrt_x, x, 1e-5), 1e-4);
  }
}

TEST(MatchingLoss, SoftLabelGradientsPassCentralDifferences) {
  const Victim v = victim();
  const Tensor x = testing::uniform_tensor(5, 3, 0, 1, 4);
  const ScalarExpression f = [&](ExpressionGraph& g, const Var& y) {
    return matching_loss(g.constant(v.graph.adjacency), g.constant(x), LabelTarget{std::nullopt, y},
                         v.capture, v.params);
  };
  EXPECT_LT(finite_diff_check(f, Tensor::from_rows({{0.3, -0.2}}), 1e-5), 1e-4);
}

TEST(MatchingLoss, ShapeErrors) {
  const Victim v = victim();
  ExpressionGraph g;
  EXPECT_THROW(matching_loss(g.constant(Tensor(4, 4)), g.constant(Tensor(4, 3)),
                             LabelTarget{0, std::nullopt}, v.capture, v.params),
               ShapeError);
  EXPECT_THROW(matching_loss(g.constant(Tensor(5, 5)), g.constant(Tensor(5, 2)),
                             LabelTarget{0, std::nullopt}, v.capture, v.params),
               ShapeError);
  EXPECT_THROW(matching_loss(g.constant(Tensor(5, 5)), g.constant(Tensor(5, 3)), LabelTarget{},
                             v.capture, v.params),
               Error);
}

TEST(Attack, ZeroIterationsReturnInitialization) {
  const Victim v = victim();
  for (Method m : {Method::kDlg, Method::kIdlg}) {
    const AttackConfig c = config(m, 0);
    const AttackResult r = run_attack(c, v.capture, v.params, nullptr);
    const AttackState s = detail::initial_state(c, v.capture);
    EXPECT_EQ(r.a_continuous, s.a_logits);
    EXPECT_EQ(r.x_recovered, s.x_hat);
    EXPECT_TRUE(r.trace.empty());
  }
}

TEST(Attack, ContinuousBaselinesNeverHitExactBinary) {
  const Victim v = victim();
  for (Method m : {Method::kDlg, Method::kIdlg}) {
    const AttackResult r = run_attack(config(m), v.capture, v.params, nullptr);
    EXPECT_FALSE(r.a_binary.has_value());
    for (double x : r.a_continuous.values()) {
      EXPECT_NE(x, 0.0);
      EXPECT_NE(x, 1.0);
    }
    EXPECT_EQ(accuracy(r, v.graph.adjacency), 0.0);
  }
}

TEST(Attack, ProjectedBaselinesAreBinary) {
  const Victim v = victim();
  for (Method m : {Method::kDlgBp, Method::kIdlgBp}) {
    const AttackResult r = run_attack(config(m), v.capture, v.params, nullptr);
    ASSERT_TRUE(r.a_binary.has_value());
    for (std::size_t i = 0; i < r.a_continuous.size(); ++i) {
      EXPECT_EQ((*r.a_binary)[i], logistic(r.a_continuous[i]) >= 0.5 ? 1.0 : 0.0);
    }
  }
}

TEST(Attack, InferredLabelIsUsed) {
  const Victim v = victim();
  const AttackResult r = run_attack(config(Method::kIdlg), v.capture, v.params, nullptr);
  EXPECT_EQ(r.label, infer_label(v.capture));
  EXPECT_FALSE(run_attack(config(Method::kDlg), v.capture, v.params, nullptr).label.has_value());
}

TEST(FedGig, BinaryOutputRespectsConstraints) {
  const Victim v = victim();
  MgaeConfig mc;
  mc.hidden = 8;
  mc.embedding = 4;
  mc.epochs = 3;
  const MgaeParams mg = train_mgae({v.graph}, mc);
  AttackConfig c = config(Method::kFedGig, 40);
  c.refine_period = 15;
  c.n_max = 1;
  c.n0 = 2;
  c.alpha = 0.05;
  const AttackResult r = run_attack(c, v.capture, v.params, &mg);
  ASSERT_TRUE(r.a_binary.has_value());
  const Tensor& b = *r.a_binary;
  EXPECT_EQ(b, transposed(b));
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(b(i, i), 0.0);
  // Each retained edge must be some endpoint's top-n(T) choice.
  const int n = edges_at(40, c.schedule(5));
  const Tensor& s = r.a_continuous;
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 5; ++j) {
      if (b(i, j) == 0.0) continue;
      EXPECT_GE(s(i, j), c.beta);
      const auto rank_in_row = [&](std::size_t row, std::size_t col) {
        int ahead = 0;
        for (std::size_t k = 0; k < 5; ++k)
          if (k != row && k != col && s(row, k) > s(row, col)) ++ahead;
        return ahead;
      };
      EXPECT_TRUE(rank_in_row(i, j) < n || rank_in_row(j, i) < n) << i << "," << j;
    }
  }
  EXPECT_EQ(r.trace.size(), 40u);
  for (const auto& row : r.trace) {
    EXPECT_TRUE(std::isfinite(row.total));
    EXPECT_NEAR(row.total, row.matching + row.penalty, 1e-12);
  }
}

TEST(FedGig, RefinementNeedsAutoencoder) {
  const Victim v = victim();
  AttackConfig c = config(Method::kFedGig);
  c.refine_period = 10;
  EXPECT_THROW(run_attack(c, v.capture, v.params, nullptr), Error);
  const MgaeParams wrong = MgaeParams::zeros(4);
  EXPECT_THROW(run_attack(c, v.capture, v.params, &wrong), Error);
}

TEST(FedGig, WithoutConstraintsHasNoBinary) {
  const Victim v = victim();
  AttackConfig c = config(Method::kFedGig);
  c.use_constraints = false;
  const AttackResult r = run_attack(c, v.capture, v.params, nullptr);
  EXPECT_FALSE(r.a_binary.has_value());
  EXPECT_EQ(accuracy(r, v.graph.adjacency), 0.0);
}

TEST(Attack, BitIdenticalAcrossRuns) {
  const Victim v = victim();
  const MgaeParams mg = MgaeParams::initialize(3, MgaeConfig{});
  for (Method m : {Method::kDlg, Method::kIdlgBp, Method::kFedGig}) {
    AttackConfig c = config(m);
    c.refine_period = m == Method::kFedGig ? 10 : 0;
    const AttackResult a = run_attack(c, v.capture, v.params, &mg);
    const AttackResult b = run_attack(c, v.capture, v.params, &mg);
    EXPECT_EQ(a.a_continuous, b.a_continuous);
    EXPECT_EQ(a.x_recovered, b.x_recovered);
    ASSERT_EQ(a.trace.size(), b.trace.size());
    for (std::size_t t = 0; t < a.trace.size(); ++t) EXPECT_EQ(a.trace[t].total, b.trace[t].total);
  }
}

TEST(Attack, MatchingLossFallsDuringOptimization) {
  const Victim v = victim();
  const AttackResult r = run_attack(config(Method::kIdlg, 200), v.capture, v.params, nullptr);
  EXPECT_LT(r.trace.back().matching, r.trace.front().matching);
}

TEST(Attack, DivergenceIsFlagged) {
  Victim v = victim();
  v.capture.grads[2](0, 0) = std::numeric_limits<double>::quiet_NaN();
  // W_out column sums decide the label; keep one clearly negative.
  v.capture.grads[2](1, 1) = -1e3;
  for (Method m : {Method::kDlg, Method::kIdlg, Method::kFedGig}) {
    const AttackResult r = run_attack(config(m), v.capture, v.params, nullptr);
    EXPECT_TRUE(r.diverged) << to_string(m);
    EXPECT_NE(r.diagnostic.find("diverged at iteration 0"), std::string::npos) << r.diagnostic;
  }
}

TEST(Attack, ConfigValidation) {
  const Victim v = victim();
  AttackConfig c = config(Method::kIdlg);
  c.lr = 0;
  EXPECT_THROW(run_attack(c, v.capture, v.params, nullptr), Error);
  c = config(Method::kFedGig);
  c.beta = 1.0;
  EXPECT_THROW(run_attack(c, v.capture, v.params, nullptr), Error);
  EXPECT_THROW(run_baseline(config(Method::kFedGig), v.capture, v.params), Error);
  EXPECT_THROW(method_from_string("GAN"), Error);
  EXPECT_EQ(method_from_string("iDLG+BP"), Method::kIdlgBp);
}

TEST(Attack, ConfigJsonRoundTrip) {
  AttackConfig c;
  c.method = Method::kFedGig;
  c.iterations = 77;
  c.lr = 0.05;
  c.seed = 9;
  c.lambda = 2e-3;
  c.n0 = 12;
  c.alpha = 0.1;
  c.n_max = 3;
  c.beta = 0.6;
  c.rule = SelectionRule::kIntersection;
  c.refine_period = 50;
  c.blend = 0.25;
  c.name = "mine";
  const AttackConfig back = attack_config_from_json(nlohmann::json::parse(attack_config_to_json(c).dump()));
  EXPECT_EQ(attack_config_to_json(back), attack_config_to_json(c));
  EXPECT_EQ(back.n0, 12);
  EXPECT_EQ(back.rule, SelectionRule::kIntersection);
}

TEST(Attack, ResultSerialization) {
  const Victim v = victim();
  const AttackResult r = run_attack(config(Method::kIdlgBp, 3), v.capture, v.params, nullptr);
  const auto j = attack_result_to_json(r);
  EXPECT_EQ(j.at("method"), "iDLG_BP");
  const std::string csv = trace_csv(r);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
}

}  // namespace
}  // namespace graphleak
