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

#include <set>

#include "test_support.hpp"

namespace graphleak {
namespace {

std::vector<LabeledGraph> dataset(std::size_t n) {
  GeneratorConfig c;
  c.num_graphs = n;
  c.max_nodes = 12;
  return generate_synthetic(c);
}

GcnParams model() {
  ModelConfig m;
  m.features = 7;
  m.hidden = 12;
  return GcnParams::initialize(m, 5);
}

TEST(Partition, SingleClientHoldsEverything) {
  const auto gs = dataset(10);
  const auto p = partition_clients(gs, 1, 0);
  ASSERT_EQ(p.size(), 1u);
  EXPECT_EQ(p[0].size(), 10u);
}

TEST(Partition, DisjointCoverAndDeterministic) {
  const auto gs = dataset(10);
  const auto p = partition_clients(gs, 3, 4);
  std::multiset<std::size_t> ids;
  std::size_t total = 0;
  for (const auto& c : p) {
    total += c.size();
    for (const auto& g : c) ids.insert(g.id);
  }
  EXPECT_EQ(total, 10u);
  EXPECT_EQ(std::set<std::size_t>(ids.begin(), ids.end()).size(), 10u);
  const auto q = partition_clients(gs, 3, 4);
  for (std::size_t k = 0; k < 3; ++k)
    for (std::size_t i = 0; i < p[k].size(); ++i) EXPECT_EQ(p[k][i].id, q[k][i].id);
  EXPECT_THROW(partition_clients(gs, 11, 0), Error);
}

TEST(Partition, WeightsSumToOne) {
  const auto p = partition_clients(dataset(17), 4, 1);
  double s = 0;
  for (double w : aggregation_weights(p)) s += w;
  EXPECT_NEAR(s, 1.0, 1e-15);
}

TEST(Rounds, ZeroRoundsLeaveParamsUnchanged) {
  const auto gs = dataset(6);
  const auto params = model();
  FederationConfig c;
  const auto r = run_rounds(c, params, partition_clients(gs, 2, 0));
  EXPECT_EQ(r.final_params.w1, params.w1);
  EXPECT_EQ(r.victim_params.w2, params.w2);
}

TEST(Rounds, OneClientOneGraphIsGradientDescent) {
  const auto gs = dataset(1);
  const auto params = model();
  FederationConfig c;
  c.rounds = 1;
  c.learning_rate = 0.05;
  const auto r = run_rounds(c, params, {{gs[0]}});
  const auto g = client_gradient(params, gs[0]);
  for (std::size_t i = 0; i < params.w2.size(); ++i) {
    EXPECT_DOUBLE_EQ(r.final_params.w2[i], params.w2[i] - 0.05 * g.grads[1][i]);
  }
}

TEST(Rounds, WeightedAggregationEqualsPooledGradient) {
  const auto gs = dataset(8);
  const auto params = model();
  FederationConfig c;
  c.rounds = 1;
  c.num_clients = 2;
  const auto fed = run_rounds(c, params, partition_clients(gs, 2, 9));
  const auto pooled = run_rounds(c, params, {gs});
  const auto a = fed.final_params.tensors();
  const auto b = pooled.final_params.tensors();
  for (std::size_t i = 0; i < 3; ++i) EXPECT_LT(max_abs_diff(*a[i], *b[i]), 1e-9);
}

TEST(Rounds, CaptureMatchesDirectGradient) {
  const auto gs = dataset(6);
  const auto params = model();
  FederationConfig c;
  c.rounds = 3;
  c.victim_round = 2;
  c.num_clients = 2;
  c.victim_client = 1;
  c.victim_graph = 1;
  const auto parts = partition_clients(gs, 2, 0);
  const auto r = run_rounds(c, params, parts);
  const auto direct = client_gradient(r.victim_params, parts[1][1]);
  EXPECT_EQ(r.capture.flat(), direct.flat());
  EXPECT_FALSE(r.victim_params.w1 == params.w1);
}

TEST(Rounds, InvalidConfigurations) {
  const auto gs = dataset(4);
  const auto params = model();
  FederationConfig c;
  EXPECT_THROW(run_rounds(c, params, {gs, {}}), Error);
  c.victim_round = 1;
  EXPECT_THROW(run_rounds(c, params, {gs}), Error);
  c.victim_round = 0;
  c.victim_client = 2;
  EXPECT_THROW(run_rounds(c, params, {gs}), Error);
}

}  // namespace
}  // namespace graphleak
