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

#include <cstdint>
#include <vector>

#include "graphleak/gcn.hpp"
#include "graphleak/graph_data.hpp"
#include "graphleak/random.hpp"

namespace graphleak {

struct FederationConfig {
  std::size_t num_clients = 1;
  std::uint64_t partition_seed = 0;
  std::size_t rounds = 0;
  double learning_rate = 0.01;
  std::size_t victim_client = 0;
  std::size_t victim_round = 0;  // in [0, rounds]; rounds means "after the last update"
  std::size_t victim_graph = 0;  // index inside the victim client's partition
};

/// Shuffles the dataset and deals it into K contiguous, near-equal shares.
inline std::vector<std::vector<LabeledGraph>> partition_clients(
    const std::vector<LabeledGraph>& graphs, std::size_t num_clients, std::uint64_t seed) {
  if (num_clients == 0) throw Error("federation needs at least one client");
  if (num_clients > graphs.size()) {
    throw Error("cannot split " + std::to_string(graphs.size()) + " graphs across " +
                std::to_string(num_clients) + " clients");
  }
  std::vector<std::size_t> order(graphs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  SplitMix64 rng(seed);
  rng.shuffle(order);
  std::vector<std::vector<LabeledGraph>> out(num_clients);
  const std::size_t base = graphs.size() / num_clients;
  const std::size_t extra = graphs.size() % num_clients;
  std::size_t pos = 0;
  for (std::size_t k = 0; k < num_clients; ++k) {
    const std::size_t take = base + (k < extra ? 1 : 0);
    for (std::size_t i = 0; i < take; ++i) out[k].push_back(graphs[order[pos++]]);
  }
  return out;
}

/// |G^k| / |G| for each client.
inline std::vector<double> aggregation_weights(
    const std::vector<std::vector<LabeledGraph>>& partitions) {
  std::size_t total = 0;
  for (const auto& p : partitions) total += p.size();
  std::vector<double> w;
  for (const auto& p : partitions) w.push_back(static_cast<double>(p.size()) / total);
  return w;
}

/// Mean per-graph gradient over a client's local data.
inline std::vector<Tensor> client_mean_gradient(const GcnParams& params,
                                                const std::vector<LabeledGraph>& local) {
  std::vector<Tensor> acc;
  for (const auto& g : local) {
    GradientCapture c = client_gradient(params, g);
    if (acc.empty()) {
      acc = std::move(c.grads);
    } else {
      for (std::size_t i = 0; i < acc.size(); ++i)
        for (std::size_t k = 0; k < acc[i].size(); ++k) acc[i][k] += c.grads[i][k];
    }
  }
  const double inv = 1.0 / static_cast<double>(local.size());
  for (auto& t : acc)
    for (double& v : t.values()) v *= inv;
  return acc;
}

struct FederationResult {
  GcnParams final_params;
  GcnParams victim_params;  // model state the captured gradient was taken at
  GradientCapture capture;
};

/// FedAvg on gradients: each round every client reports its mean local
/// gradient and the server steps w -= lr * sum_k (|G^k|/|G|) grad_k. The
/// victim's per-graph gradient is captured at the start of victim_round.
inline FederationResult run_rounds(const FederationConfig& config, const GcnParams& params,
                                   const std::vector<std::vector<LabeledGraph>>& partitions) {
  if (partitions.empty()) throw Error("federation needs at least one client");
  for (std::size_t k = 0; k < partitions.size(); ++k) {
    if (partitions[k].empty()) throw Error("client " + std::to_string(k) + " has no graphs");
  }
  if (config.victim_client >= partitions.size()) throw Error("victim client index out of range");
  if (config.victim_round > config.rounds) throw Error("victim round index out of range");
  if (config.victim_graph >= partitions[config.victim_client].size()) {
    throw Error("victim graph index out of range");
  }

  const std::vector<double> weights = aggregation_weights(partitions);
  FederationResult result;
  GcnParams current = params;
  for (std::size_t round = 0; round <= config.rounds; ++round) {
    if (round == config.victim_round) {
      result.victim_params = current;
      result.capture =
          client_gradient(current, partitions[config.victim_client][config.victim_graph]);
    }
    if (round == config.rounds) break;
    std::vector<std::vector<Tensor>> grads;
    grads.reserve(partitions.size());
    for (const auto& local : partitions) grads.push_back(client_mean_gradient(current, local));
    auto targets = current.tensors();
    for (std::size_t i = 0; i < targets.size(); ++i) {
      Tensor& w = *targets[i];
      for (std::size_t e = 0; e < w.size(); ++e) {
        double step = 0.0;
        for (std::size_t k = 0; k < grads.size(); ++k) step += weights[k] * grads[k][i][e];
        w[e] -= config.learning_rate * step;
      }
    }
  }
  result.final_params = std::move(current);
  return result;
}

}  // namespace graphleak
