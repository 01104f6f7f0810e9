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

// Masked graph autoencoder used to repair local structure in a
// reconstructed adjacency matrix.
//
//   Z = Â_m relu(Â_m X W1) W2        (Â_m: normalized masked adjacency)
//   Â = sigmoid(Z Z^T)
//   loss = mean((A - Â)^2)           (unmasked A as the target)

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "graphleak/adam.hpp"
#include "graphleak/autodiff.hpp"
#include "graphleak/gcn.hpp"
#include "graphleak/graph_data.hpp"
#include "graphleak/hash.hpp"
#include "graphleak/random.hpp"

namespace graphleak {

struct MgaeConfig {
  std::size_t hidden = 64;
  std::size_t embedding = 32;
  double mask_ratio = 0.3;
  std::size_t epochs = 200;
  double lr = 0.01;
  std::uint64_t seed = 0;
  bool masked_only_loss = false;  // ablation: score only the hidden entries

  void validate() const {
    if (!(mask_ratio >= 0.0 && mask_ratio < 1.0)) throw Error("mgae: mask ratio must lie in [0, 1)");
    if (hidden == 0 || embedding == 0) throw Error("mgae: layer sizes must be positive");
    if (!(lr > 0.0)) throw Error("mgae: learning rate must be positive");
  }
};

struct MgaeParams {
  MgaeConfig config;
  std::size_t features = 0;
  Tensor w1;  // F x hidden
  Tensor w2;  // hidden x embedding
  double final_loss = 0.0;
  std::vector<double> epoch_loss;

  static MgaeParams initialize(std::size_t features, const MgaeConfig& config) {
    config.validate();
    SplitMix64 rng(config.seed);
    MgaeParams p;
    p.config = config;
    p.features = features;
    p.w1 = glorot_uniform(features, config.hidden, rng);
    p.w2 = glorot_uniform(config.hidden, config.embedding, rng);
    return p;
  }

  /// All-zero weights; the decoder then outputs 0.5 everywhere.
  static MgaeParams zeros(std::size_t features, const MgaeConfig& config = {}) {
    MgaeParams p;
    p.config = config;
    p.features = features;
    p.w1 = Tensor(features, config.hidden);
    p.w2 = Tensor(config.hidden, config.embedding);
    return p;
  }

  /// Stable identifier of the architecture and training recipe.
  std::string fingerprint() const {
    nlohmann::json j = {{"features", features},
                        {"hidden", config.hidden},
                        {"embedding", config.embedding},
                        {"mask_ratio", config.mask_ratio},
                        {"epochs", config.epochs},
                        {"lr", config.lr},
                        {"seed", config.seed},
                        {"masked_only_loss", config.masked_only_loss}};
    return sha256_hex(j.dump()).substr(0, 16);
  }
};

/// Drops each undirected edge (both directions) with probability ratio.
inline Tensor mask_edges(const Tensor& a, double ratio, std::uint64_t seed) {
  if (!(ratio >= 0.0 && ratio < 1.0)) throw Error("mask_edges: ratio must lie in [0, 1)");
  if (a.rows() != a.cols()) throw ShapeError("mask_edges of non-square " + a.shape_string());
  Tensor out = a;
  SplitMix64 rng(seed);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = i + 1; j < a.cols(); ++j) {
      if (a(i, j) == 0.0) continue;
      if (rng.bernoulli(ratio)) {
        out(i, j) = 0.0;
        out(j, i) = 0.0;
      }
    }
  }
  return out;
}

inline Var mgae_encode(const Var& w1, const Var& w2, const Var& adjacency, const Var& features) {
  if (features.cols() != w1.rows()) {
    throw ShapeError("encode: features " + features.value().shape_string() + " vs W1 " +
                     w1.value().shape_string());
  }
  const Var prop = normalize_adjacency(adjacency);
  const Var h = relu(matmul(matmul(prop, features), w1));
  return matmul(matmul(prop, h), w2);
}

inline Var mgae_decode(const Var& z) { return sigmoid(matmul(z, transpose(z))); }

inline Tensor encode(const MgaeParams& p, const Tensor& adjacency, const Tensor& features) {
  ExpressionGraph g;
  return mgae_encode(g.constant(p.w1), g.constant(p.w2), g.constant(adjacency),
                     g.constant(features))
      .value();
}

inline Tensor decode(const Tensor& z) {
  ExpressionGraph g;
  return mgae_decode(g.constant(z)).value();
}

/// decode(encode(A, X)) with the diagonal zeroed. A may be continuous.
inline Tensor reconstruct(const MgaeParams& p, const Tensor& adjacency, const Tensor& features) {
  if (features.cols() != p.features) {
    throw ShapeError("autoencoder expects " + std::to_string(p.features) +
                     " feature columns, got " + std::to_string(features.cols()));
  }
  Tensor out = decode(encode(p, adjacency, features));
  for (std::size_t i = 0; i < out.rows(); ++i) out(i, i) = 0.0;
  return out;
}

/// Reconstruction of a binary, symmetric, loop-free adjacency matrix.
inline Tensor refine(const MgaeParams& p, const Tensor& a_binary, const Tensor& features) {
  if (a_binary.rows() != a_binary.cols()) throw ShapeError("refine of non-square adjacency");
  for (std::size_t i = 0; i < a_binary.rows(); ++i) {
    if (a_binary(i, i) != 0.0) throw Error("refine: adjacency has a self-loop");
    for (std::size_t j = 0; j < a_binary.cols(); ++j) {
      const double v = a_binary(i, j);
      if ((v != 0.0 && v != 1.0) || v != a_binary(j, i)) {
        throw Error("refine: adjacency must be symmetric 0/1");
      }
    }
  }
  return reconstruct(p, a_binary, features);
}

/// Loss of one masked forward pass; exposed for gradient checks.
inline Var mgae_loss(const Var& w1, const Var& w2, const Tensor& masked, const Tensor& target,
                     const Tensor& features, bool masked_only) {
  ExpressionGraph& g = w1.graph();
  const Var recon = mgae_decode(mgae_encode(w1, w2, g.constant(masked), g.constant(features)));
  const Var err = square(recon - g.constant(target));
  if (!masked_only) return mean(err);
  Tensor hidden(target.rows(), target.cols());
  double count = 0.0;
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    hidden[i] = target[i] != masked[i] ? 1.0 : 0.0;
    count += hidden[i];
  }
  if (count == 0.0) return scale(sum(err), 0.0);
  return scale(sum(err * g.constant(std::move(hidden))), 1.0 / count);
}

/// One Adam step per graph per epoch, graphs in dataset order.
inline MgaeParams train_mgae(const std::vector<LabeledGraph>& graphs, const MgaeConfig& config) {
  if (graphs.empty()) throw Error("mgae: training set is empty");
  const std::size_t features = graphs.front().feature_dim();
  for (const auto& g : graphs) {
    if (g.feature_dim() != features) throw ShapeError("mgae: graphs disagree on feature dimension");
  }
  MgaeParams p = MgaeParams::initialize(features, config);
  const std::array<const Tensor*, 2> shapes{&p.w1, &p.w2};
  Adam opt(shapes, config.lr);
  const std::array<Tensor*, 2> vars{&p.w1, &p.w2};
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    double total = 0.0;
    for (std::size_t k = 0; k < graphs.size(); ++k) {
      const LabeledGraph& graph = graphs[k];
      const Tensor masked = mask_edges(graph.adjacency, config.mask_ratio,
                                       mix_seed(config.seed, epoch * graphs.size() + k));
      ExpressionGraph g;
      const Var w1 = g.variable(p.w1);
      const Var w2 = g.variable(p.w2);
      const Var loss =
          mgae_loss(w1, w2, masked, graph.adjacency, graph.features, config.masked_only_loss);
      total += loss.value().item();
      const std::vector<Tensor> grads = g.gradients(loss, {w1, w2});
      opt.step(vars, grads);
    }
    p.epoch_loss.push_back(total / static_cast<double>(graphs.size()));
  }
  p.final_loss = p.epoch_loss.empty() ? 0.0 : p.epoch_loss.back();
  return p;
}

inline nlohmann::json mgae_to_json(const MgaeParams& p) {
  return {{"format", "graphleak-mgae-v1"},
          {"features", p.features},
          {"fingerprint", p.fingerprint()},
          {"config",
           {{"hidden", p.config.hidden},
            {"embedding", p.config.embedding},
            {"mask_ratio", p.config.mask_ratio},
            {"epochs", p.config.epochs},
            {"lr", p.config.lr},
            {"seed", p.config.seed},
            {"masked_only_loss", p.config.masked_only_loss}}},
          {"final_loss", p.final_loss},
          {"epoch_loss", p.epoch_loss},
          {"W1", tensor_to_json(p.w1)},
          {"W2", tensor_to_json(p.w2)}};
}

inline MgaeParams mgae_from_json(const nlohmann::json& j) {
  MgaeParams p;
  const auto& c = j.at("config");
  p.config.hidden = c.at("hidden").get<std::size_t>();
  p.config.embedding = c.at("embedding").get<std::size_t>();
  p.config.mask_ratio = c.at("mask_ratio").get<double>();
  p.config.epochs = c.at("epochs").get<std::size_t>();
  p.config.lr = c.at("lr").get<double>();
  p.config.seed = c.at("seed").get<std::uint64_t>();
  p.config.masked_only_loss = c.value("masked_only_loss", false);
  p.features = j.at("features").get<std::size_t>();
  p.w1 = tensor_from_json(j.at("W1"));
  p.w2 = tensor_from_json(j.at("W2"));
  p.final_loss = j.value("final_loss", 0.0);
  p.epoch_loss = j.value("epoch_loss", std::vector<double>{});
  if (p.w1.rows() != p.features || p.w1.cols() != p.config.hidden ||
      p.w2.rows() != p.config.hidden || p.w2.cols() != p.config.embedding) {
    throw ShapeError("autoencoder weights disagree with their recorded shapes");
  }
  if (j.contains("fingerprint") && j.at("fingerprint").get<std::string>() != p.fingerprint()) {
    throw Error("autoencoder weights fingerprint mismatch");
  }
  return p;
}

/// Loads a weights file and checks it against the dataset's feature width.
inline MgaeParams load_mgae(const std::filesystem::path& path, std::size_t expected_features) {
  const MgaeParams p = mgae_from_json(nlohmann::json::parse(read_file(path)));
  if (p.features != expected_features) {
    throw Error("autoencoder weights in " + path.string() + " expect " +
                std::to_string(p.features) + " node features but the dataset has " +
                std::to_string(expected_features));
  }
  return p;
}

}  // namespace graphleak
