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

// The victim: a two-layer GCN graph classifier
//
//   logits = mean_rows(relu(Â relu(Â X W1) W2)) W_out,
//   Â = D^-1/2 (A + I) D^-1/2,
//
// and the honest client computation whose gradient leaks.

#include <cstdint>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "graphleak/autodiff.hpp"
#include "graphleak/graph_data.hpp"
#include "graphleak/random.hpp"

namespace graphleak {

struct ModelConfig {
  std::size_t features = 0;
  std::size_t hidden = 100;
  std::size_t classes = 2;
  bool normalize = true;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct GcnParams {
  ModelConfig config;
  Tensor w1;     // F x H
  Tensor w2;     // H x H
  Tensor w_out;  // H x C
  std::uint64_t seed = 0;

  static GcnParams initialize(const ModelConfig& config, std::uint64_t seed) {
    if (config.features == 0 || config.hidden == 0 || config.classes < 2) {
      throw Error("model config needs F >= 1, H >= 1, C >= 2");
    }
    SplitMix64 rng(seed);
    GcnParams p;
    p.config = config;
    p.seed = seed;
    p.w1 = glorot_uniform(config.features, config.hidden, rng);
    p.w2 = glorot_uniform(config.hidden, config.hidden, rng);
    p.w_out = glorot_uniform(config.hidden, config.classes, rng);
    return p;
  }

  std::vector<const Tensor*> tensors() const { return {&w1, &w2, &w_out}; }
  std::vector<Tensor*> tensors() { return {&w1, &w2, &w_out}; }
};

/// Model weights bound into one expression graph.
struct GcnNodes {
  Var w1;
  Var w2;
  Var w_out;

  static GcnNodes bind(ExpressionGraph& g, const GcnParams& p) {
    return {g.variable(p.w1), g.variable(p.w2), g.variable(p.w_out)};
  }
  std::vector<Var> list() const { return {w1, w2, w_out}; }
};

/// D^-1/2 (A + I) D^-1/2 with D the row sums of A + I. Differentiable in A;
/// entries of A must be non-negative.
inline Var normalize_adjacency(const Var& a) {
  const Tensor& v = a.value();
  if (v.rows() != v.cols()) throw ShapeError("adjacency must be square, got " + v.shape_string());
  for (double x : v.values()) {
    if (x < 0.0) throw Error("adjacency has a negative entry");
  }
  ExpressionGraph& g = a.graph();
  const std::size_t n = v.rows();
  const Var with_loops = a + g.constant(Tensor::identity(n));
  const Var inv_sqrt_deg = g.constant(Tensor(n, 1, 1.0)) / sqrt(row_sum(with_loops));
  return with_loops * broadcast(inv_sqrt_deg, n, n) *
         broadcast(transpose(inv_sqrt_deg), n, n);
}

inline Tensor normalize_adjacency(const Tensor& a) {
  ExpressionGraph g;
  return normalize_adjacency(g.constant(a)).value();
}

/// Propagation matrix used by the model: normalized, or A + I when the
/// config disables normalization.
inline Var propagation(const ModelConfig& config, const Var& a) {
  if (config.normalize) return normalize_adjacency(a);
  return a + a.graph().constant(Tensor::identity(a.rows()));
}

/// 1 x C logits.
inline Var gcn_forward(const ModelConfig& config, const GcnNodes& w, const Var& adjacency,
                       const Var& features) {
  const std::size_t n = adjacency.rows();
  if (adjacency.cols() != n || features.rows() != n) {
    throw ShapeError("forward: adjacency " + adjacency.value().shape_string() +
                     " does not match features " + features.value().shape_string());
  }
  if (features.cols() != w.w1.rows()) {
    throw ShapeError("forward: features " + features.value().shape_string() +
                     " do not match W1 " + w.w1.value().shape_string());
  }
  const Var prop = propagation(config, adjacency);
  const Var h1 = relu(matmul(matmul(prop, features), w.w1));
  const Var h2 = relu(matmul(matmul(prop, h1), w.w2));
  const Var pooled = scale(col_sum(h2), 1.0 / static_cast<double>(n));
  return matmul(pooled, w.w_out);
}

inline Tensor gcn_logits(const GcnParams& p, const Tensor& adjacency, const Tensor& features) {
  ExpressionGraph g;
  const GcnNodes w = GcnNodes::bind(g, p);
  return gcn_forward(p.config, w, g.constant(adjacency), g.constant(features)).value();
}

// ---------------------------------------------------------------------------
// Gradient capture

/// What a victim client transmits: one gradient per weight tensor.
struct GradientCapture {
  std::vector<Tensor> grads;  // W1, W2, W_out
  ModelConfig config;
  std::size_t num_nodes = 0;
  std::optional<std::size_t> true_label;  // evaluator only

  std::vector<double> flat() const {
    std::vector<double> out;
    for (const auto& t : grads) out.insert(out.end(), t.values().begin(), t.values().end());
    return out;
  }

  /// Rebuilds per-tensor gradients from a flat vector using this capture's
  /// shapes.
  std::vector<Tensor> unflatten(const std::vector<double>& flat) const {
    std::size_t total = 0;
    for (const auto& t : grads) total += t.size();
    if (flat.size() != total) {
      throw ShapeError("flat gradient has " + std::to_string(flat.size()) + " entries, expected " +
                       std::to_string(total));
    }
    std::vector<Tensor> out;
    std::size_t off = 0;
    for (const auto& t : grads) {
      out.emplace_back(t.rows(), t.cols(),
                       std::vector<double>(flat.begin() + static_cast<std::ptrdiff_t>(off),
                                           flat.begin() + static_cast<std::ptrdiff_t>(off + t.size())));
      off += t.size();
    }
    return out;
  }

  void check_against(const GcnParams& p) const {
    if (!(config == p.config) || grads.size() != 3) {
      throw ShapeError("gradient capture does not match the model configuration");
    }
    const auto ts = p.tensors();
    for (std::size_t i = 0; i < 3; ++i) {
      if (!grads[i].same_shape(*ts[i])) {
        throw ShapeError("gradient capture tensor " + std::to_string(i) + " has shape " +
                         grads[i].shape_string() + ", model has " + ts[i]->shape_string());
      }
    }
  }
};

/// Cross-entropy gradient of one graph with respect to every weight.
inline GradientCapture client_gradient(const GcnParams& params, const LabeledGraph& graph) {
  ExpressionGraph g;
  const GcnNodes w = GcnNodes::bind(g, params);
  const Var logits =
      gcn_forward(params.config, w, g.constant(graph.adjacency), g.constant(graph.features));
  const Var loss = softmax_cross_entropy(logits, graph.label);
  GradientCapture cap;
  cap.grads = g.gradients(loss, w.list());
  cap.config = params.config;
  cap.num_nodes = graph.num_nodes();
  cap.true_label = graph.label;
  return cap;
}

/// Label recovery from the output layer: for a single example the gradient
/// of W_out is pooled^T (p - onehot). With a non-negative pooled vector only
/// the true class column sums below zero.
inline std::size_t infer_label(const GradientCapture& capture) {
  if (capture.grads.size() != 3) throw ShapeError("capture must hold three gradients");
  const Tensor& g = capture.grads[2];
  std::size_t best = 0;
  double best_sum = 0.0;
  for (std::size_t c = 0; c < g.cols(); ++c) {
    double s = 0.0;
    for (std::size_t h = 0; h < g.rows(); ++h) s += g(h, c);
    if (s < best_sum) {
      best_sum = s;
      best = c;
    }
  }
  if (!(best_sum < 0.0)) throw Error("label not inferable: no output column has a negative sum");
  return best;
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json tensor_to_json(const Tensor& t) {
  return {{"shape", {t.rows(), t.cols()}}, {"data", t.storage()}};
}

inline Tensor tensor_from_json(const nlohmann::json& j) {
  const auto shape = j.at("shape").get<std::vector<std::size_t>>();
  if (shape.size() != 2) throw ShapeError("tensor JSON shape must have two entries");
  return Tensor(shape[0], shape[1], j.at("data").get<std::vector<double>>());
}

inline nlohmann::json model_config_to_json(const ModelConfig& c) {
  return {{"features", c.features},
          {"hidden", c.hidden},
          {"classes", c.classes},
          {"normalize", c.normalize}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.features = j.at("features").get<std::size_t>();
  c.hidden = j.at("hidden").get<std::size_t>();
  c.classes = j.at("classes").get<std::size_t>();
  c.normalize = j.value("normalize", true);
  return c;
}

inline nlohmann::json capture_to_json(const GradientCapture& c) {
  nlohmann::json j;
  j["model_config"] = model_config_to_json(c.config);
  j["num_nodes"] = c.num_nodes;
  j["names"] = {"W1", "W2", "W_out"};
  j["grads"] = nlohmann::json::array();
  for (const auto& g : c.grads) j["grads"].push_back(tensor_to_json(g));
  j["flat"] = c.flat();
  if (c.true_label) j["true_label"] = *c.true_label;
  return j;
}

inline GradientCapture capture_from_json(const nlohmann::json& j) {
  GradientCapture c;
  c.config = model_config_from_json(j.at("model_config"));
  c.num_nodes = j.at("num_nodes").get<std::size_t>();
  for (const auto& g : j.at("grads")) c.grads.push_back(tensor_from_json(g));
  if (j.contains("flat") && c.flat() != j.at("flat").get<std::vector<double>>()) {
    throw Error("gradient capture JSON: flat vector disagrees with per-tensor gradients");
  }
  if (j.contains("true_label")) c.true_label = j.at("true_label").get<std::size_t>();
  return c;
}

inline nlohmann::json params_to_json(const GcnParams& p) {
  return {{"model_config", model_config_to_json(p.config)},
          {"seed", p.seed},
          {"W1", tensor_to_json(p.w1)},
          {"W2", tensor_to_json(p.w2)},
          {"W_out", tensor_to_json(p.w_out)}};
}

inline GcnParams params_from_json(const nlohmann::json& j) {
  GcnParams p;
  p.config = model_config_from_json(j.at("model_config"));
  p.seed = j.at("seed").get<std::uint64_t>();
  p.w1 = tensor_from_json(j.at("W1"));
  p.w2 = tensor_from_json(j.at("W2"));
  p.w_out = tensor_from_json(j.at("W_out"));
  return p;
}

}  // namespace graphleak
