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

// Gradient inversion against the GCN victim. The attacker optimizes pseudo
// adjacency logits and node features so that the gradient they induce
// matches the leaked one in squared L2 distance.
//
//   DLG, DLG_BP     learn soft label logits jointly with the graph
//   iDLG, iDLG_BP   read the label off the output-layer gradient first
//   *_BP            threshold sigmoid(logits) at 0.5 after the last step
//   FedGIG          iDLG label + per-iteration adjacency constraints,
//                   an edge-count penalty and periodic autoencoder repair

#include <chrono>
#include <cmath>
#include <cstdint>
#include <nlohmann/json.hpp>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "graphleak/adam.hpp"
#include "graphleak/autodiff.hpp"
#include "graphleak/constraints.hpp"
#include "graphleak/gcn.hpp"
#include "graphleak/mgae.hpp"
#include "graphleak/random.hpp"

namespace graphleak {

enum class Method { kDlg, kDlgBp, kIdlg, kIdlgBp, kFedGig };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::kDlg: return "DLG";
    case Method::kDlgBp: return "DLG_BP";
    case Method::kIdlg: return "iDLG";
    case Method::kIdlgBp: return "iDLG_BP";
    case Method::kFedGig: return "FedGIG";
  }
  return "?";
}

inline Method method_from_string(const std::string& s) {
  for (Method m : {Method::kDlg, Method::kDlgBp, Method::kIdlg, Method::kIdlgBp, Method::kFedGig}) {
    if (to_string(m) == s) return m;
  }
  if (s == "DLG+BP") return Method::kDlgBp;
  if (s == "iDLG+BP") return Method::kIdlgBp;
  throw Error("unknown attack method '" + s + "'");
}

inline bool learns_label(Method m) { return m == Method::kDlg || m == Method::kDlgBp; }
inline bool projects_binary(Method m) { return m == Method::kDlgBp || m == Method::kIdlgBp; }

struct AttackConfig {
  Method method = Method::kFedGig;
  std::size_t iterations = 1000;
  double lr = 0.1;
  std::uint64_t seed = 0;
  // FedGIG only
  double lambda = 1e-3;
  std::optional<int> n0;  // defaults to N - 1 (never below n_max)
  double alpha = 0.15;
  int n_max = 4;
  double beta = 0.5;
  std::size_t refine_period = 100;  // 0 disables autoencoder repair
  double blend = 0.5;
  bool use_constraints = true;
  SelectionRule rule = SelectionRule::kUnion;
  std::string name;  // display name; defaults to the method name

  std::string display_name() const { return name.empty() ? to_string(method) : name; }

  void validate() const {
    if (!(lr > 0.0)) throw Error("attack: learning rate must be positive");
    if (!(beta > 0.0 && beta < 1.0)) throw Error("attack: beta must lie in (0, 1)");
    if (!(alpha >= 0.0)) throw Error("attack: alpha must be non-negative");
    if (n_max < 1) throw Error("attack: n_max must be at least 1");
    if (!(blend >= 0.0 && blend <= 1.0)) throw Error("attack: blend must lie in [0, 1]");
    if (!(lambda >= 0.0)) throw Error("attack: lambda must be non-negative");
  }

  ConstraintSchedule schedule(std::size_t num_nodes) const {
    ConstraintSchedule s;
    const int default_n0 = static_cast<int>(num_nodes) - 1;
    s.n0 = std::max(n0.value_or(default_n0), n_max);
    s.alpha = alpha;
    s.n_max = n_max;
    s.beta = beta;
    s.rule = rule;
    return s;
  }
};

/// What the attacker optimizes.
struct AttackState {
  Tensor a_logits;                    // N x N, unconstrained
  Tensor x_hat;                       // N x F
  std::optional<Tensor> label_logits; // 1 x C, DLG family
  std::optional<std::size_t> label;   // inferred, iDLG family and FedGIG
  long long t = 0;
};

/// Label term of the victim loss: a hard class or learnable soft logits.
struct LabelTarget {
  std::optional<std::size_t> hard;
  std::optional<Var> soft;
};

/// ||grad_w L(adjacency, features) - captured||^2 summed over W1, W2, W_out,
/// as a node that can be differentiated w.r.t. adjacency and features.
inline Var matching_loss(const Var& adjacency, const Var& features, const LabelTarget& label,
                         const GradientCapture& capture, const GcnParams& params) {
  capture.check_against(params);
  if (adjacency.rows() != capture.num_nodes || adjacency.cols() != capture.num_nodes) {
    throw ShapeError("matching loss: adjacency " + adjacency.value().shape_string() +
                     " does not match the captured graph size " +
                     std::to_string(capture.num_nodes));
  }
  if (features.rows() != capture.num_nodes || features.cols() != params.config.features) {
    throw ShapeError("matching loss: features " + features.value().shape_string() +
                     " do not match the model");
  }
  ExpressionGraph& g = adjacency.graph();
  const GcnNodes w = GcnNodes::bind(g, params);
  const Var logits = gcn_forward(params.config, w, adjacency, features);
  Var loss;
  if (label.hard) {
    loss = softmax_cross_entropy(logits, *label.hard);
  } else if (label.soft) {
    loss = -sum(softmax_rows(*label.soft) * log_softmax_rows(logits));
  } else {
    throw Error("matching loss: no label target");
  }
  const std::vector<Var> grads = g.gradient_nodes(loss, w.list());
  Var total;
  for (std::size_t i = 0; i < grads.size(); ++i) {
    const Var d = sum(square(grads[i] - g.constant(capture.grads[i])));
    total = i == 0 ? d : total + d;
  }
  return total;
}

struct TraceRow {
  double matching = 0.0;
  double penalty = 0.0;
  double total = 0.0;
};

struct AttackResult {
  std::string method;
  Tensor a_continuous;             // raw scores
  std::optional<Tensor> a_binary;  // methods that project to {0,1}
  Tensor x_recovered;
  std::optional<std::size_t> label;
  std::vector<TraceRow> trace;
  double wallclock = 0.0;
  bool diverged = false;
  std::string diagnostic;

  /// Final adjacency a method reports: binary when it has one.
  const Tensor& final_matrix() const { return a_binary ? *a_binary : a_continuous; }
};

namespace detail {

inline AttackState initial_state(const AttackConfig& cfg, const GradientCapture& capture) {
  SplitMix64 rng(cfg.seed);
  AttackState st;
  st.a_logits = normal_tensor(capture.num_nodes, capture.num_nodes, rng);
  st.x_hat = normal_tensor(capture.num_nodes, capture.config.features, rng);
  if (learns_label(cfg.method)) {
    st.label_logits = normal_tensor(1, capture.config.classes, rng);
  } else {
    st.label = infer_label(capture);
  }
  return st;
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

inline void mark_diverged(AttackResult& r, std::size_t t, const std::string& why) {
  r.diverged = true;
  std::ostringstream os;
  os << "diverged at iteration " << t << ": " << why;
  r.diagnostic = os.str();
}

inline double logit_clamped(double p) {
  const double q = std::clamp(p, 1e-6, 1.0 - 1e-6);
  return std::log(q / (1.0 - q));
}

}  // namespace detail

/// DLG, DLG_BP, iDLG, iDLG_BP: plain gradient matching on sigmoid(logits).
inline AttackResult run_baseline(const AttackConfig& cfg, const GradientCapture& capture,
                                 const GcnParams& params) {
  cfg.validate();
  if (cfg.method == Method::kFedGig) throw Error("run_baseline: FedGIG is not a baseline");
  capture.check_against(params);
  const detail::Stopwatch clock;
  AttackState st = detail::initial_state(cfg, capture);
  std::vector<const Tensor*> shapes{&st.a_logits, &st.x_hat};
  std::vector<Tensor*> vars{&st.a_logits, &st.x_hat};
  if (st.label_logits) {
    shapes.push_back(&*st.label_logits);
    vars.push_back(&*st.label_logits);
  }
  Adam opt(shapes, cfg.lr);

  AttackResult r;
  r.method = cfg.display_name();
  r.trace.reserve(cfg.iterations);
  for (std::size_t t = 0; t < cfg.iterations; ++t) {
    ExpressionGraph g;
    std::vector<Var> wrt{g.variable(st.a_logits), g.variable(st.x_hat)};
    LabelTarget label;
    if (st.label_logits) {
      wrt.push_back(g.variable(*st.label_logits));
      label.soft = wrt.back();
    } else {
      label.hard = st.label;
    }
    const Var loss = matching_loss(sigmoid(wrt[0]), wrt[1], label, capture, params);
    const double value = loss.value().item();
    if (!std::isfinite(value)) {
      detail::mark_diverged(r, t, "non-finite matching loss");
      break;
    }
    r.trace.push_back({value, 0.0, value});
    try {
      opt.step(vars, g.gradients(loss, wrt));
    } catch (const DivergenceError& e) {
      detail::mark_diverged(r, t, e.what());
      break;
    }
    st.t = static_cast<long long>(t) + 1;
  }
  r.a_continuous = st.a_logits;
  if (projects_binary(cfg.method)) {
    const Tensor probs = logistic(st.a_logits);
    Tensor bin(probs.rows(), probs.cols());
    for (std::size_t i = 0; i < probs.size(); ++i) bin[i] = probs[i] >= 0.5 ? 1.0 : 0.0;
    r.a_binary = std::move(bin);
  }
  r.x_recovered = st.x_hat;
  r.label = st.label;
  r.wallclock = clock.seconds();
  return r;
}

/// FedGIG. Each iteration: constrain the logits, match gradients on the
/// sparsified continuous matrix, add lambda * sum(A_binary) through a
/// straight-through estimator, take an Adam step; every refine_period
/// iterations and once at the end blend the autoencoder's reconstruction
/// back into the logits.
inline AttackResult run_fedgig(const AttackConfig& cfg, const GradientCapture& capture,
                               const GcnParams& params, const MgaeParams* mgae) {
  cfg.validate();
  if (cfg.method != Method::kFedGig) throw Error("run_fedgig: method must be FedGIG");
  capture.check_against(params);
  const bool refines = cfg.refine_period > 0;
  if (refines && mgae == nullptr) throw Error("run_fedgig: autoencoder required when refining");
  if (refines && mgae->features != params.config.features) {
    throw Error("run_fedgig: autoencoder feature dimension does not match the model");
  }
  const ConstraintSchedule schedule = cfg.schedule(capture.num_nodes);
  schedule.validate();

  const detail::Stopwatch clock;
  AttackState st = detail::initial_state(cfg, capture);
  Adam opt(std::vector<const Tensor*>{&st.a_logits, &st.x_hat}, cfg.lr);
  const std::vector<Tensor*> vars{&st.a_logits, &st.x_hat};

  const auto refine_logits = [&](long long t) {
    Tensor recon;
    if (cfg.use_constraints) {
      recon = refine(*mgae, constrain_adjacency(st.a_logits, t, schedule).a_binary, st.x_hat);
    } else {
      recon = reconstruct(*mgae, logistic(st.a_logits), st.x_hat);
    }
    const Tensor probs = logistic(st.a_logits);
    for (std::size_t i = 0; i < probs.size(); ++i) {
      st.a_logits[i] =
          detail::logit_clamped(cfg.blend * recon[i] + (1.0 - cfg.blend) * probs[i]);
    }
  };

  AttackResult r;
  r.method = cfg.display_name();
  r.label = st.label;
  r.trace.reserve(cfg.iterations);
  const LabelTarget label{st.label, std::nullopt};
  for (std::size_t t = 0; t < cfg.iterations; ++t) {
    ExpressionGraph g;
    const std::vector<Var> wrt{g.variable(st.a_logits), g.variable(st.x_hat)};
    TraceRow row;
    Var total;
    if (cfg.use_constraints) {
      const auto c = constrain_adjacency(wrt[0], static_cast<long long>(t), schedule);
      const Var match = matching_loss(c.a_tmp, wrt[1], label, capture, params);
      // Straight-through: the value is lambda * sum(A_binary), the gradient
      // is that of lambda * sum(sigmoid(logits)) on the surviving entries.
      const Var surrogate =
          scale(sum(sigmoid(wrt[0]) * g.constant(c.a_binary)), cfg.lambda);
      double edges = 0.0;
      for (double v : c.a_binary.values()) edges += v;
      const double penalty = cfg.lambda * edges;
      const Var penalty_node = add_scalar(surrogate, penalty - surrogate.value().item());
      total = match + penalty_node;
      row.matching = match.value().item();
      row.penalty = penalty;
    } else {
      total = matching_loss(sigmoid(wrt[0]), wrt[1], label, capture, params);
      row.matching = total.value().item();
    }
    row.total = total.value().item();
    if (!std::isfinite(row.total)) {
      detail::mark_diverged(r, t, "non-finite loss");
      break;
    }
    r.trace.push_back(row);
    try {
      opt.step(vars, g.gradients(total, wrt));
    } catch (const DivergenceError& e) {
      detail::mark_diverged(r, t, e.what());
      break;
    }
    st.t = static_cast<long long>(t) + 1;
    if (refines && st.t % static_cast<long long>(cfg.refine_period) == 0 &&
        st.t < static_cast<long long>(cfg.iterations)) {
      refine_logits(st.t);
    }
  }
  if (refines && !r.diverged) refine_logits(st.t);

  if (cfg.use_constraints) {
    ConstrainedAdjacency c = constrain_adjacency(st.a_logits, st.t, schedule);
    r.a_continuous = std::move(c.a_tmp);
    r.a_binary = std::move(c.a_binary);
  } else {
    r.a_continuous = st.a_logits;
  }
  r.x_recovered = st.x_hat;
  r.wallclock = clock.seconds();
  return r;
}

inline AttackResult run_attack(const AttackConfig& cfg, const GradientCapture& capture,
                               const GcnParams& params, const MgaeParams* mgae) {
  if (cfg.method == Method::kFedGig) return run_fedgig(cfg, capture, params, mgae);
  return run_baseline(cfg, capture, params);
}

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::json attack_config_to_json(const AttackConfig& c) {
  nlohmann::json j = {{"method", to_string(c.method)},
                      {"name", c.display_name()},
                      {"iterations", c.iterations},
                      {"attack_lr", c.lr},
                      {"seed", c.seed}};
  if (c.method == Method::kFedGig) {
    j["lambda"] = c.lambda;
    j["constraints"] = {{"n0", c.n0 ? nlohmann::json(*c.n0) : nlohmann::json("N-1")},
                        {"alpha", c.alpha},
                        {"n_max", c.n_max},
                        {"beta", c.beta},
                        {"rule", c.rule == SelectionRule::kUnion ? "union" : "intersection"},
                        {"enabled", c.use_constraints}};
    j["refine_period"] = c.refine_period;
    j["blend"] = c.blend;
  }
  return j;
}

/// Reads an attack entry; missing keys keep the values of `base`.
inline AttackConfig attack_config_from_json(const nlohmann::json& j, AttackConfig base = {}) {
  AttackConfig c = base;
  if (j.contains("method")) c.method = method_from_string(j.at("method").get<std::string>());
  c.name = j.value("name", std::string());
  c.iterations = j.value("iterations", c.iterations);
  c.lr = j.value("attack_lr", c.lr);
  c.seed = j.value("seed", c.seed);
  c.lambda = j.value("lambda", c.lambda);
  if (j.contains("constraints")) {
    const auto& k = j.at("constraints");
    if (k.contains("n0") && k.at("n0").is_number_integer()) c.n0 = k.at("n0").get<int>();
    c.alpha = k.value("alpha", c.alpha);
    c.n_max = k.value("n_max", c.n_max);
    c.beta = k.value("beta", c.beta);
    c.use_constraints = k.value("enabled", c.use_constraints);
    const std::string rule = k.value("rule", std::string("union"));
    if (rule == "union") {
      c.rule = SelectionRule::kUnion;
    } else if (rule == "intersection") {
      c.rule = SelectionRule::kIntersection;
    } else {
      throw Error("unknown selection rule '" + rule + "'");
    }
  }
  c.refine_period = j.value("refine_period", c.refine_period);
  c.blend = j.value("blend", c.blend);
  c.validate();
  return c;
}

inline nlohmann::json attack_result_to_json(const AttackResult& r) {
  nlohmann::json j;
  j["method"] = r.method;
  j["A_continuous"] = tensor_to_json(r.a_continuous);
  j["A_binary"] = r.a_binary ? tensor_to_json(*r.a_binary) : nlohmann::json();
  j["X_recovered"] = tensor_to_json(r.x_recovered);
  j["label"] = r.label ? nlohmann::json(*r.label) : nlohmann::json();
  j["loss_trace"] = nlohmann::json::array();
  for (const auto& row : r.trace) j["loss_trace"].push_back(row.matching);
  j["wallclock"] = r.wallclock;
  j["diverged"] = r.diverged;
  if (!r.diagnostic.empty()) j["diagnostic"] = r.diagnostic;
  return j;
}

/// CSV with columns iteration, matching_loss, penalty, total.
inline std::string trace_csv(const AttackResult& r) {
  std::ostringstream os;
  os.precision(17);
  os << "iteration,matching_loss,penalty,total\n";
  for (std::size_t t = 0; t < r.trace.size(); ++t) {
    os << t << ',' << r.trace[t].matching << ',' << r.trace[t].penalty << ','
       << r.trace[t].total << '\n';
  }
  return os.str();
}

}  // namespace graphleak
