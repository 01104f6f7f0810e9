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

// Reconstruction scores against the victim's adjacency, compared in the
// victim's node order.
//
//   accuracy     fraction of off-diagonal entries equal to the truth, on the
//                method's final matrix (binary if it has one, else raw)
//   graph_exact  1 if every off-diagonal entry matches, else 0
//   jaccard      |E_pred & E_true| / |E_pred | E_true| over pairs i<j with
//                score >= 0.5; 1 when both sets are empty
//   mse          mean squared error over all N^2 raw continuous scores
//   auc          Mann-Whitney AUC of raw scores over pairs i<j, ties 1/2

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "graphleak/attack.hpp"
#include "graphleak/tensor.hpp"

namespace graphleak {

namespace detail {

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (!a.same_shape(b) || a.rows() != a.cols()) {
    throw ShapeError(std::string(what) + ": reconstruction " + a.shape_string() +
                     " vs truth " + b.shape_string());
  }
}

}  // namespace detail

inline double accuracy(const Tensor& final_matrix, const Tensor& truth) {
  detail::require_same_shape(final_matrix, truth, "accuracy");
  const std::size_t n = truth.rows();
  if (n < 2) return 1.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && final_matrix(i, j) == truth(i, j)) ++hits;
  return static_cast<double>(hits) / static_cast<double>(n * (n - 1));
}

inline double graph_exact(const Tensor& final_matrix, const Tensor& truth) {
  return accuracy(final_matrix, truth) == 1.0 ? 1.0 : 0.0;
}

inline double jaccard(const Tensor& final_matrix, const Tensor& truth) {
  detail::require_same_shape(final_matrix, truth, "jaccard");
  std::size_t inter = 0;
  std::size_t uni = 0;
  for (std::size_t i = 0; i < truth.rows(); ++i) {
    for (std::size_t j = i + 1; j < truth.cols(); ++j) {
      const bool p = final_matrix(i, j) >= 0.5;
      const bool t = truth(i, j) >= 0.5;
      inter += p && t;
      uni += p || t;
    }
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

inline double mse(const Tensor& continuous, const Tensor& truth) {
  detail::require_same_shape(continuous, truth, "mse");
  double s = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double d = continuous[i] - truth[i];
    s += d * d;
  }
  return s / static_cast<double>(truth.size());
}

/// Rank form of the Mann-Whitney statistic with mid-ranks for ties.
inline double auc(const Tensor& scores, const Tensor& truth) {
  detail::require_same_shape(scores, truth, "auc");
  struct Pair {
    double score;
    bool positive;
  };
  std::vector<Pair> pairs;
  for (std::size_t i = 0; i < truth.rows(); ++i)
    for (std::size_t j = i + 1; j < truth.cols(); ++j)
      pairs.push_back({scores(i, j), truth(i, j) >= 0.5});
  std::size_t pos = 0;
  for (const auto& p : pairs) pos += p.positive;
  const std::size_t neg = pairs.size() - pos;
  if (pos == 0 || neg == 0) throw Error("AUC undefined: truth needs at least one edge and one non-edge");
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) { return a.score < b.score; });
  // Twice the rank sum keeps every quantity an integer.
  std::uint64_t twice_rank_sum = 0;
  for (std::size_t lo = 0; lo < pairs.size();) {
    std::size_t hi = lo;
    while (hi < pairs.size() && pairs[hi].score == pairs[lo].score) ++hi;
    const std::uint64_t twice_mid_rank = (lo + 1) + hi;  // ranks lo+1 .. hi
    for (std::size_t k = lo; k < hi; ++k) {
      if (pairs[k].positive) twice_rank_sum += twice_mid_rank;
    }
    lo = hi;
  }
  const std::uint64_t twice_u = twice_rank_sum - pos * (pos + 1);
  return (static_cast<double>(twice_u) / 2.0) / static_cast<double>(pos * neg);
}

inline double accuracy(const AttackResult& r, const Tensor& truth) {
  return accuracy(r.final_matrix(), truth);
}
inline double jaccard(const AttackResult& r, const Tensor& truth) {
  return jaccard(r.final_matrix(), truth);
}
inline double mse(const AttackResult& r, const Tensor& truth) { return mse(r.a_continuous, truth); }
inline double auc(const AttackResult& r, const Tensor& truth) { return auc(r.a_continuous, truth); }

struct MetricsRecord {
  std::string dataset;
  std::string method;
  std::size_t graph_id = 0;
  std::uint64_t seed = 0;
  double accuracy = 0.0;
  double jaccard = 0.0;
  double mse = 0.0;
  std::optional<double> auc;  // empty when undefined for this truth
  double graph_exact = 0.0;
  std::string status = "ok";

  bool ok() const { return status == "ok"; }
};

inline MetricsRecord score(const AttackResult& r, const Tensor& truth) {
  MetricsRecord m;
  m.method = r.method;
  m.accuracy = accuracy(r, truth);
  m.jaccard = jaccard(r, truth);
  m.mse = mse(r, truth);
  m.graph_exact = graph_exact(r.final_matrix(), truth);
  try {
    m.auc = auc(r, truth);
  } catch (const Error&) {
    m.auc.reset();
  }
  if (r.diverged) m.status = "diverged";
  return m;
}

// ---------------------------------------------------------------------------
// Aggregation

enum class Metric { kAccuracy, kJaccard, kMse, kAuc, kGraphExact };

inline const std::vector<Metric>& table_metrics() {
  static const std::vector<Metric> m{Metric::kAccuracy, Metric::kJaccard, Metric::kMse, Metric::kAuc};
  return m;
}

inline std::string to_string(Metric m) {
  switch (m) {
    case Metric::kAccuracy: return "accuracy";
    case Metric::kJaccard: return "jaccard";
    case Metric::kMse: return "mse";
    case Metric::kAuc: return "auc";
    case Metric::kGraphExact: return "graph_exact";
  }
  return "?";
}

inline std::optional<double> metric_value(const MetricsRecord& r, Metric m) {
  switch (m) {
    case Metric::kAccuracy: return r.accuracy;
    case Metric::kJaccard: return r.jaccard;
    case Metric::kMse: return r.mse;
    case Metric::kAuc: return r.auc;
    case Metric::kGraphExact: return r.graph_exact;
  }
  return std::nullopt;
}

struct Summary {
  double mean = 0.0;
  double std = 0.0;  // population
  std::size_t count = 0;
};

inline Summary summarize(const std::vector<double>& xs) {
  Summary s;
  s.count = xs.size();
  if (xs.empty()) return s;
  double total = 0.0;
  for (double x : xs) total += x;
  s.mean = total / static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - s.mean) * (x - s.mean);
  s.std = std::sqrt(var / static_cast<double>(xs.size()));
  return s;
}

struct AggregateRow {
  std::string method;
  Metric metric = Metric::kAccuracy;
  Summary overall;     // over every (graph, seed) record
  Summary seed_means;  // spread of the per-seed means
};

/// Mean and population std per (method, metric). Failed records are
/// skipped; methods keep their first-appearance order.
inline std::vector<AggregateRow> aggregate(const std::vector<MetricsRecord>& records) {
  if (records.empty()) throw Error("aggregate: no records");
  std::vector<std::string> methods;
  for (const auto& r : records) {
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) {
      methods.push_back(r.method);
    }
  }
  std::vector<AggregateRow> out;
  const std::vector<Metric> metrics{Metric::kAccuracy, Metric::kJaccard, Metric::kMse,
                                    Metric::kAuc, Metric::kGraphExact};
  for (const auto& method : methods) {
    for (Metric metric : metrics) {
      std::vector<double> all;
      std::map<std::uint64_t, std::vector<double>> by_seed;
      for (const auto& r : records) {
        if (r.method != method || !r.ok()) continue;
        const auto v = metric_value(r, metric);
        if (!v) continue;
        all.push_back(*v);
        by_seed[r.seed].push_back(*v);
      }
      std::vector<double> seed_means;
      for (const auto& [seed, xs] : by_seed) seed_means.push_back(summarize(xs).mean);
      out.push_back({method, metric, summarize(all), summarize(seed_means)});
    }
  }
  return out;
}

inline const AggregateRow& find_row(const std::vector<AggregateRow>& rows, const std::string& method,
                                    Metric metric) {
  for (const auto& r : rows) {
    if (r.method == method && r.metric == metric) return r;
  }
  throw Error("no aggregate for method '" + method + "' metric " + to_string(metric));
}

}  // namespace graphleak
