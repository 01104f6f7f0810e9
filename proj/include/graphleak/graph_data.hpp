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

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "graphleak/random.hpp"
#include "graphleak/tensor.hpp"

namespace graphleak {

/// One training example: symmetric 0/1 adjacency with zero diagonal, one-hot
/// node features and a class index.
struct LabeledGraph {
  std::size_t id = 0;  // position in the source dataset
  Tensor adjacency;
  Tensor features;
  std::size_t label = 0;

  std::size_t num_nodes() const noexcept { return adjacency.rows(); }
  std::size_t feature_dim() const noexcept { return features.cols(); }

  std::size_t num_edges() const {
    std::size_t e = 0;
    for (std::size_t i = 0; i < num_nodes(); ++i)
      for (std::size_t j = i + 1; j < num_nodes(); ++j) e += adjacency(i, j) != 0.0;
    return e;
  }

  void validate() const {
    const std::size_t n = num_nodes();
    if (n == 0) throw Error("graph " + std::to_string(id) + " has no nodes");
    if (adjacency.cols() != n || features.rows() != n) {
      throw ShapeError("graph " + std::to_string(id) + ": adjacency " +
                       adjacency.shape_string() + " and features " +
                       features.shape_string() + " disagree");
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (adjacency(i, i) != 0.0) throw Error("graph has a self-loop");
      for (std::size_t j = 0; j < n; ++j) {
        const double a = adjacency(i, j);
        if ((a != 0.0 && a != 1.0) || a != adjacency(j, i)) {
          throw Error("graph " + std::to_string(id) + ": adjacency is not symmetric 0/1");
        }
      }
      double row = 0.0;
      for (std::size_t f = 0; f < features.cols(); ++f) {
        const double x = features(i, f);
        if (x != 0.0 && x != 1.0) throw Error("feature row is not one-hot");
        row += x;
      }
      if (row != 1.0) throw Error("feature row is not one-hot");
    }
  }
};

inline std::size_t num_classes(const std::vector<LabeledGraph>& graphs) {
  std::size_t c = 0;
  for (const auto& g : graphs) c = std::max(c, g.label + 1);
  return std::max<std::size_t>(c, 2);
}

// ---------------------------------------------------------------------------
// TU text format

namespace detail {

struct TuLine {
  std::size_t number;  // 1-based
  std::vector<long long> values;
};

inline std::vector<TuLine> read_tu_file(const std::filesystem::path& path, bool required) {
  std::ifstream in(path);
  if (!in) {
    if (required) throw Error("missing dataset file: " + path.string());
    return {};
  }
  std::vector<TuLine> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    TuLine parsed{number, {}};
    std::size_t pos = 0;
    while (true) {
      std::size_t next = line.find(',', pos);
      if (next == std::string::npos) next = line.size();
      std::string_view tok(line.data() + pos, next - pos);
      while (!tok.empty() && (tok.front() == ' ' || tok.front() == '\t')) tok.remove_prefix(1);
      while (!tok.empty() && (tok.back() == ' ' || tok.back() == '\t')) tok.remove_suffix(1);
      long long v = 0;
      std::size_t used = 0;
      try {
        v = std::stoll(std::string(tok), &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (tok.empty() || used != tok.size()) {
        throw Error(path.filename().string() + ":" + std::to_string(number) +
                    ": non-integer token '" + std::string(tok) + "'");
      }
      parsed.values.push_back(v);
      if (next == line.size()) break;
      pos = next + 1;
    }
    out.push_back(std::move(parsed));
  }
  return out;
}

inline std::map<long long, std::size_t> dense_index(const std::set<long long>& values) {
  std::map<long long, std::size_t> out;
  std::size_t k = 0;
  for (long long v : values) out[v] = k++;
  return out;
}

}  // namespace detail

/// Reads <dir>/<name>_{A,graph_indicator,graph_labels,node_labels}.txt.
/// Class labels and node labels are remapped to 0-based indices in sorted
/// order; edges are symmetrized and self-loops dropped.
inline std::vector<LabeledGraph> load_tu_dataset(const std::filesystem::path& dir,
                                                 const std::string& name) {
  const auto file = [&](const char* suffix) { return dir / (name + "_" + suffix + ".txt"); };
  const auto indicator = detail::read_tu_file(file("graph_indicator"), true);
  const auto graph_labels = detail::read_tu_file(file("graph_labels"), true);
  const auto node_labels = detail::read_tu_file(file("node_labels"), true);
  const auto edges = detail::read_tu_file(file("A"), true);

  const auto expect_arity = [](const detail::TuLine& l, std::size_t k, const std::string& f) {
    if (l.values.size() != k) {
      throw Error(f + ":" + std::to_string(l.number) + ": expected " + std::to_string(k) +
                  " value(s)");
    }
  };

  const std::size_t num_graphs = graph_labels.size();
  std::set<long long> class_values;
  for (const auto& l : graph_labels) {
    expect_arity(l, 1, name + "_graph_labels.txt");
    class_values.insert(l.values[0]);
  }
  const auto class_index = detail::dense_index(class_values);

  if (node_labels.size() != indicator.size()) {
    throw Error(name + "_node_labels.txt has " + std::to_string(node_labels.size()) +
                " lines but " + name + "_graph_indicator.txt has " +
                std::to_string(indicator.size()));
  }
  std::set<long long> node_values;
  for (const auto& l : node_labels) {
    expect_arity(l, 1, name + "_node_labels.txt");
    node_values.insert(l.values[0]);
  }
  const auto node_index = detail::dense_index(node_values);
  const std::size_t feature_dim = node_index.size();

  // global node -> (graph, local index)
  std::vector<std::size_t> graph_of(indicator.size());
  std::vector<std::size_t> local_of(indicator.size());
  std::vector<std::size_t> counts(num_graphs, 0);
  for (std::size_t n = 0; n < indicator.size(); ++n) {
    const auto& l = indicator[n];
    expect_arity(l, 1, name + "_graph_indicator.txt");
    const long long gid = l.values[0];
    if (gid < 1 || static_cast<std::size_t>(gid) > num_graphs) {
      throw Error(name + "_graph_indicator.txt:" + std::to_string(l.number) +
                  ": node references nonexistent graph id " + std::to_string(gid));
    }
    graph_of[n] = static_cast<std::size_t>(gid - 1);
    local_of[n] = counts[graph_of[n]]++;
  }

  std::vector<LabeledGraph> graphs(num_graphs);
  for (std::size_t g = 0; g < num_graphs; ++g) {
    if (counts[g] == 0) throw Error("graph " + std::to_string(g + 1) + " has no nodes");
    graphs[g].id = g;
    graphs[g].adjacency = Tensor(counts[g], counts[g]);
    graphs[g].features = Tensor(counts[g], feature_dim);
    graphs[g].label = class_index.at(graph_labels[g].values[0]);
  }
  for (std::size_t n = 0; n < node_labels.size(); ++n) {
    graphs[graph_of[n]].features(local_of[n], node_index.at(node_labels[n].values[0])) = 1.0;
  }
  for (const auto& l : edges) {
    expect_arity(l, 2, name + "_A.txt");
    const long long u = l.values[0];
    const long long v = l.values[1];
    const auto total = static_cast<long long>(indicator.size());
    if (u < 1 || v < 1 || u > total || v > total) {
      throw Error(name + "_A.txt:" + std::to_string(l.number) + ": node id out of range");
    }
    const std::size_t a = static_cast<std::size_t>(u - 1);
    const std::size_t b = static_cast<std::size_t>(v - 1);
    if (graph_of[a] != graph_of[b]) {
      throw Error(name + "_A.txt:" + std::to_string(l.number) + ": edge spans two graphs");
    }
    if (a == b) continue;
    auto& adj = graphs[graph_of[a]].adjacency;
    adj(local_of[a], local_of[b]) = 1.0;
    adj(local_of[b], local_of[a]) = 1.0;
  }
  return graphs;
}

/// Writes graphs in TU format. Node labels are the argmax of each one-hot
/// feature row. Reloading reproduces the graphs when every feature column
/// is used by at least one node and every class index occurs.
inline void write_tu_dataset(const std::filesystem::path& dir, const std::string& name,
                             const std::vector<LabeledGraph>& graphs) {
  std::filesystem::create_directories(dir);
  const auto open = [&](const char* suffix) {
    std::ofstream out(dir / (name + "_" + suffix + ".txt"));
    if (!out) throw Error("cannot write dataset file for " + name);
    return out;
  };
  auto a = open("A");
  auto ind = open("graph_indicator");
  auto gl = open("graph_labels");
  auto nl = open("node_labels");
  std::size_t offset = 0;
  for (std::size_t g = 0; g < graphs.size(); ++g) {
    const auto& graph = graphs[g];
    const std::size_t n = graph.num_nodes();
    gl << graph.label << '\n';
    for (std::size_t i = 0; i < n; ++i) {
      ind << g + 1 << '\n';
      std::size_t arg = 0;
      for (std::size_t f = 0; f < graph.feature_dim(); ++f) {
        if (graph.features(i, f) > graph.features(i, arg)) arg = f;
      }
      nl << arg << '\n';
      for (std::size_t j = 0; j < n; ++j) {
        if (graph.adjacency(i, j) != 0.0) a << offset + i + 1 << ", " << offset + j + 1 << '\n';
      }
    }
    offset += n;
  }
}

// ---------------------------------------------------------------------------
// Synthetic molecule-like generator

struct MotifWeights {
  double chain = 1.0;
  double cycle = 1.0;
  double branch = 1.0;
};

struct GeneratorConfig {
  std::size_t num_graphs = 100;
  std::size_t min_nodes = 8;
  std::size_t max_nodes = 25;
  MotifWeights weights;
  std::size_t num_node_types = 7;
  std::uint64_t seed = 7;

  void validate() const {
    if (min_nodes < 3) throw Error("generator: min node count must be at least 3");
    if (max_nodes < min_nodes) throw Error("generator: node count range is empty");
    if (weights.chain < 0 || weights.cycle < 0 || weights.branch < 0) {
      throw Error("generator: motif weights must be non-negative");
    }
    if (weights.chain + weights.cycle + weights.branch <= 0) {
      throw Error("generator: motif weights must have a positive sum");
    }
    if (num_node_types < 3) throw Error("generator: need at least 3 node types");
  }
};

namespace detail {

enum class Motif { kChain, kCycle, kBranch };

struct MotifSpan {
  std::size_t lo;
  std::size_t hi;
};

inline MotifSpan motif_sizes(Motif m) {
  switch (m) {
    case Motif::kChain: return {2, 4};
    case Motif::kCycle: return {5, 6};
    case Motif::kBranch: return {4, 4};  // centre plus three substituents
  }
  return {0, 0};
}

class MoleculeBuilder {
 public:
  MoleculeBuilder(std::size_t node_types, SplitMix64& rng) : types_(node_types), rng_(rng) {}

  std::size_t size() const { return degree_.size(); }

  // Adds a motif and joins it to the existing structure with one edge.
  void add(Motif m, std::size_t k) {
    const std::size_t base = size();
    for (std::size_t i = 0; i < k; ++i) {
      degree_.push_back(0);
      type_.push_back(pick_type(m, i));
    }
    switch (m) {
      case Motif::kChain:
        for (std::size_t i = 0; i + 1 < k; ++i) link(base + i, base + i + 1);
        break;
      case Motif::kCycle:
        for (std::size_t i = 0; i < k; ++i) link(base + i, base + (i + 1) % k);
        has_cycle_ = true;
        break;
      case Motif::kBranch:
        for (std::size_t i = 1; i < k; ++i) link(base, base + i);
        break;
    }
    if (base > 0) {
      const std::size_t u = open_site(0, base);
      const std::size_t v = open_site(base, size());
      link(u, v);
    }
  }

  LabeledGraph finish(std::size_t id) const {
    LabeledGraph g;
    g.id = id;
    const std::size_t n = size();
    g.adjacency = Tensor(n, n);
    for (auto [u, v] : edges_) {
      g.adjacency(u, v) = 1.0;
      g.adjacency(v, u) = 1.0;
    }
    g.features = Tensor(n, types_);
    for (std::size_t i = 0; i < n; ++i) g.features(i, type_[i]) = 1.0;
    g.label = has_cycle_ ? 1 : 0;
    return g;
  }

 private:
  std::size_t pick_type(Motif m, std::size_t pos) {
    // Ring atoms are mostly type 0, branch centres type 1, the rest spread
    // over the remaining vocabulary.
    switch (m) {
      case Motif::kCycle:
        return rng_.bernoulli(0.8) ? 0 : 2 + rng_.below(types_ - 2);
      case Motif::kBranch:
        if (pos == 0) return 1;
        return 2 + rng_.below(types_ - 2);
      case Motif::kChain:
        return rng_.bernoulli(0.5) ? 1 : 2 + rng_.below(types_ - 2);
    }
    return 0;
  }

  std::size_t open_site(std::size_t lo, std::size_t hi) {
    std::vector<std::size_t> open;
    for (std::size_t i = lo; i < hi; ++i) {
      if (degree_[i] < 4) open.push_back(i);
    }
    if (open.empty()) throw Error("generator: no free valence to join motifs");
    return open[rng_.below(open.size())];
  }

  void link(std::size_t u, std::size_t v) {
    edges_.emplace_back(u, v);
    ++degree_[u];
    ++degree_[v];
  }

  std::size_t types_;
  SplitMix64& rng_;
  std::vector<std::size_t> degree_;
  std::vector<std::size_t> type_;
  std::vector<std::pair<std::size_t, std::size_t>> edges_;
  bool has_cycle_ = false;
};

}  // namespace detail

/// Connected molecule-like graphs built from chain (2-4 nodes), cycle (5-6)
/// and branch (4-node star) motifs joined by single edges. Label 1 iff the
/// graph contains a cycle motif. Degrees never exceed 4.
inline std::vector<LabeledGraph> generate_synthetic(const GeneratorConfig& config) {
  config.validate();
  using detail::Motif;
  const std::array<Motif, 3> motifs{Motif::kChain, Motif::kCycle, Motif::kBranch};
  const std::array<double, 3> weights{config.weights.chain, config.weights.cycle,
                                      config.weights.branch};
  std::size_t smallest = SIZE_MAX;
  for (std::size_t m = 0; m < 3; ++m) {
    if (weights[m] > 0) smallest = std::min(smallest, detail::motif_sizes(motifs[m]).lo);
  }
  if (smallest > config.max_nodes) {
    throw Error("generator: node count range [" + std::to_string(config.min_nodes) + ", " +
                std::to_string(config.max_nodes) + "] is infeasible for the enabled motifs");
  }

  SplitMix64 rng(config.seed);
  std::vector<LabeledGraph> out;
  out.reserve(config.num_graphs);
  for (std::size_t gi = 0; gi < config.num_graphs; ++gi) {
    SplitMix64 grng = rng.split();
    bool done = false;
    for (int attempt = 0; attempt < 200 && !done; ++attempt) {
      const std::size_t target =
          config.min_nodes + grng.below(config.max_nodes - config.min_nodes + 1);
      detail::MoleculeBuilder builder(config.num_node_types, grng);
      while (true) {
        const std::size_t room = target - builder.size();
        std::array<double, 3> w{};
        double total = 0.0;
        for (std::size_t m = 0; m < 3; ++m) {
          if (detail::motif_sizes(motifs[m]).lo <= room) w[m] = weights[m];
          total += w[m];
        }
        if (total <= 0.0) break;
        const double pick = grng.uniform() * total;
        std::size_t m = 0;
        for (double acc = w[0]; m < 2 && (pick >= acc || w[m] == 0.0); acc += w[m]) ++m;
        while (w[m] == 0.0) --m;  // rounding ran past the last positive weight
        const auto span = detail::motif_sizes(motifs[m]);
        const std::size_t hi = std::min(span.hi, room);
        const std::size_t k = span.lo + grng.below(hi - span.lo + 1);
        builder.add(motifs[m], k);
      }
      if (builder.size() >= config.min_nodes && builder.size() <= config.max_nodes) {
        out.push_back(builder.finish(gi));
        done = true;
      }
    }
    if (!done) {
      throw Error("generator: could not build a graph within the node count range [" +
                  std::to_string(config.min_nodes) + ", " + std::to_string(config.max_nodes) +
                  "] from the enabled motifs");
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Attack / autoencoder split

struct DatasetSplit {
  std::vector<LabeledGraph> attack_set;
  std::vector<LabeledGraph> mgae_train_set;
  std::uint64_t seed = 0;
  std::vector<std::string> warnings;
};

/// Uniform sample without replacement for the attack set; the remainder, in
/// dataset order, trains the autoencoder.
inline DatasetSplit split_dataset(const std::vector<LabeledGraph>& graphs,
                                  std::size_t attack_count, std::uint64_t seed) {
  if (attack_count > graphs.size()) {
    throw Error("split: attack count " + std::to_string(attack_count) + " exceeds dataset size " +
                std::to_string(graphs.size()));
  }
  std::vector<std::size_t> order(graphs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  SplitMix64 rng(seed);
  rng.shuffle(order);
  std::vector<char> chosen(graphs.size(), 0);
  DatasetSplit split;
  split.seed = seed;
  for (std::size_t k = 0; k < attack_count; ++k) {
    chosen[order[k]] = 1;
    split.attack_set.push_back(graphs[order[k]]);
  }
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    if (!chosen[i]) split.mgae_train_set.push_back(graphs[i]);
  }
  if (split.mgae_train_set.empty()) {
    split.warnings.emplace_back("every graph is in the attack set; autoencoder training set is empty");
  }
  return split;
}

}  // namespace graphleak
