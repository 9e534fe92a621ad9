/*
 * Copyright 2026 The nils-lab Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "nils/rng.hpp"

namespace nils {

// Shortest round-trip decimal formatting; the file writers rely on this to
// be byte-stable across runs.
inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

using NodeId = int;

/// Undirected graph with dense node features and optional class labels.
/// Adjacency is kept as sorted neighbor lists; no self-loops are stored and
/// the edge set is symmetric by construction. Instances are treated as
/// immutable values: every mutation produces a new Graph.
struct Graph {
  int n = 0;
  std::vector<std::vector<NodeId>> adj;  // sorted, symmetric, no self-loops
  Eigen::MatrixXd features;              // n x d
  std::vector<int> labels;               // empty when unlabeled
  int num_classes = 0;
  // Per-column feature ranges, recorded by the loader/generator so attack
  // strategies can clamp if they choose to. No clamping happens by default.
  Eigen::VectorXd feature_min;
  Eigen::VectorXd feature_max;

  int feature_dim() const { return static_cast<int>(features.cols()); }

  bool has_labels() const { return !labels.empty(); }

  bool has_edge(NodeId u, NodeId v) const {
    const auto& nb = adj[u];
    return std::binary_search(nb.begin(), nb.end(), v);
  }

  int degree(NodeId u) const { return static_cast<int>(adj[u].size()); }

  std::size_t edge_count() const {
    std::size_t deg_sum = 0;
    for (const auto& nb : adj) deg_sum += nb.size();
    return deg_sum / 2;
  }

  void add_edge(NodeId u, NodeId v) {
    if (u == v) throw std::invalid_argument("self-loops are not allowed");
    if (has_edge(u, v)) return;
    adj[u].insert(std::upper_bound(adj[u].begin(), adj[u].end(), v), v);
    adj[v].insert(std::upper_bound(adj[v].begin(), adj[v].end(), u), u);
  }

  void check_node(NodeId u) const {
    if (u < 0 || u >= n) {
      throw std::out_of_range("node id " + std::to_string(u) +
                              " out of range [0, " + std::to_string(n) + ")");
    }
  }

  void record_feature_ranges() {
    if (n == 0 || features.cols() == 0) return;
    feature_min = features.colwise().minCoeff();
    feature_max = features.colwise().maxCoeff();
  }
};

struct InjectionRecord {
  NodeId new_node;
  NodeId target;
  Eigen::VectorXd features;
};

/// Appends one node with feature vector `x` and a single edge to `target`.
/// The input graph is untouched; the server keeps both versions alive.
inline std::pair<Graph, InjectionRecord> inject_node(const Graph& g,
                                                     const Eigen::VectorXd& x,
                                                     NodeId target) {
  g.check_node(target);
  if (x.size() != g.features.cols()) {
    throw std::invalid_argument("feature width mismatch: expected " +
                                std::to_string(g.features.cols()) + ", got " +
                                std::to_string(x.size()));
  }
  Graph out = g;
  const NodeId fresh = g.n;
  out.n = g.n + 1;
  out.adj.emplace_back();
  out.features.conservativeResize(out.n, Eigen::NoChange);
  out.features.row(fresh) = x.transpose();
  if (out.has_labels()) out.labels.push_back(0);  // label never used for v_m
  out.add_edge(fresh, target);
  return {std::move(out), InjectionRecord{fresh, target, x}};
}

/// Symmetric renormalization with self-loops: D^{-1/2} (A + I) D^{-1/2},
/// materialized dense. Fine for the graph sizes this lab targets (<= 5000).
struct NormalizedAdjacency {
  Eigen::MatrixXd matrix;
  std::string provenance;
};

inline NormalizedAdjacency normalize_adjacency(const Graph& g) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(g.n, g.n);
  for (NodeId u = 0; u < g.n; ++u) {
    a(u, u) = 1.0;
    for (NodeId v : g.adj[u]) a(u, v) = 1.0;
  }
  Eigen::VectorXd dinv_sqrt(g.n);
  for (NodeId u = 0; u < g.n; ++u) {
    dinv_sqrt(u) = 1.0 / std::sqrt(static_cast<double>(g.degree(u) + 1));
  }
  Eigen::MatrixXd m = dinv_sqrt.asDiagonal() * a * dinv_sqrt.asDiagonal();
  return NormalizedAdjacency{std::move(m), "sym-selfloop"};
}

/// Feature model for synthetic graphs: each class gets a mean vector
/// (separation on coordinate k % dim) plus isotropic Gaussian noise.
struct FeatureSpec {
  int dim = 8;
  double separation = 1.0;
  double noise = 0.5;
};

/// Stochastic block model; labels are block indices.
inline Graph generate_sbm(std::uint64_t seed,
                          const std::vector<int>& block_sizes, double p_in,
                          double p_out, const FeatureSpec& spec) {
  if (!(0.0 <= p_out && p_out < p_in && p_in <= 1.0)) {
    throw std::invalid_argument("require 0 <= p_out < p_in <= 1");
  }
  for (int b : block_sizes) {
    if (b <= 0) throw std::invalid_argument("empty block");
  }
  Graph g;
  g.num_classes = static_cast<int>(block_sizes.size());
  for (int b = 0; b < g.num_classes; ++b) {
    for (int i = 0; i < block_sizes[b]; ++i) g.labels.push_back(b);
  }
  g.n = static_cast<int>(g.labels.size());
  g.adj.assign(g.n, {});

  Rng edge_rng = Rng::stream(seed, 0);
  for (NodeId u = 0; u < g.n; ++u) {
    for (NodeId v = u + 1; v < g.n; ++v) {
      const double p = (g.labels[u] == g.labels[v]) ? p_in : p_out;
      if (edge_rng.bernoulli(p)) g.add_edge(u, v);
    }
  }

  Rng feat_rng = Rng::stream(seed, 1);
  g.features = Eigen::MatrixXd::Zero(g.n, spec.dim);
  for (NodeId u = 0; u < g.n; ++u) {
    for (int k = 0; k < spec.dim; ++k) {
      g.features(u, k) = spec.noise * feat_rng.gaussian();
    }
    g.features(u, g.labels[u] % spec.dim) += spec.separation;
  }
  g.record_feature_ranges();
  return g;
}

namespace detail {

inline std::runtime_error parse_error(const std::string& path, int line,
                                      const std::string& what) {
  return std::runtime_error(path + ":" + std::to_string(line) + ": " + what);
}

inline bool blank_or_comment(const std::string& line) {
  for (char c : line) {
    if (c == '#') return true;
    if (!std::isspace(static_cast<unsigned char>(c))) return false;
  }
  return true;
}

}  // namespace detail

/// Reads the edge/feature/label file triple documented in the README.
/// Duplicate edges collapse; self-loops are rejected with a line number.
inline Graph load_graph(const std::string& edge_path,
                        const std::string& feature_path,
                        const std::optional<std::string>& label_path = {}) {
  std::vector<std::vector<double>> rows;
  {
    std::ifstream in(feature_path);
    if (!in) throw std::runtime_error("cannot open " + feature_path);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (detail::blank_or_comment(line)) continue;
      std::vector<double> row;
      std::stringstream ss(line);
      std::string cell;
      while (std::getline(ss, cell, ',')) {
        try {
          row.push_back(std::stod(cell));
        } catch (const std::exception&) {
          throw detail::parse_error(feature_path, lineno,
                                    "bad float '" + cell + "'");
        }
      }
      if (!rows.empty() && row.size() != rows.front().size()) {
        throw detail::parse_error(
            feature_path, lineno,
            "ragged feature row: expected " +
                std::to_string(rows.front().size()) + " columns, got " +
                std::to_string(row.size()));
      }
      rows.push_back(std::move(row));
    }
  }
  Graph g;
  g.n = static_cast<int>(rows.size());
  g.adj.assign(g.n, {});
  const int d = g.n > 0 ? static_cast<int>(rows.front().size()) : 0;
  g.features = Eigen::MatrixXd::Zero(g.n, d);
  for (int i = 0; i < g.n; ++i) {
    for (int k = 0; k < d; ++k) g.features(i, k) = rows[i][k];
  }

  {
    std::ifstream in(edge_path);
    if (!in) throw std::runtime_error("cannot open " + edge_path);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (detail::blank_or_comment(line)) continue;
      std::istringstream ss(line);
      long long u, v;
      if (!(ss >> u >> v)) {
        throw detail::parse_error(edge_path, lineno, "expected 'u v'");
      }
      if (u < 0 || v < 0 || u >= g.n || v >= g.n) {
        throw detail::parse_error(edge_path, lineno,
                                  "node index out of range [0, " +
                                      std::to_string(g.n) + ")");
      }
      if (u == v) {
        throw detail::parse_error(edge_path, lineno, "self-loop rejected");
      }
      g.add_edge(static_cast<NodeId>(u), static_cast<NodeId>(v));
    }
  }

  if (label_path) {
    std::ifstream in(*label_path);
    if (!in) throw std::runtime_error("cannot open " + *label_path);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (detail::blank_or_comment(line)) continue;
      int y;
      try {
        y = std::stoi(line);
      } catch (const std::exception&) {
        throw detail::parse_error(*label_path, lineno, "bad label");
      }
      if (y < 0) throw detail::parse_error(*label_path, lineno, "bad label");
      g.labels.push_back(y);
    }
    if (static_cast<int>(g.labels.size()) != g.n) {
      throw std::runtime_error(*label_path + ": expected " +
                               std::to_string(g.n) + " labels, got " +
                               std::to_string(g.labels.size()));
    }
    g.num_classes = 1 + *std::max_element(g.labels.begin(), g.labels.end());
  }
  g.record_feature_ranges();
  return g;
}

/// Writes the same triple byte-stably (LF endings, shortest floats).
inline void save_graph(const Graph& g, const std::string& edge_path,
                       const std::string& feature_path,
                       const std::optional<std::string>& label_path = {}) {
  {
    std::ofstream out(edge_path, std::ios::binary);
    for (NodeId u = 0; u < g.n; ++u) {
      for (NodeId v : g.adj[u]) {
        if (u < v) out << u << ' ' << v << '\n';
      }
    }
  }
  {
    std::ofstream out(feature_path, std::ios::binary);
    for (int i = 0; i < g.n; ++i) {
      for (int k = 0; k < g.features.cols(); ++k) {
        if (k) out << ',';
        out << format_double(g.features(i, k));
      }
      out << '\n';
    }
  }
  if (label_path) {
    std::ofstream out(*label_path, std::ios::binary);
    for (int y : g.labels) out << y << '\n';
  }
}

}  // namespace nils
