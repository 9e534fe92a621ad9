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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "nils/graph.hpp"
#include "nils/rng.hpp"

namespace nils {

struct PrivacyBudget {
  double epsilon;
  double delta = 0.0;  // pure Laplace mechanisms only in this lab

  PrivacyBudget(double eps, double del = 0.0) : epsilon(eps), delta(del) {
    if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be > 0");
    if (!(delta >= 0.0 && delta < 1.0)) {
      throw std::invalid_argument("delta must be in [0, 1)");
    }
  }
};

/// One entry per mechanism application; total follows by sequential
/// composition.
struct BudgetLedger {
  struct Entry {
    std::string label;
    double epsilon;
  };
  std::vector<Entry> entries;

  double total() const {
    double t = 0.0;
    for (const auto& e : entries) t += e.epsilon;
    return t;
  }

  std::string to_jsonl() const {
    std::string out;
    for (const auto& e : entries) {
      out += "{\"label\": \"" + e.label +
             "\", \"epsilon\": " + format_double(e.epsilon) + "}\n";
    }
    return out;
  }
};

inline BudgetLedger compose(BudgetLedger ledger, double epsilon_step,
                            const std::string& label) {
  if (!(epsilon_step > 0.0)) {
    throw std::invalid_argument("epsilon step must be > 0");
  }
  ledger.entries.push_back({label, epsilon_step});
  return ledger;
}

/// Inverse-CDF Laplace draw: sign(u) * scale * ln(1 - 2|u|), u ~ U(-1/2, 1/2).
inline double laplace_sample(double scale, Rng& rng) {
  if (!(scale > 0.0)) throw std::invalid_argument("scale must be > 0");
  const double u = rng.uniform01_open() - 0.5;  // in (-0.5, 0.5)
  const double mag = std::log(1.0 - 2.0 * std::abs(u));
  return (u >= 0.0 ? scale : -scale) * mag;
}

/// Budget split for LapGraph: count_fraction of epsilon estimates the edge
/// count, the rest perturbs the adjacency cells. Sensitivity is 1 for both
/// under edge-level and one-node-one-edge neighborhoods.
struct LapGraphConfig {
  double epsilon = 1.0;
  double count_fraction = 0.1;
  std::uint64_t stream_id = 0;

  void validate() const {
    if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be > 0");
    if (!(count_fraction > 0.0 && count_fraction < 1.0)) {
      throw std::invalid_argument("count_fraction must be in (0, 1)");
    }
  }
};

/// LapGraph: add Laplace noise to every upper-triangle cell, then binarize
/// by keeping the top-N cells where N is itself a Laplace-noised edge count.
/// Ties break row-major so outputs are reproducible under a fixed stream.
/// Returns perturbed neighbor lists (symmetric, binary, zero diagonal).
inline std::vector<std::vector<NodeId>> lapgraph(
    const std::vector<std::vector<NodeId>>& adj, const LapGraphConfig& cfg,
    Rng& rng) {
  cfg.validate();
  const int n = static_cast<int>(adj.size());
  const std::size_t cells = static_cast<std::size_t>(n) * (n - 1) / 2;
  std::size_t true_edges = 0;
  for (const auto& nb : adj) true_edges += nb.size();
  true_edges /= 2;

  const double count_scale = 1.0 / (cfg.count_fraction * cfg.epsilon);
  const double cell_scale = 1.0 / ((1.0 - cfg.count_fraction) * cfg.epsilon);

  const double noisy_count =
      std::round(static_cast<double>(true_edges) +
                 laplace_sample(count_scale, rng));
  const std::size_t keep = static_cast<std::size_t>(std::clamp(
      noisy_count, 0.0, static_cast<double>(cells)));

  struct Cell {
    double value;
    std::uint32_t u, v;
  };
  std::vector<Cell> perturbed;
  perturbed.reserve(cells);
  for (int u = 0; u < n; ++u) {
    auto it = adj[u].begin();
    for (int v = u + 1; v < n; ++v) {
      while (it != adj[u].end() && *it < v) ++it;
      const double base = (it != adj[u].end() && *it == v) ? 1.0 : 0.0;
      perturbed.push_back({base + laplace_sample(cell_scale, rng),
                           static_cast<std::uint32_t>(u),
                           static_cast<std::uint32_t>(v)});
    }
  }
  std::partial_sort(perturbed.begin(), perturbed.begin() + keep,
                    perturbed.end(), [](const Cell& a, const Cell& b) {
                      if (a.value != b.value) return a.value > b.value;
                      if (a.u != b.u) return a.u < b.u;
                      return a.v < b.v;
                    });

  std::vector<std::vector<NodeId>> out(n);
  for (std::size_t i = 0; i < keep; ++i) {
    out[perturbed[i].u].push_back(perturbed[i].v);
    out[perturbed[i].v].push_back(perturbed[i].u);
  }
  for (auto& nb : out) std::sort(nb.begin(), nb.end());
  return out;
}

enum class NeighborRelation { EdgeLevel, NodeLevel, OneNodeOneEdge };

namespace detail {

// Upper-triangular L1 distance after zero-padding the smaller adjacency.
inline double padded_triangular_l1(const Graph& a, const Graph& b) {
  const Graph& small = a.n <= b.n ? a : b;
  const Graph& big = a.n <= b.n ? b : a;
  double diff = 0.0;
  for (NodeId u = 0; u < big.n; ++u) {
    for (NodeId v = u + 1; v < big.n; ++v) {
      const bool in_big = big.has_edge(u, v);
      const bool in_small = v < small.n && small.has_edge(u, v);
      if (in_big != in_small) diff += 1.0;
    }
  }
  return diff;
}

inline bool valid_pair(NeighborRelation rel, const Graph& g1,
                       const Graph& g2) {
  const Graph& small = g1.n <= g2.n ? g1 : g2;
  const Graph& big = g1.n <= g2.n ? g2 : g1;
  switch (rel) {
    case NeighborRelation::EdgeLevel:
      return g1.n == g2.n && padded_triangular_l1(g1, g2) == 1.0;
    case NeighborRelation::NodeLevel: {
      if (big.n != small.n + 1) return false;
      // The extra node must be the last index; earlier edges must agree.
      for (NodeId u = 0; u < small.n; ++u) {
        for (NodeId v = u + 1; v < small.n; ++v) {
          if (small.has_edge(u, v) != big.has_edge(u, v)) return false;
        }
      }
      return true;
    }
    case NeighborRelation::OneNodeOneEdge:
      return valid_pair(NeighborRelation::NodeLevel, g1, g2) &&
             big.degree(big.n - 1) == 1;
  }
  return false;
}

}  // namespace detail

/// L1 distance between the zero-padded adjacency pair, reported on the
/// upper-triangular representation. One-node-one-edge pairs always give 1.
inline double global_sensitivity_l1(NeighborRelation relation,
                                    const Graph& g1, const Graph& g2) {
  if (!detail::valid_pair(relation, g1, g2)) {
    throw std::invalid_argument("graph pair violates the neighbor relation");
  }
  return detail::padded_triangular_l1(g1, g2);
}

/// Draws a uniformly random valid neighbor of `g` under `relation`.
inline std::pair<Graph, Graph> neighbor_pair_generate(NeighborRelation rel,
                                                      const Graph& g,
                                                      Rng& rng) {
  if (g.n == 0) throw std::invalid_argument("graph is empty");
  switch (rel) {
    case NeighborRelation::EdgeLevel: {
      const std::size_t m = g.edge_count();
      if (m == 0) throw std::invalid_argument("no edge to remove");
      std::size_t pick = rng.uniform_int(m);
      Graph other = g;
      for (NodeId u = 0; u < g.n; ++u) {
        for (NodeId v : g.adj[u]) {
          if (u < v && pick-- == 0) {
            other.adj[u].erase(std::find(other.adj[u].begin(),
                                         other.adj[u].end(), v));
            other.adj[v].erase(std::find(other.adj[v].begin(),
                                         other.adj[v].end(), u));
            return {g, std::move(other)};
          }
        }
      }
      throw std::logic_error("unreachable");
    }
    case NeighborRelation::NodeLevel: {
      // Remove a uniform node. It is first relabeled to the last index
      // (an isomorphism) so the pair checker can compare prefixes.
      const NodeId victim = static_cast<NodeId>(rng.uniform_int(g.n));
      const NodeId last = g.n - 1;
      auto relabel = [&](NodeId u) {
        return u == victim ? last : (u == last ? victim : u);
      };
      Graph full;
      full.n = g.n;
      full.num_classes = g.num_classes;
      full.adj.assign(g.n, {});
      full.features = g.features;
      for (NodeId u = 0; u < g.n; ++u) {
        full.features.row(relabel(u)) = g.features.row(u);
        for (NodeId v : g.adj[u]) {
          if (u < v) full.add_edge(relabel(u), relabel(v));
        }
      }
      if (g.has_labels()) {
        full.labels = g.labels;
        for (NodeId u = 0; u < g.n; ++u) full.labels[relabel(u)] = g.labels[u];
      }
      Graph removed = full;
      removed.n = g.n - 1;
      for (NodeId v : full.adj[last]) {
        auto& nb = removed.adj[v];
        nb.erase(std::find(nb.begin(), nb.end(), last));
      }
      removed.adj.pop_back();
      removed.features.conservativeResize(removed.n, Eigen::NoChange);
      if (removed.has_labels()) removed.labels.pop_back();
      return {std::move(full), std::move(removed)};
    }
    case NeighborRelation::OneNodeOneEdge: {
      const NodeId target = static_cast<NodeId>(rng.uniform_int(g.n));
      Eigen::VectorXd x = Eigen::VectorXd::Zero(g.features.cols());
      auto [other, rec] = inject_node(g, x, target);
      return {g, std::move(other)};
    }
  }
  throw std::logic_error("unreachable");
}

/// Result of an empirical DP audit: Monte-Carlo estimate of ln(p/p') for
/// the event "the differing edge appears in the released adjacency",
/// with Wilson score intervals on both frequencies.
struct AuditResult {
  double epsilon_claimed;
  double epsilon_point;  // ln(p_with / p_without)
  double epsilon_lower;  // ln(lo(p_with) / hi(p_without))
  double epsilon_upper;  // ln(hi(p_with) / lo(p_without))
  double p_with;
  double p_without;
  std::size_t trials;
  bool degenerate;  // an observed frequency was 0; bounds are unreliable
};

namespace detail {

struct WilsonInterval {
  double lo, hi;
};

inline WilsonInterval wilson(std::size_t hits, std::size_t trials, double z) {
  const double nd = static_cast<double>(trials);
  const double p = static_cast<double>(hits) / nd;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nd;
  const double center = (p + z2 / (2.0 * nd)) / denom;
  const double half =
      z * std::sqrt(p * (1.0 - p) / nd + z2 / (4.0 * nd * nd)) / denom;
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

}  // namespace detail

/// Audits a graph-release mechanism against a claimed epsilon on a fixed
/// neighbor pair. `mechanism` releases an adjacency (neighbor lists) from
/// an input adjacency. The distinguishing event is the presence of the one
/// differing edge in the output.
inline AuditResult dp_audit(
    const std::function<std::vector<std::vector<NodeId>>(
        const std::vector<std::vector<NodeId>>&, Rng&)>& mechanism,
    NeighborRelation relation, double epsilon_claimed, std::size_t trials,
    Rng& rng, double wilson_z = 3.29) {
  if (trials < 10000) throw std::invalid_argument("need >= 10^4 trials");

  // Fixed pair: a small seeded ER graph and one injected node-with-edge.
  Rng pair_rng = Rng::stream(20260421, 7);
  Graph base = generate_sbm(99, {8}, 0.35, 0.0, FeatureSpec{1, 0.0, 0.0});
  auto [without, with] = neighbor_pair_generate(relation, base, pair_rng);
  if (relation == NeighborRelation::EdgeLevel) std::swap(with, without);
  // The differing edge, found from the padded pair.
  NodeId eu = -1, ev = -1;
  for (NodeId u = 0; u < with.n && eu < 0; ++u) {
    for (NodeId v = u + 1; v < with.n; ++v) {
      const bool a = with.has_edge(u, v);
      const bool b = v < without.n && u < without.n && without.has_edge(u, v);
      if (a != b) {
        eu = u;
        ev = v;
        break;
      }
    }
  }

  // Pad the smaller graph so the mechanism sees equal dimensions.
  auto pad = [&](const Graph& g, int n) {
    std::vector<std::vector<NodeId>> adj = g.adj;
    adj.resize(n);
    return adj;
  };
  const int n = std::max(with.n, without.n);
  const auto adj_with = pad(with, n);
  const auto adj_without = pad(without, n);

  auto count_hits = [&](const std::vector<std::vector<NodeId>>& adj) {
    std::size_t hits = 0;
    for (std::size_t t = 0; t < trials; ++t) {
      const auto released = mechanism(adj, rng);
      const auto& nb = released[eu];
      if (std::binary_search(nb.begin(), nb.end(), ev)) ++hits;
    }
    return hits;
  };
  const std::size_t hits_with = count_hits(adj_with);
  const std::size_t hits_without = count_hits(adj_without);

  AuditResult r;
  r.epsilon_claimed = epsilon_claimed;
  r.trials = trials;
  r.p_with = static_cast<double>(hits_with) / static_cast<double>(trials);
  r.p_without =
      static_cast<double>(hits_without) / static_cast<double>(trials);
  r.degenerate = hits_with == 0 || hits_without == 0;
  const auto ci_with = detail::wilson(hits_with, trials, wilson_z);
  const auto ci_without = detail::wilson(hits_without, trials, wilson_z);
  const double inf = std::numeric_limits<double>::infinity();
  r.epsilon_point =
      r.degenerate ? inf : std::log(r.p_with / r.p_without);
  r.epsilon_lower = ci_without.hi > 0.0 && ci_with.lo > 0.0
                        ? std::log(ci_with.lo / ci_without.hi)
                        : -inf;
  r.epsilon_upper =
      ci_without.lo > 0.0 ? std::log(ci_with.hi / ci_without.lo) : inf;
  return r;
}

}  // namespace nils
