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
#include <optional>
#include <ostream>
#include <stdexcept>
#include <utility>
#include <vector>

#include "nils/dp.hpp"
#include "nils/gcn.hpp"
#include "nils/graph.hpp"

namespace nils {

/// The adversary-facing boundary: prediction queries by node id and connect
/// queries that inject one node with one edge. When a LapGraph defense is
/// configured, the working adjacency is a cached perturbation of the current
/// graph; noise is drawn once per graph version, never per query, so two
/// predicts with no connect in between return identical rows.
class Server {
 public:
  /// Undefended server over a frozen model.
  Server(Graph graph, GcnModel model)
      : graph_(std::move(graph)),
        model_(std::move(model)),
        working_(normalize_adjacency(graph_)),
        rng_(0) {
    snapshot();
  }

  /// Defended server. `initial_perturbed` is the adjacency the model was
  /// trained on (the training-time LapGraph draw, ledger entry 0); if
  /// absent, a fresh draw is taken from `rng` here.
  Server(Graph graph, GcnModel model, LapGraphConfig defense, Rng rng,
         std::optional<std::vector<std::vector<NodeId>>> initial_perturbed =
             std::nullopt)
      : graph_(std::move(graph)),
        model_(std::move(model)),
        defense_(defense),
        rng_(rng) {
    defense.validate();
    auto perturbed = initial_perturbed
                         ? std::move(*initial_perturbed)
                         : lapgraph(graph_.adj, *defense_, rng_);
    working_ = normalize_perturbed(std::move(perturbed));
    ledger_ = compose(ledger_, defense_->epsilon, "train");
    snapshot();
  }

  bool defended() const { return defense_.has_value(); }
  int node_count() const { return graph_.n; }
  int feature_dim() const { return graph_.feature_dim(); }
  const BudgetLedger& ledger() const { return ledger_; }

  /// Writes one JSON line per query to `sink` (tracing off when null).
  void set_trace(std::ostream* sink) { trace_ = sink; }

  Eigen::MatrixXd predict(const std::vector<NodeId>& ids) const {
    for (NodeId id : ids) graph_.check_node(id);
    trace_query("predict", ids, 0.0);
    const Eigen::MatrixXd p = forward(model_, working_, graph_.features);
    Eigen::MatrixXd rows(ids.size(), p.cols());
    for (std::size_t i = 0; i < ids.size(); ++i) rows.row(i) = p.row(ids[i]);
    return rows;
  }

  NodeId connect(const Eigen::VectorXd& features, NodeId target) {
    auto [next, record] = inject_node(graph_, features, target);
    graph_ = std::move(next);
    double spent = 0.0;
    if (defense_) {
      working_ = normalize_perturbed(lapgraph(graph_.adj, *defense_, rng_));
      ledger_ = compose(ledger_, defense_->epsilon, "connect");
      spent = defense_->epsilon;
    } else {
      working_ = normalize_adjacency(graph_);
    }
    trace_query("connect", {record.new_node, target}, spent);
    return record.new_node;
  }

  void reset() {
    graph_ = snap_->graph;
    working_ = snap_->working;
    ledger_ = snap_->ledger;
    trace_query("reset", {}, 0.0);
  }

  /// LinkTeller probing hook: predictions with node u's features shifted by
  /// +delta on every coordinate. State is untouched. Only the undefended
  /// server exposes this extension.
  Eigen::MatrixXd predict_with_feature_delta(const std::vector<NodeId>& ids,
                                             NodeId u, double delta) const {
    if (defended()) {
      throw std::logic_error(
          "feature perturbation probing is not available on a defended "
          "server");
    }
    for (NodeId id : ids) graph_.check_node(id);
    graph_.check_node(u);
    Eigen::MatrixXd x = graph_.features;
    x.row(u).array() += delta;
    const Eigen::MatrixXd p = forward(model_, working_, x);
    Eigen::MatrixXd rows(ids.size(), p.cols());
    for (std::size_t i = 0; i < ids.size(); ++i) rows.row(i) = p.row(ids[i]);
    return rows;
  }

 private:
  struct Snapshot {
    Graph graph;
    NormalizedAdjacency working;
    BudgetLedger ledger;
  };

  NormalizedAdjacency normalize_perturbed(
      std::vector<std::vector<NodeId>> adj) const {
    Graph view;
    view.n = static_cast<int>(adj.size());
    view.adj = std::move(adj);
    NormalizedAdjacency out = normalize_adjacency(view);
    out.provenance = "sym-selfloop+lapgraph";
    return out;
  }

  void snapshot() { snap_ = Snapshot{graph_, working_, ledger_}; }

  void trace_query(const char* kind, const std::vector<NodeId>& ids,
                   double epsilon_spent) const {
    if (!trace_) return;
    *trace_ << "{\"type\": \"" << kind << "\", \"ids\": [";
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (i) *trace_ << ", ";
      *trace_ << ids[i];
    }
    *trace_ << "], \"epsilon_spent\": " << format_double(epsilon_spent)
            << "}\n";
  }

  Graph graph_;
  GcnModel model_;
  std::optional<LapGraphConfig> defense_;
  BudgetLedger ledger_;
  NormalizedAdjacency working_;
  Rng rng_;
  std::optional<Snapshot> snap_;
  std::ostream* trace_ = nullptr;
};

}  // namespace nils
