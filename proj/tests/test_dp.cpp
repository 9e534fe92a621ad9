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
#include <catch2/catch_amalgamated.hpp>

#include "nils/dp.hpp"
#include "nils/graph.hpp"

namespace {

nils::Graph star(int leaves) {
  nils::Graph g;
  g.n = leaves + 1;
  g.adj.assign(g.n, {});
  g.features = Eigen::MatrixXd::Zero(g.n, 1);
  for (int i = 1; i <= leaves; ++i) g.add_edge(0, i);
  return g;
}

}  // namespace

TEST_CASE("laplace sampler is a seeded pure function of the stream") {
  nils::Rng a = nils::Rng::stream(1, 2);
  nils::Rng b = nils::Rng::stream(1, 2);
  for (int i = 0; i < 100; ++i) {
    REQUIRE(nils::laplace_sample(1.5, a) == nils::laplace_sample(1.5, b));
  }
  REQUIRE_THROWS_AS(nils::laplace_sample(0.0, a), std::invalid_argument);
}

TEST_CASE("laplace sample moments at modest n") {
  nils::Rng rng = nils::Rng::stream(6, 1);
  const double b = 2.0;
  const int n = 200000;
  double mean = 0.0, var = 0.0;
  std::vector<double> xs(n);
  for (auto& x : xs) {
    x = nils::laplace_sample(b, rng);
    mean += x;
  }
  mean /= n;
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= n - 1;
  REQUIRE_THAT(mean, Catch::Matchers::WithinAbs(0.0, 0.03));
  REQUIRE_THAT(var, Catch::Matchers::WithinRel(2.0 * b * b, 0.05));
}

TEST_CASE("budget ledger composes sequentially") {
  nils::BudgetLedger ledger;
  ledger = nils::compose(ledger, 1.0, "train");
  ledger = nils::compose(ledger, 0.5, "connect");
  ledger = nils::compose(ledger, 0.5, "connect");
  REQUIRE(ledger.entries.size() == 3);
  REQUIRE(ledger.entries[0].label == "train");
  REQUIRE(ledger.total() == 2.0);
  const std::string jsonl = ledger.to_jsonl();
  REQUIRE(std::count(jsonl.begin(), jsonl.end(), '\n') == 3);
  REQUIRE(jsonl.find("\"label\": \"connect\"") != std::string::npos);
  REQUIRE_THROWS_AS(nils::compose(ledger, 0.0, "bad"), std::invalid_argument);
}

TEST_CASE("privacy budget validation") {
  REQUIRE_THROWS_AS(nils::PrivacyBudget(0.0), std::invalid_argument);
  REQUIRE_THROWS_AS(nils::PrivacyBudget(1.0, 1.0), std::invalid_argument);
  REQUIRE(nils::PrivacyBudget(0.5).epsilon == 0.5);
}

TEST_CASE("lapgraph output invariants") {
  const nils::Graph g = nils::generate_sbm(5, {12, 12}, 0.3, 0.05,
                                           nils::FeatureSpec{2, 1.0, 0.5});
  nils::LapGraphConfig cfg{1.0, 0.1, 0};
  nils::Rng rng = nils::Rng::stream(50, 0);
  const auto out = nils::lapgraph(g.adj, cfg, rng);

  REQUIRE(out.size() == g.adj.size());
  for (std::size_t u = 0; u < out.size(); ++u) {
    REQUIRE(std::is_sorted(out[u].begin(), out[u].end()));
    for (nils::NodeId v : out[u]) {
      REQUIRE(v != static_cast<nils::NodeId>(u));  // zero diagonal
      const auto& back = out[v];
      REQUIRE(std::binary_search(back.begin(), back.end(),
                                 static_cast<nils::NodeId>(u)));
    }
  }

  // Deterministic under an identical stream.
  nils::Rng rng2 = nils::Rng::stream(50, 0);
  REQUIRE(nils::lapgraph(g.adj, cfg, rng2) == out);

  REQUIRE_THROWS_AS(
      nils::lapgraph(g.adj, nils::LapGraphConfig{1.0, 0.0, 0}, rng),
      std::invalid_argument);
  REQUIRE_THROWS_AS(
      nils::lapgraph(g.adj, nils::LapGraphConfig{-1.0, 0.1, 0}, rng),
      std::invalid_argument);
}

TEST_CASE("lapgraph at huge epsilon reproduces the graph") {
  const nils::Graph g = nils::generate_sbm(9, {10, 10}, 0.4, 0.05,
                                           nils::FeatureSpec{2, 1.0, 0.5});
  nils::LapGraphConfig cfg{1e6, 0.5, 0};
  nils::Rng rng = nils::Rng::stream(51, 0);
  REQUIRE(nils::lapgraph(g.adj, cfg, rng) == g.adj);
}

TEST_CASE("lapgraph edge count tracks the noisy estimate") {
  // At tiny epsilon the released edge count is dominated by count noise,
  // never exceeding the number of upper-triangle cells.
  const nils::Graph g = nils::generate_sbm(5, {10, 10}, 0.3, 0.05,
                                           nils::FeatureSpec{2, 1.0, 0.5});
  nils::Rng rng = nils::Rng::stream(52, 0);
  const std::size_t cells = 20 * 19 / 2;
  for (int rep = 0; rep < 20; ++rep) {
    const auto out = nils::lapgraph(g.adj, {0.1, 0.1, 0}, rng);
    std::size_t deg = 0;
    for (const auto& nb : out) deg += nb.size();
    REQUIRE(deg % 2 == 0);
    REQUIRE(deg / 2 <= cells);
  }
}

TEST_CASE("sensitivity: edge-level pair differs by exactly one cell") {
  nils::Graph g = star(4);
  nils::Rng rng = nils::Rng::stream(53, 0);
  const auto [g1, g2] =
      nils::neighbor_pair_generate(nils::NeighborRelation::EdgeLevel, g, rng);
  REQUIRE(nils::global_sensitivity_l1(nils::NeighborRelation::EdgeLevel, g1,
                                      g2) == 1.0);
  REQUIRE(g1.edge_count() == g2.edge_count() + 1);
}

TEST_CASE("sensitivity: removing a star center deletes all k edges") {
  const int k = 6;
  nils::Graph g = star(k);
  // Draw until the sampled victim is the hub (it has the full degree).
  nils::Rng rng = nils::Rng::stream(54, 0);
  for (int rep = 0; rep < 200; ++rep) {
    const auto [full, removed] = nils::neighbor_pair_generate(
        nils::NeighborRelation::NodeLevel, g, rng);
    REQUIRE(nils::global_sensitivity_l1(nils::NeighborRelation::NodeLevel,
                                        full, removed) ==
            static_cast<double>(full.edge_count() - removed.edge_count()));
    if (removed.edge_count() == 0) {
      // Hub removal: all k edges gone at once.
      REQUIRE(nils::global_sensitivity_l1(nils::NeighborRelation::NodeLevel,
                                          full, removed) == k);
      return;
    }
  }
  FAIL("hub was never sampled in 200 draws");
}

TEST_CASE("sensitivity: one-node-one-edge is always exactly 1") {
  nils::Rng rng = nils::Rng::stream(55, 0);
  const nils::Graph g = nils::generate_sbm(3, {7, 7}, 0.4, 0.1,
                                           nils::FeatureSpec{2, 1.0, 0.5});
  for (int rep = 0; rep < 500; ++rep) {
    const auto [g1, g2] = nils::neighbor_pair_generate(
        nils::NeighborRelation::OneNodeOneEdge, g, rng);
    REQUIRE(nils::global_sensitivity_l1(
                nils::NeighborRelation::OneNodeOneEdge, g1, g2) == 1.0);
    REQUIRE(g2.n == g1.n + 1);
    REQUIRE(g2.degree(g2.n - 1) == 1);
  }
}

TEST_CASE("global_sensitivity_l1 rejects invalid pairs") {
  nils::Graph g = star(3);
  nils::Graph far = star(3);
  far.add_edge(1, 2);
  far.add_edge(2, 3);
  REQUIRE_THROWS_AS(nils::global_sensitivity_l1(
                        nils::NeighborRelation::EdgeLevel, g, far),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(nils::global_sensitivity_l1(
                        nils::NeighborRelation::OneNodeOneEdge, g, g),
                    std::invalid_argument);
}

TEST_CASE("dp_audit flags the identity release as degenerate") {
  nils::Rng rng = nils::Rng::stream(56, 0);
  const nils::AuditResult r = nils::dp_audit(
      [](const std::vector<std::vector<nils::NodeId>>& adj, nils::Rng&) {
        return adj;
      },
      nils::NeighborRelation::OneNodeOneEdge, 1.0, 10000, rng);
  REQUIRE(r.degenerate);
  REQUIRE(r.p_with == 1.0);
  REQUIRE(r.p_without == 0.0);
  REQUIRE(std::isinf(r.epsilon_point));
}

TEST_CASE("dp_audit accepts an honest lapgraph and catches a dishonest one") {
  // Honest: mechanism run at the claimed budget.
  nils::LapGraphConfig honest{1.0, 0.1, 0};
  nils::Rng rng = nils::Rng::stream(57, 0);
  const nils::AuditResult ok = nils::dp_audit(
      [&honest](const std::vector<std::vector<nils::NodeId>>& adj,
                nils::Rng& r) { return nils::lapgraph(adj, honest, r); },
      nils::NeighborRelation::OneNodeOneEdge, 1.0, 20000, rng);
  REQUIRE(ok.epsilon_lower <= 1.0);

  // Dishonest: noise calibrated for a 40x larger budget but claimed at 1.
  nils::LapGraphConfig leaky{40.0, 0.1, 0};
  nils::Rng rng2 = nils::Rng::stream(57, 1);
  const nils::AuditResult bad = nils::dp_audit(
      [&leaky](const std::vector<std::vector<nils::NodeId>>& adj,
               nils::Rng& r) { return nils::lapgraph(adj, leaky, r); },
      nils::NeighborRelation::OneNodeOneEdge, 1.0, 20000, rng2);
  REQUIRE(bad.epsilon_lower > 1.0);
}

TEST_CASE("dp_audit requires enough trials") {
  nils::Rng rng = nils::Rng::stream(58, 0);
  REQUIRE_THROWS_AS(
      nils::dp_audit(
          [](const std::vector<std::vector<nils::NodeId>>& adj, nils::Rng&) {
            return adj;
          },
          nils::NeighborRelation::OneNodeOneEdge, 1.0, 100, rng),
      std::invalid_argument);
}
