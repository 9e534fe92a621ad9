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
#include <filesystem>
#include <fstream>

#include "nils/graph.hpp"

namespace fs = std::filesystem;

namespace {

nils::Graph triangle() {
  nils::Graph g;
  g.n = 3;
  g.adj.assign(3, {});
  g.features = Eigen::MatrixXd::Identity(3, 3);
  g.labels = {0, 1, 0};
  g.num_classes = 2;
  g.add_edge(0, 1);
  g.add_edge(1, 2);
  g.add_edge(0, 2);
  return g;
}

fs::path write_tmp(const std::string& name, const std::string& content) {
  const fs::path p = fs::temp_directory_path() / name;
  std::ofstream out(p, std::ios::binary);
  out << content;
  return p;
}

}  // namespace

TEST_CASE("adjacency stays sorted, symmetric and loop-free") {
  nils::Graph g = triangle();
  REQUIRE(g.edge_count() == 3);
  for (nils::NodeId u = 0; u < g.n; ++u) {
    REQUIRE(std::is_sorted(g.adj[u].begin(), g.adj[u].end()));
    for (nils::NodeId v : g.adj[u]) {
      REQUIRE(v != u);
      REQUIRE(g.has_edge(v, u));
    }
  }
  g.add_edge(0, 1);  // duplicate is a no-op
  REQUIRE(g.edge_count() == 3);
  REQUIRE_THROWS_AS(g.add_edge(1, 1), std::invalid_argument);
}

TEST_CASE("inject_node adds exactly one node and one edge") {
  const nils::Graph g = triangle();
  Eigen::VectorXd x(3);
  x << 1.0, 2.0, 3.0;
  const auto [g2, rec] = nils::inject_node(g, x, 1);

  REQUIRE(g2.n == g.n + 1);
  REQUIRE(rec.new_node == 3);
  REQUIRE(rec.target == 1);
  REQUIRE(g2.edge_count() == g.edge_count() + 1);
  REQUIRE(g2.has_edge(3, 1));
  REQUIRE(g2.features.row(3).transpose() == x);

  // L1 difference between the padded adjacency matrices is exactly 2
  // (one symmetric pair), regardless of target.
  for (nils::NodeId t = 0; t < g.n; ++t) {
    const auto [h, r] = nils::inject_node(g, x, t);
    double diff = 0.0;
    for (nils::NodeId u = 0; u < h.n; ++u) {
      for (nils::NodeId v = 0; v < h.n; ++v) {
        const bool in_new = h.has_edge(u, v);
        const bool in_old = u < g.n && v < g.n && g.has_edge(u, v);
        if (in_new != in_old) diff += 1.0;
      }
    }
    REQUIRE(diff == 2.0);
  }

  // The input graph is untouched.
  REQUIRE(g.n == 3);
  REQUIRE(g.edge_count() == 3);
}

TEST_CASE("inject_node validates its inputs") {
  const nils::Graph g = triangle();
  REQUIRE_THROWS_AS(nils::inject_node(g, Eigen::VectorXd::Ones(3), 7),
                    std::out_of_range);
  REQUIRE_THROWS_AS(nils::inject_node(g, Eigen::VectorXd::Ones(2), 0),
                    std::invalid_argument);
}

TEST_CASE("normalized adjacency reconstructs A + I") {
  const nils::Graph g = nils::generate_sbm(3, {6, 6}, 0.5, 0.1,
                                           nils::FeatureSpec{2, 1.0, 0.2});
  const nils::NormalizedAdjacency a_hat = nils::normalize_adjacency(g);
  REQUIRE(a_hat.provenance == "sym-selfloop");

  // D^{1/2} A_hat D^{1/2} - I must equal the raw adjacency.
  Eigen::VectorXd dsqrt(g.n);
  for (nils::NodeId u = 0; u < g.n; ++u) {
    dsqrt(u) = std::sqrt(g.degree(u) + 1.0);
  }
  const Eigen::MatrixXd recon =
      dsqrt.asDiagonal() * a_hat.matrix * dsqrt.asDiagonal();
  for (nils::NodeId u = 0; u < g.n; ++u) {
    for (nils::NodeId v = 0; v < g.n; ++v) {
      const double expected = u == v ? 1.0 : (g.has_edge(u, v) ? 1.0 : 0.0);
      REQUIRE_THAT(recon(u, v),
                   Catch::Matchers::WithinAbs(expected, 1e-12));
    }
  }
  REQUIRE((a_hat.matrix - a_hat.matrix.transpose()).cwiseAbs().maxCoeff() ==
          0.0);
}

TEST_CASE("sbm generator is deterministic and density-sane") {
  const nils::FeatureSpec fs{4, 1.0, 0.5};
  const nils::Graph a = nils::generate_sbm(42, {60, 60}, 0.3, 0.02, fs);
  const nils::Graph b = nils::generate_sbm(42, {60, 60}, 0.3, 0.02, fs);
  REQUIRE(a.adj == b.adj);
  REQUIRE(a.features == b.features);
  REQUIRE(a.labels == b.labels);

  const nils::Graph c = nils::generate_sbm(43, {60, 60}, 0.3, 0.02, fs);
  REQUIRE(a.adj != c.adj);

  // Within-block density near p_in, across near p_out.
  std::size_t in_edges = 0, out_edges = 0;
  for (nils::NodeId u = 0; u < a.n; ++u) {
    for (nils::NodeId v : a.adj[u]) {
      if (u < v) ++(a.labels[u] == a.labels[v] ? in_edges : out_edges);
    }
  }
  const double in_cells = 2 * 60.0 * 59.0 / 2.0;
  const double out_cells = 60.0 * 60.0;
  REQUIRE_THAT(in_edges / in_cells, Catch::Matchers::WithinAbs(0.3, 0.05));
  REQUIRE_THAT(out_edges / out_cells, Catch::Matchers::WithinAbs(0.02, 0.01));

  REQUIRE_THROWS_AS(nils::generate_sbm(1, {5, 5}, 0.1, 0.2, fs),
                    std::invalid_argument);
}

TEST_CASE("graph files round-trip byte-stably") {
  const nils::Graph g = nils::generate_sbm(7, {10, 10}, 0.4, 0.05,
                                           nils::FeatureSpec{3, 1.0, 0.5});
  const fs::path dir = fs::temp_directory_path();
  const auto e1 = dir / "rt_edges.txt";
  const auto f1 = dir / "rt_feats.csv";
  const auto l1 = dir / "rt_labels.txt";
  nils::save_graph(g, e1.string(), f1.string(), l1.string());

  const nils::Graph g2 = nils::load_graph(e1.string(), f1.string(),
                                          l1.string());
  REQUIRE(g2.n == g.n);
  REQUIRE(g2.adj == g.adj);
  REQUIRE(g2.labels == g.labels);
  REQUIRE(g2.num_classes == g.num_classes);
  REQUIRE(g2.features == g.features);
  REQUIRE(g2.feature_min == g.feature_min);
  REQUIRE(g2.feature_max == g.feature_max);

  const auto e2 = dir / "rt_edges2.txt";
  const auto f2 = dir / "rt_feats2.csv";
  const auto l2 = dir / "rt_labels2.txt";
  nils::save_graph(g2, e2.string(), f2.string(), l2.string());
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  REQUIRE(slurp(e1) == slurp(e2));
  REQUIRE(slurp(f1) == slurp(f2));
  REQUIRE(slurp(l1) == slurp(l2));
}

TEST_CASE("loader reports the offending line") {
  const auto feats = write_tmp("bad_feats.csv", "1,2\n3,4\n5,6\n");

  SECTION("self-loop") {
    const auto edges = write_tmp("bad_edges1.txt", "0 1\n2 2\n");
    REQUIRE_THROWS_WITH(
        nils::load_graph(edges.string(), feats.string()),
        Catch::Matchers::ContainsSubstring(":2") &&
            Catch::Matchers::ContainsSubstring("self-loop"));
  }
  SECTION("out of range") {
    const auto edges = write_tmp("bad_edges2.txt", "0 9\n");
    REQUIRE_THROWS_WITH(
        nils::load_graph(edges.string(), feats.string()),
        Catch::Matchers::ContainsSubstring(":1") &&
            Catch::Matchers::ContainsSubstring("out of range"));
  }
  SECTION("ragged feature row") {
    const auto ragged = write_tmp("bad_feats2.csv", "1,2\n3\n");
    const auto edges = write_tmp("ok_edges.txt", "0 1\n");
    REQUIRE_THROWS_WITH(
        nils::load_graph(edges.string(), ragged.string()),
        Catch::Matchers::ContainsSubstring(":2") &&
            Catch::Matchers::ContainsSubstring("ragged"));
  }
  SECTION("bad label") {
    const auto edges = write_tmp("ok_edges.txt", "0 1\n");
    const auto labels = write_tmp("bad_labels.txt", "0\nx\n1\n");
    REQUIRE_THROWS_WITH(
        nils::load_graph(edges.string(), feats.string(), labels.string()),
        Catch::Matchers::ContainsSubstring(":2"));
  }
  SECTION("comments and blank lines are fine") {
    const auto edges = write_tmp("ok_edges2.txt", "# header\n\n0 1\n1 2\n");
    const nils::Graph g = nils::load_graph(edges.string(), feats.string());
    REQUIRE(g.edge_count() == 2);
    REQUIRE(g.has_labels() == false);
  }
}

TEST_CASE("loader records per-column feature ranges") {
  const auto feats = write_tmp("range_feats.csv", "0,5\n2,-1\n1,3\n");
  const auto edges = write_tmp("range_edges.txt", "0 1\n");
  const nils::Graph g = nils::load_graph(edges.string(), feats.string());
  REQUIRE(g.feature_min(0) == 0.0);
  REQUIRE(g.feature_min(1) == -1.0);
  REQUIRE(g.feature_max(0) == 2.0);
  REQUIRE(g.feature_max(1) == 5.0);
}

TEST_CASE("format_double round-trips") {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-17, 123456789.125, 0.0}) {
    REQUIRE(std::stod(nils::format_double(v)) == v);
  }
}
