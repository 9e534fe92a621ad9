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
#include <cmath>
#include <set>
#include <stdexcept>
#include <utility>
#include <vector>

#include "nils/server.hpp"

namespace nils {

using EdgeSet = std::set<std::pair<NodeId, NodeId>>;

namespace detail {

inline std::pair<NodeId, NodeId> ordered_pair(NodeId a, NodeId b) {
  return a < b ? std::make_pair(a, b) : std::make_pair(b, a);
}

// Top-k pairs by score; `ascending` flips to k smallest. Ties break by the
// (i, j) index order so results are reproducible.
struct ScoredPair {
  double score;
  int i, j;  // indices into the target list
};

inline EdgeSet select_pairs(std::vector<ScoredPair> scored, std::size_t k,
                            const std::vector<NodeId>& targets,
                            bool ascending) {
  if (k > scored.size()) {
    throw std::invalid_argument("k exceeds the number of node pairs");
  }
  std::sort(scored.begin(), scored.end(),
            [&](const ScoredPair& a, const ScoredPair& b) {
              if (a.score != b.score) {
                return ascending ? a.score < b.score : a.score > b.score;
              }
              if (a.i != b.i) return a.i < b.i;
              return a.j < b.j;
            });
  EdgeSet out;
  for (std::size_t t = 0; t < k; ++t) {
    out.insert(ordered_pair(targets[scored[t].i], targets[scored[t].j]));
  }
  return out;
}

}  // namespace detail

/// Influence probing without injection: bump each target's features by
/// +delta, measure the L1 change of every other target's prediction, and
/// declare the k most influential symmetrized pairs to be edges. Requires
/// the undefended server's feature-perturbation extension.
inline EdgeSet linkteller_attack(const Server& server,
                                 const std::vector<NodeId>& targets,
                                 double delta, std::size_t k) {
  if (!(delta > 0.0)) throw std::invalid_argument("delta must be > 0");
  const std::size_t m = targets.size();
  const Eigen::MatrixXd p0 = server.predict(targets);
  Eigen::MatrixXd influence = Eigen::MatrixXd::Zero(m, m);
  for (std::size_t u = 0; u < m; ++u) {
    const Eigen::MatrixXd pu =
        server.predict_with_feature_delta(targets, targets[u], delta);
    influence.row(u) =
        ((pu - p0).cwiseAbs().rowwise().sum() / delta).transpose();
  }
  std::vector<detail::ScoredPair> scored;
  scored.reserve(m * (m - 1) / 2);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      scored.push_back({0.5 * (influence(i, j) + influence(j, i)),
                        static_cast<int>(i), static_cast<int>(j)});
    }
  }
  return detail::select_pairs(std::move(scored), k, targets, false);
}

/// Posterior-distance attack: the k closest prediction rows (Euclidean)
/// are declared edges.
inline EdgeSet lsa2_post(const Eigen::MatrixXd& posteriors,
                         const std::vector<NodeId>& targets, std::size_t k) {
  const std::size_t m = targets.size();
  if (posteriors.rows() != static_cast<Eigen::Index>(m)) {
    throw std::invalid_argument("posterior rows misaligned with targets");
  }
  std::vector<detail::ScoredPair> scored;
  scored.reserve(m * (m - 1) / 2);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      scored.push_back({(posteriors.row(i) - posteriors.row(j)).norm(),
                        static_cast<int>(i), static_cast<int>(j)});
    }
  }
  return detail::select_pairs(std::move(scored), k, targets, true);
}

/// Attribute-distance attack: the k pairs with smallest cosine distance
/// between feature rows. Zero-norm rows are maximally distant from
/// everything.
inline EdgeSet lsa2_attr(const Eigen::MatrixXd& features,
                         const std::vector<NodeId>& targets, std::size_t k) {
  const std::size_t m = targets.size();
  if (features.rows() != static_cast<Eigen::Index>(m)) {
    throw std::invalid_argument("feature rows misaligned with targets");
  }
  std::vector<detail::ScoredPair> scored;
  scored.reserve(m * (m - 1) / 2);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      const double ni = features.row(i).norm();
      const double nj = features.row(j).norm();
      double dist = 1.0;
      if (ni > 0.0 && nj > 0.0) {
        dist = 1.0 - features.row(i).dot(features.row(j)) / (ni * nj);
      }
      scored.push_back({dist, static_cast<int>(i), static_cast<int>(j)});
    }
  }
  return detail::select_pairs(std::move(scored), k, targets, true);
}

}  // namespace nils
