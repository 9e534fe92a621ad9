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
#include <numeric>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "nils/gcn.hpp"
#include "nils/graph.hpp"
#include "nils/rng.hpp"

namespace nils {

struct Metrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

inline double f1_score(std::size_t tp, std::size_t predicted,
                       std::size_t positives) {
  const double p = predicted ? static_cast<double>(tp) / predicted : 0.0;
  const double r = positives ? static_cast<double>(tp) / positives : 0.0;
  return (p + r) > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
}

/// Precision/recall/F1 with the zero conventions: no predictions gives
/// precision 0, no positives gives recall 0, F1 is 0 when p + r == 0.
template <typename T>
Metrics metrics(const std::set<T>& predicted, const std::set<T>& truth) {
  std::size_t tp = 0;
  for (const T& x : predicted) tp += truth.count(x);
  Metrics m;
  m.precision =
      predicted.empty() ? 0.0 : static_cast<double>(tp) / predicted.size();
  m.recall = truth.empty() ? 0.0 : static_cast<double>(tp) / truth.size();
  m.f1 = f1_score(tp, predicted.size(), truth.size());
  return m;
}

enum class SamplingRegime { kUniform, kLowDegree, kHighDegree };

inline SamplingRegime regime_from_name(const std::string& name) {
  if (name == "uniform") return SamplingRegime::kUniform;
  if (name == "low") return SamplingRegime::kLowDegree;
  if (name == "high") return SamplingRegime::kHighDegree;
  throw std::invalid_argument("unknown sampling regime '" + name + "'");
}

/// Samples |V_A| target nodes without replacement. The degree regimes draw
/// uniformly from the bottom/top degree tercile (ties broken by node id).
inline std::vector<NodeId> sample_targets(const Graph& g,
                                          SamplingRegime regime,
                                          std::size_t size, Rng& rng) {
  std::vector<NodeId> pool(g.n);
  std::iota(pool.begin(), pool.end(), 0);
  if (regime != SamplingRegime::kUniform) {
    std::sort(pool.begin(), pool.end(), [&](NodeId a, NodeId b) {
      if (g.degree(a) != g.degree(b)) return g.degree(a) < g.degree(b);
      return a < b;
    });
    const std::size_t tercile = (pool.size() + 2) / 3;
    if (regime == SamplingRegime::kLowDegree) {
      pool.resize(tercile);
    } else {
      pool.erase(pool.begin(), pool.end() - tercile);
    }
  }
  if (size > pool.size()) {
    throw std::invalid_argument("sample size " + std::to_string(size) +
                                " exceeds eligible pool of " +
                                std::to_string(pool.size()));
  }
  // Partial Fisher-Yates.
  for (std::size_t i = 0; i < size; ++i) {
    const std::size_t j = i + rng.uniform_int(pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(size);
  return pool;
}

/// Macro-F1 of the node classifier on a held-out node set.
inline Metrics utility_eval(const Graph& g, const GcnModel& model,
                            const std::vector<int>& heldout) {
  if (!g.has_labels()) throw std::invalid_argument("graph has no labels");
  if (heldout.empty()) throw std::invalid_argument("empty held-out set");
  const Eigen::MatrixXd p =
      forward(model, normalize_adjacency(g), g.features);
  const int c = g.num_classes;
  std::vector<std::size_t> tp(c, 0), pred(c, 0), pos(c, 0);
  for (int i : heldout) {
    Eigen::Index arg;
    p.row(i).maxCoeff(&arg);
    const int yhat = static_cast<int>(arg);
    const int y = g.labels[i];
    ++pred[yhat];
    ++pos[y];
    if (y == yhat) ++tp[y];
  }
  Metrics m;
  double precision = 0.0, recall = 0.0, f1 = 0.0;
  for (int k = 0; k < c; ++k) {
    const double pk = pred[k] ? static_cast<double>(tp[k]) / pred[k] : 0.0;
    const double rk = pos[k] ? static_cast<double>(tp[k]) / pos[k] : 0.0;
    precision += pk;
    recall += rk;
    f1 += f1_score(tp[k], pred[k], pos[k]);
  }
  m.precision = precision / c;
  m.recall = recall / c;
  m.f1 = f1 / c;
  return m;
}

}  // namespace nils
