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
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "nils/metrics.hpp"
#include "nils/server.hpp"

namespace nils {

enum class Strategy {
  kAllOnes,
  kAllZeros,
  kIdentity,
  kMaxAttributes,
  kClassRepresentative,
  kInfluence,
};

struct StrategySpec {
  Strategy kind = Strategy::kAllOnes;
  double delta = 1e-3;  // Influence only; must be > 0

  void validate() const {
    if (kind == Strategy::kInfluence && !(delta > 0.0)) {
      throw std::invalid_argument("Influence requires delta > 0");
    }
  }
};

inline const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::kAllOnes: return "all_ones";
    case Strategy::kAllZeros: return "all_zeros";
    case Strategy::kIdentity: return "identity";
    case Strategy::kMaxAttributes: return "max_attributes";
    case Strategy::kClassRepresentative: return "class_representative";
    case Strategy::kInfluence: return "influence";
  }
  return "?";
}

inline Strategy strategy_from_name(const std::string& name) {
  for (Strategy s :
       {Strategy::kAllOnes, Strategy::kAllZeros, Strategy::kIdentity,
        Strategy::kMaxAttributes, Strategy::kClassRepresentative,
        Strategy::kInfluence}) {
    if (name == strategy_name(s)) return s;
  }
  throw std::invalid_argument("unknown strategy '" + name + "'");
}

/// Everything the adversary holds after step 1 of the attack: the target
/// list, the queried prediction matrix, and (strategy-dependent) the
/// feature rows of the target set.
struct AttackContext {
  std::vector<NodeId> targets;
  NodeId target = 0;  // v_t, must be a member of `targets`
  Eigen::MatrixXd predictions;                   // |targets| x c
  std::optional<Eigen::MatrixXd> target_features;  // |targets| x d
  int feature_dim = 0;

  int index_of_target() const {
    const auto it = std::find(targets.begin(), targets.end(), target);
    if (it == targets.end()) {
      throw std::invalid_argument("v_t must be in the target set");
    }
    return static_cast<int>(it - targets.begin());
  }

  std::vector<int> predicted_classes() const {
    std::vector<int> out(predictions.rows());
    for (Eigen::Index i = 0; i < predictions.rows(); ++i) {
      Eigen::Index arg;
      predictions.row(i).maxCoeff(&arg);
      out[i] = static_cast<int>(arg);
    }
    return out;
  }
};

/// Crafts the malicious feature vector x_m for the chosen strategy.
/// Max-attributes and class-representative use the model's predicted
/// classes (available after step 1) to restrict to other-class nodes, and
/// error when no target-set node has a different predicted class.
inline Eigen::VectorXd generate_features(const StrategySpec& spec,
                                         const AttackContext& ctx) {
  spec.validate();
  const int d = ctx.feature_dim;
  if (d <= 0) throw std::invalid_argument("feature_dim must be set");

  auto require_features = [&]() -> const Eigen::MatrixXd& {
    if (!ctx.target_features) {
      throw std::invalid_argument(
          std::string(strategy_name(spec.kind)) +
          " needs the target set's feature rows");
    }
    if (ctx.target_features->rows() !=
        static_cast<Eigen::Index>(ctx.targets.size())) {
      throw std::invalid_argument("target_features misaligned with targets");
    }
    return *ctx.target_features;
  };

  switch (spec.kind) {
    case Strategy::kAllOnes:
      return Eigen::VectorXd::Ones(d);
    case Strategy::kAllZeros:
      return Eigen::VectorXd::Zero(d);
    case Strategy::kIdentity:
      return require_features().row(ctx.index_of_target()).transpose();
    case Strategy::kInfluence: {
      Eigen::VectorXd x =
          require_features().row(ctx.index_of_target()).transpose();
      return x.array() + spec.delta;
    }
    case Strategy::kMaxAttributes: {
      const Eigen::MatrixXd& xs = require_features();
      const std::vector<int> classes = ctx.predicted_classes();
      const int ct = classes[ctx.index_of_target()];
      Eigen::VectorXd x;
      bool found = false;
      for (std::size_t i = 0; i < ctx.targets.size(); ++i) {
        if (classes[i] == ct) continue;
        if (!found) {
          x = xs.row(i).transpose();
          found = true;
        } else {
          x = x.cwiseMax(xs.row(i).transpose());
        }
      }
      if (!found) {
        throw std::invalid_argument(
            "max_attributes: no target-set node with a different predicted "
            "class");
      }
      return x;
    }
    case Strategy::kClassRepresentative: {
      const Eigen::MatrixXd& xs = require_features();
      const std::vector<int> classes = ctx.predicted_classes();
      const int ct = classes[ctx.index_of_target()];
      int best = -1;
      double best_conf = -1.0;
      for (std::size_t i = 0; i < ctx.targets.size(); ++i) {
        if (classes[i] == ct) continue;
        const double conf = ctx.predictions.row(i).maxCoeff();
        if (conf > best_conf) {
          best_conf = conf;
          best = static_cast<int>(i);
        }
      }
      if (best < 0) {
        throw std::invalid_argument(
            "class_representative: no target-set node with a different "
            "predicted class");
      }
      return xs.row(best).transpose();
    }
  }
  throw std::logic_error("unreachable");
}

/// Threshold policies for turning the distance vector into a neighbor set.
struct TuneAgainstTruth {
  std::set<NodeId> truth;
};
struct FixedThreshold {
  double r;
};
struct TopK {
  std::size_t k;
};
using ThresholdPolicy = std::variant<TuneAgainstTruth, FixedThreshold, TopK>;

struct AttackResult {
  std::vector<NodeId> targets;        // aligned with distances
  Eigen::VectorXd distances;          // D(v) = ||P(v) - P'(v)||_1
  double threshold = 0.0;             // R
  std::set<NodeId> predicted_neighbors;
  std::optional<std::set<NodeId>> truth;
  std::optional<Metrics> metrics;
};

/// Picks the threshold maximizing F1 over the candidate set: midpoints of
/// consecutive distinct distances plus one sentinel below the minimum and
/// one above the maximum. Ties go to the larger threshold (fewer
/// predictions). Returns (R, best F1).
inline std::pair<double, double> tune_threshold(
    const std::vector<double>& distances, const std::vector<char>& is_true) {
  if (distances.size() != is_true.size()) {
    throw std::invalid_argument("distances/truth size mismatch");
  }
  std::vector<double> sorted = distances;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

  std::vector<double> candidates;
  if (sorted.empty()) {
    candidates.push_back(0.0);
  } else {
    candidates.push_back(sorted.front() - 1.0);
    for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
      candidates.push_back(0.5 * (sorted[i] + sorted[i + 1]));
    }
    candidates.push_back(sorted.back() + 1.0);
  }

  const std::size_t positives =
      static_cast<std::size_t>(std::count(is_true.begin(), is_true.end(), 1));
  double best_r = candidates.back();
  double best_f1 = -1.0;
  for (double r : candidates) {
    std::size_t tp = 0, predicted = 0;
    for (std::size_t i = 0; i < distances.size(); ++i) {
      if (distances[i] >= r) {
        ++predicted;
        if (is_true[i]) ++tp;
      }
    }
    const double f1 = f1_score(tp, predicted, positives);
    if (f1 > best_f1 || (f1 == best_f1 && r > best_r)) {
      best_f1 = f1;
      best_r = r;
    }
  }
  return {best_r, best_f1};
}

inline std::pair<double, double> tune_threshold(
    const std::vector<NodeId>& nodes, const Eigen::VectorXd& distances,
    const std::set<NodeId>& truth) {
  std::vector<double> d(nodes.size());
  std::vector<char> t(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    d[i] = distances(static_cast<Eigen::Index>(i));
    t[i] = truth.count(nodes[i]) ? 1 : 0;
  }
  return tune_threshold(d, t);
}

/// Algorithm steps 1-6: query P, craft x_m, connect to v_t, query P',
/// score L1 changes, threshold. The server is reset before returning, so a
/// harness can iterate targets against one trained model.
/// `target_features` is the adversary's background knowledge of X over the
/// target set (rows aligned with `targets`); only the strategies that need
/// it require it. The server is touched through predict/connect/reset only.
inline AttackResult run_attack(
    Server& server, const std::vector<NodeId>& targets, NodeId v_t,
    const StrategySpec& spec, const ThresholdPolicy& policy,
    const std::optional<Eigen::MatrixXd>& target_features = std::nullopt) {
  AttackContext ctx;
  ctx.targets = targets;
  ctx.target = v_t;
  ctx.feature_dim = server.feature_dim();
  ctx.target_features = target_features;
  const int vt_index = ctx.index_of_target();

  const Eigen::MatrixXd p_before = server.predict(targets);
  ctx.predictions = p_before;
  const Eigen::VectorXd x_m = generate_features(spec, ctx);

  server.connect(x_m, v_t);
  const Eigen::MatrixXd p_after = server.predict(targets);
  server.reset();

  AttackResult result;
  result.targets = targets;
  result.distances = (p_before - p_after).cwiseAbs().rowwise().sum();

  // v_t never counts as its own neighbor; drop it from tuning and output.
  std::vector<double> d;
  std::vector<NodeId> nodes;
  d.reserve(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (static_cast<int>(i) == vt_index) continue;
    nodes.push_back(targets[i]);
    d.push_back(result.distances(static_cast<Eigen::Index>(i)));
  }

  if (const auto* tune = std::get_if<TuneAgainstTruth>(&policy)) {
    std::vector<char> t(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      t[i] = tune->truth.count(nodes[i]) ? 1 : 0;
    }
    result.threshold = tune_threshold(d, t).first;
    result.truth = tune->truth;
  } else if (const auto* fixed = std::get_if<FixedThreshold>(&policy)) {
    result.threshold = fixed->r;
  } else {
    const auto& topk = std::get<TopK>(policy);
    if (topk.k >= nodes.size()) {
      result.threshold = d.empty() ? 0.0 : -1.0;
    } else {
      std::vector<double> sorted = d;
      std::sort(sorted.begin(), sorted.end(), std::greater<>());
      // Midpoint below the k-th largest distance keeps exactly the top k
      // when distances are distinct.
      result.threshold = topk.k == 0
                             ? sorted.front() + 1.0
                             : 0.5 * (sorted[topk.k - 1] + sorted[topk.k]);
    }
  }

  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (d[i] >= result.threshold) result.predicted_neighbors.insert(nodes[i]);
  }
  if (result.truth) {
    result.metrics = metrics(result.predicted_neighbors, *result.truth);
  }
  return result;
}

}  // namespace nils
