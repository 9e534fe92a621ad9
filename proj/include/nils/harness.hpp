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

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "nils/attack.hpp"
#include "nils/baselines.hpp"
#include "nils/dp.hpp"
#include "nils/gcn.hpp"
#include "nils/graph.hpp"
#include "nils/metrics.hpp"
#include "nils/server.hpp"

namespace nils {

enum class ThresholdTuning { kGlobal, kPerTarget };

struct GraphSpec {
  // kind "sbm" generates; kind "files" loads the triple below.
  std::string kind = "sbm";
  std::vector<int> blocks = {100, 100};
  double p_in = 0.1;
  double p_out = 0.01;
  FeatureSpec features;
  std::string edge_path, feature_path, label_path;

  Graph realize(std::uint64_t seed) const {
    if (kind == "sbm") {
      return generate_sbm(seed, blocks, p_in, p_out, features);
    }
    if (kind == "files") {
      return load_graph(edge_path, feature_path,
                        label_path.empty()
                            ? std::nullopt
                            : std::optional<std::string>(label_path));
    }
    throw std::invalid_argument("unknown graph kind '" + kind + "'");
  }
};

struct SweepSpec {
  GraphSpec graph;
  std::vector<int> depths = {2};
  int hidden_dim = 16;
  TrainConfig train;
  double train_fraction = 0.7;
  std::vector<StrategySpec> strategies = {{Strategy::kAllOnes, 1e-3}};
  SamplingRegime regime = SamplingRegime::kUniform;
  std::size_t target_count = 50;
  ThresholdTuning tuning = ThresholdTuning::kGlobal;
  std::vector<std::optional<double>> epsilons = {std::nullopt};
  double count_fraction = 0.1;
  std::vector<std::uint64_t> seeds = {1, 2, 3};

  void validate() const {
    if (depths.empty() || strategies.empty() || epsilons.empty() ||
        seeds.empty()) {
      throw std::invalid_argument("sweep spec has an empty axis");
    }
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
      throw std::invalid_argument("train fraction must be in (0, 1)");
    }
  }
};

namespace detail {

inline std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    const auto b = tok.find_first_not_of(" \t");
    const auto e = tok.find_last_not_of(" \t");
    out.push_back(b == std::string::npos ? "" : tok.substr(b, e - b + 1));
  }
  return out;
}

}  // namespace detail

/// Flat key-value sweep spec: "key = value" lines, '#' comments. Keys are
/// namespaced graph.*, model.*, attack.*, dp.*, seeds.
inline SweepSpec parse_sweep_spec(std::istream& in) {
  SweepSpec spec;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      bool blank = true;
      for (char c : line) blank &= std::isspace(static_cast<unsigned char>(c));
      if (blank) continue;
      throw std::runtime_error("sweep spec line " + std::to_string(lineno) +
                               ": expected 'key = value'");
    }
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      if (key == "graph.kind") {
        spec.graph.kind = value;
      } else if (key == "graph.blocks") {
        spec.graph.blocks.clear();
        for (const auto& t : detail::split_csv(value)) {
          spec.graph.blocks.push_back(std::stoi(t));
        }
      } else if (key == "graph.p_in") {
        spec.graph.p_in = std::stod(value);
      } else if (key == "graph.p_out") {
        spec.graph.p_out = std::stod(value);
      } else if (key == "graph.feature_dim") {
        spec.graph.features.dim = std::stoi(value);
      } else if (key == "graph.separation") {
        spec.graph.features.separation = std::stod(value);
      } else if (key == "graph.noise") {
        spec.graph.features.noise = std::stod(value);
      } else if (key == "graph.edges") {
        spec.graph.edge_path = value;
      } else if (key == "graph.features") {
        spec.graph.feature_path = value;
      } else if (key == "graph.labels") {
        spec.graph.label_path = value;
      } else if (key == "model.depths") {
        spec.depths.clear();
        for (const auto& t : detail::split_csv(value)) {
          spec.depths.push_back(std::stoi(t));
        }
      } else if (key == "model.hidden") {
        spec.hidden_dim = std::stoi(value);
      } else if (key == "model.lr") {
        spec.train.learning_rate = std::stod(value);
      } else if (key == "model.epochs") {
        spec.train.epochs = std::stoi(value);
      } else if (key == "model.l2") {
        spec.train.l2 = std::stod(value);
      } else if (key == "model.init_scale") {
        spec.train.weight_init_scale = std::stod(value);
      } else if (key == "model.train_fraction") {
        spec.train_fraction = std::stod(value);
      } else if (key == "attack.strategies") {
        spec.strategies.clear();
        for (const auto& t : detail::split_csv(value)) {
          spec.strategies.push_back({strategy_from_name(t), 1e-3});
        }
      } else if (key == "attack.delta") {
        for (auto& s : spec.strategies) s.delta = std::stod(value);
      } else if (key == "attack.regime") {
        spec.regime = regime_from_name(value);
      } else if (key == "attack.targets") {
        spec.target_count = static_cast<std::size_t>(std::stoul(value));
      } else if (key == "attack.tuning") {
        if (value == "global") {
          spec.tuning = ThresholdTuning::kGlobal;
        } else if (value == "per_target") {
          spec.tuning = ThresholdTuning::kPerTarget;
        } else {
          throw std::invalid_argument("tuning must be global or per_target");
        }
      } else if (key == "dp.epsilons") {
        spec.epsilons.clear();
        for (const auto& t : detail::split_csv(value)) {
          if (t == "none") {
            spec.epsilons.push_back(std::nullopt);
          } else {
            spec.epsilons.push_back(std::stod(t));
          }
        }
      } else if (key == "dp.count_fraction") {
        spec.count_fraction = std::stod(value);
      } else if (key == "seeds") {
        spec.seeds.clear();
        for (const auto& t : detail::split_csv(value)) {
          spec.seeds.push_back(std::stoull(t));
        }
      } else {
        throw std::invalid_argument("unknown key '" + key + "'");
      }
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error("sweep spec line " + std::to_string(lineno) +
                               ": " + e.what());
    }
  }
  spec.validate();
  return spec;
}

inline SweepSpec parse_sweep_spec_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return parse_sweep_spec(in);
}

inline std::string epsilon_label(const std::optional<double>& eps) {
  return eps ? format_double(*eps) : "none";
}

/// One attack run (one target node) evaluated at the cell's threshold.
struct RunRow {
  NodeId target_id;
  std::string strategy;
  int depth;
  std::string epsilon;
  Metrics metrics;
  double threshold;
  std::uint64_t seed;
};

/// One (cell, seed) evaluation: pooled attack F1 plus model quality.
struct SeedRow {
  std::string strategy;
  int depth;
  std::string epsilon;
  std::uint64_t seed;
  double f1;
  double precision;
  double recall;
  double threshold;
  double utility_f1;
  double train_accuracy;
};

struct CellSummary {
  std::string strategy;
  int depth;
  std::string epsilon;
  std::string tuning;
  double mean_f1 = 0.0, std_f1 = 0.0;
  double mean_utility = 0.0, std_utility = 0.0;
  std::string error;  // empty on success

  bool failed() const { return !error.empty(); }
};

struct SweepResult {
  std::vector<RunRow> runs;
  std::vector<SeedRow> seed_rows;
  std::vector<CellSummary> cells;

  bool all_succeeded() const {
    for (const auto& c : cells) {
      if (c.failed()) return false;
    }
    return true;
  }
};

namespace detail {

struct SeedOutcome {
  std::vector<RunRow> runs;
  SeedRow row;
};

inline std::pair<double, double> mean_std(const std::vector<double>& xs) {
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double var = 0.0;
  if (xs.size() > 1) {
    for (double x : xs) var += (x - mean) * (x - mean);
    var /= static_cast<double>(xs.size() - 1);
  }
  return {mean, std::sqrt(var)};
}

}  // namespace detail

/// Runs one (strategy, depth, epsilon, seed) cell instance: builds the
/// graph, trains the (possibly LapGraph-protected) model, attacks every
/// sampled target, and reports pooled metrics at the chosen tuning mode.
inline detail::SeedOutcome run_cell_seed(
    const SweepSpec& spec, const StrategySpec& strategy, int depth,
    const std::optional<double>& epsilon, std::uint64_t seed,
    std::ostream* trace = nullptr) {
  const Graph g = spec.graph.realize(seed);
  if (!g.has_labels()) {
    throw std::invalid_argument("sweep graphs must be labeled");
  }

  // Train/held-out node split.
  Rng split_rng = Rng::stream(seed, 11);
  std::vector<int> order(g.n);
  std::iota(order.begin(), order.end(), 0);
  for (int i = g.n - 1; i > 0; --i) {
    std::swap(order[i], order[split_rng.uniform_int(i + 1)]);
  }
  const int n_train = std::max(1, static_cast<int>(g.n * spec.train_fraction));
  std::vector<int> train_mask(order.begin(), order.begin() + n_train);
  std::vector<int> heldout(order.begin() + n_train, order.end());
  if (heldout.empty()) heldout.push_back(train_mask.back());

  TrainConfig cfg = spec.train;
  cfg.seed = Rng::mix(seed ^ 0x7e57a11ULL);
  std::vector<int> hidden(depth - 1, spec.hidden_dim);

  Rng dp_rng = Rng::stream(seed, 13);
  std::optional<Server> server;
  GcnModel model;
  Graph train_view = g;
  if (epsilon) {
    LapGraphConfig lap{*epsilon, spec.count_fraction, 0};
    auto perturbed = lapgraph(g.adj, lap, dp_rng);
    train_view.adj = perturbed;
    model = train(train_view, depth, hidden, cfg, train_mask);
    server.emplace(g, model, lap, dp_rng, std::move(perturbed));
  } else {
    model = train(g, depth, hidden, cfg, train_mask);
    server.emplace(g, model);
  }
  if (trace) server->set_trace(trace);

  Rng sample_rng = Rng::stream(seed, 17);
  const std::vector<NodeId> va =
      sample_targets(g, spec.regime, spec.target_count, sample_rng);
  Eigen::MatrixXd x_va(va.size(), g.feature_dim());
  for (std::size_t i = 0; i < va.size(); ++i) {
    x_va.row(i) = g.features.row(va[i]);
  }

  // Per-target distances and ground truth (neighbors of v_t inside V_A).
  struct TargetRun {
    NodeId v_t;
    std::vector<NodeId> nodes;
    std::vector<double> distances;
    std::vector<char> truth;
  };
  std::vector<TargetRun> target_runs;
  for (NodeId v_t : va) {
    AttackResult res = run_attack(*server, va, v_t, strategy,
                                  FixedThreshold{0.0}, x_va);
    TargetRun tr;
    tr.v_t = v_t;
    for (std::size_t i = 0; i < va.size(); ++i) {
      if (va[i] == v_t) continue;
      tr.nodes.push_back(va[i]);
      tr.distances.push_back(res.distances(static_cast<Eigen::Index>(i)));
      tr.truth.push_back(g.has_edge(v_t, va[i]) ? 1 : 0);
    }
    target_runs.push_back(std::move(tr));
  }

  detail::SeedOutcome out;
  double global_r = 0.0;
  if (spec.tuning == ThresholdTuning::kGlobal) {
    std::vector<double> pooled_d;
    std::vector<char> pooled_t;
    for (const auto& tr : target_runs) {
      pooled_d.insert(pooled_d.end(), tr.distances.begin(),
                      tr.distances.end());
      pooled_t.insert(pooled_t.end(), tr.truth.begin(), tr.truth.end());
    }
    global_r = tune_threshold(pooled_d, pooled_t).first;
  }

  std::size_t tp = 0, predicted = 0, positives = 0;
  for (const auto& tr : target_runs) {
    const double r = spec.tuning == ThresholdTuning::kGlobal
                         ? global_r
                         : tune_threshold(tr.distances, tr.truth).first;
    std::size_t run_tp = 0, run_pred = 0, run_pos = 0;
    for (std::size_t i = 0; i < tr.nodes.size(); ++i) {
      if (tr.truth[i]) ++run_pos;
      if (tr.distances[i] >= r) {
        ++run_pred;
        if (tr.truth[i]) ++run_tp;
      }
    }
    tp += run_tp;
    predicted += run_pred;
    positives += run_pos;
    Metrics m;
    m.precision = run_pred ? static_cast<double>(run_tp) / run_pred : 0.0;
    m.recall = run_pos ? static_cast<double>(run_tp) / run_pos : 0.0;
    m.f1 = f1_score(run_tp, run_pred, run_pos);
    out.runs.push_back(RunRow{tr.v_t, strategy_name(strategy.kind), depth,
                              epsilon_label(epsilon), m, r, seed});
  }

  SeedRow row;
  row.strategy = strategy_name(strategy.kind);
  row.depth = depth;
  row.epsilon = epsilon_label(epsilon);
  row.seed = seed;
  row.precision = predicted ? static_cast<double>(tp) / predicted : 0.0;
  row.recall = positives ? static_cast<double>(tp) / positives : 0.0;
  row.f1 = f1_score(tp, predicted, positives);
  row.threshold = global_r;
  // Utility and train accuracy are measured on the model actually served
  // (trained on the perturbed graph when defended), over the true graph.
  row.utility_f1 = utility_eval(g, model, heldout).f1;
  row.train_accuracy = train_accuracy(model, train_view, train_mask);
  out.row = row;
  return out;
}

inline int worker_count() {
  if (const char* env = std::getenv("NILS_WORKERS")) {
    const int w = std::atoi(env);
    if (w > 0) return w;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Full sweep over strategies x depths x epsilons x seeds. Cells run on a
/// bounded worker pool with per-cell rng streams; a failing cell records
/// its error string and the sweep continues.
inline SweepResult run_sweep(const SweepSpec& spec,
                             std::ostream* trace = nullptr) {
  spec.validate();
  struct Cell {
    StrategySpec strategy;
    int depth;
    std::optional<double> epsilon;
  };
  std::vector<Cell> cells;
  for (const auto& s : spec.strategies) {
    for (int depth : spec.depths) {
      for (const auto& eps : spec.epsilons) {
        cells.push_back({s, depth, eps});
      }
    }
  }

  struct Job {
    std::size_t cell;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    for (std::uint64_t seed : spec.seeds) jobs.push_back({c, seed});
  }

  struct JobResult {
    std::optional<detail::SeedOutcome> outcome;
    std::string error;
  };
  std::vector<JobResult> results(jobs.size());
  std::atomic<std::size_t> next{0};
  auto work = [&]() {
    for (;;) {
      const std::size_t j = next.fetch_add(1);
      if (j >= jobs.size()) return;
      const Cell& cell = cells[jobs[j].cell];
      try {
        // Tracing is only wired through single-threaded runs; the audit
        // log interleaves otherwise.
        results[j].outcome =
            run_cell_seed(spec, cell.strategy, cell.depth, cell.epsilon,
                          jobs[j].seed, trace);
      } catch (const std::exception& e) {
        results[j].error = e.what();
      }
    }
  };
  const int workers =
      trace ? 1 : std::min<int>(worker_count(), static_cast<int>(jobs.size()));
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }

  SweepResult result;
  std::size_t j = 0;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    CellSummary summary;
    summary.strategy = strategy_name(cells[c].strategy.kind);
    summary.depth = cells[c].depth;
    summary.epsilon = epsilon_label(cells[c].epsilon);
    summary.tuning =
        spec.tuning == ThresholdTuning::kGlobal ? "global" : "per_target";
    std::vector<double> f1s, utilities;
    for (std::size_t s = 0; s < spec.seeds.size(); ++s, ++j) {
      if (results[j].outcome) {
        const auto& out = *results[j].outcome;
        result.runs.insert(result.runs.end(), out.runs.begin(),
                           out.runs.end());
        result.seed_rows.push_back(out.row);
        f1s.push_back(out.row.f1);
        utilities.push_back(out.row.utility_f1);
      } else if (summary.error.empty()) {
        summary.error = results[j].error;
      }
    }
    if (!f1s.empty() && summary.error.empty()) {
      std::tie(summary.mean_f1, summary.std_f1) = detail::mean_std(f1s);
      std::tie(summary.mean_utility, summary.std_utility) =
          detail::mean_std(utilities);
    }
    result.cells.push_back(std::move(summary));
  }
  return result;
}

/// Writes runs.csv, seed_results.csv, summary.csv and the tidy plot files.
inline void write_sweep_outputs(const SweepResult& result,
                                const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "runs.csv", std::ios::binary);
    out << "target_id,strategy,depth,epsilon,precision,recall,f1,threshold,"
           "seed\n";
    for (const auto& r : result.runs) {
      out << r.target_id << ',' << r.strategy << ',' << r.depth << ','
          << r.epsilon << ',' << format_double(r.metrics.precision) << ','
          << format_double(r.metrics.recall) << ','
          << format_double(r.metrics.f1) << ','
          << format_double(r.threshold) << ',' << r.seed << '\n';
    }
  }
  {
    std::ofstream out(dir / "seed_results.csv", std::ios::binary);
    out << "strategy,depth,epsilon,seed,precision,recall,f1,threshold,"
           "utility_f1,train_accuracy\n";
    for (const auto& r : result.seed_rows) {
      out << r.strategy << ',' << r.depth << ',' << r.epsilon << ','
          << r.seed << ',' << format_double(r.precision) << ','
          << format_double(r.recall) << ',' << format_double(r.f1) << ','
          << format_double(r.threshold) << ','
          << format_double(r.utility_f1) << ','
          << format_double(r.train_accuracy) << '\n';
    }
  }
  {
    std::ofstream out(dir / "summary.csv", std::ios::binary);
    out << "strategy,depth,epsilon,tuning,mean_f1,std_f1,mean_utility,"
           "std_utility,error\n";
    for (const auto& c : result.cells) {
      out << c.strategy << ',' << c.depth << ',' << c.epsilon << ','
          << c.tuning << ',' << format_double(c.mean_f1) << ','
          << format_double(c.std_f1) << ',' << format_double(c.mean_utility)
          << ',' << format_double(c.std_utility) << ',' << c.error << '\n';
    }
  }
  {
    std::ofstream out(dir / "f1_vs_epsilon.csv", std::ios::binary);
    out << "strategy,depth,epsilon,mean_f1,std_f1\n";
    for (const auto& c : result.cells) {
      if (c.failed()) continue;
      out << c.strategy << ',' << c.depth << ',' << c.epsilon << ','
          << format_double(c.mean_f1) << ',' << format_double(c.std_f1)
          << '\n';
    }
  }
  {
    std::ofstream out(dir / "f1_vs_depth.csv", std::ios::binary);
    out << "strategy,epsilon,depth,mean_f1,std_f1\n";
    for (const auto& c : result.cells) {
      if (c.failed()) continue;
      out << c.strategy << ',' << c.epsilon << ',' << c.depth << ','
          << format_double(c.mean_f1) << ',' << format_double(c.std_f1)
          << '\n';
    }
  }
}

/// Recomputes every cell mean/std from the per-seed rows; throws on any
/// mismatch. Run after aggregation as a self-check.
inline void verify_aggregates(const SweepResult& result) {
  for (const auto& c : result.cells) {
    if (c.failed()) continue;
    std::vector<double> f1s, utils;
    for (const auto& r : result.seed_rows) {
      if (r.strategy == c.strategy && r.depth == c.depth &&
          r.epsilon == c.epsilon) {
        f1s.push_back(r.f1);
        utils.push_back(r.utility_f1);
      }
    }
    const auto [mf, sf] = detail::mean_std(f1s);
    const auto [mu, su] = detail::mean_std(utils);
    if (std::abs(mf - c.mean_f1) > 1e-12 || std::abs(sf - c.std_f1) > 1e-12 ||
        std::abs(mu - c.mean_utility) > 1e-12 ||
        std::abs(su - c.std_utility) > 1e-12) {
      throw std::logic_error("aggregate verification failed for cell " +
                             c.strategy + "/" + std::to_string(c.depth) +
                             "/" + c.epsilon);
    }
  }
}

}  // namespace nils
