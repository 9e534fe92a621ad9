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
#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "nils/attack.hpp"
#include "nils/dp.hpp"
#include "nils/gcn.hpp"
#include "nils/graph.hpp"
#include "nils/harness.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct GraphFiles {
  std::string edges, features, labels;

  nils::Graph load() const {
    return nils::load_graph(edges, features,
                            labels.empty()
                                ? std::nullopt
                                : std::optional<std::string>(labels));
  }
};

void add_graph_files(CLI::App* cmd, GraphFiles& files, bool labels_required) {
  cmd->add_option("--edges", files.edges, "edge list file")->required();
  cmd->add_option("--features", files.features, "feature matrix file")
      ->required();
  auto* lab = cmd->add_option("--labels", files.labels, "label file");
  if (labels_required) lab->required();
}

int cmd_generate(const std::string& out_dir, std::uint64_t seed,
                 const std::vector<int>& blocks, double p_in, double p_out,
                 const nils::FeatureSpec& features) {
  const nils::Graph g =
      nils::generate_sbm(seed, blocks, p_in, p_out, features);
  fs::create_directories(out_dir);
  nils::save_graph(g, out_dir + "/edges.txt", out_dir + "/features.csv",
                   out_dir + "/labels.txt");
  std::cout << "wrote " << g.n << " nodes, " << g.edge_count() << " edges to "
            << out_dir << "\n";
  return 0;
}

int cmd_train(const GraphFiles& files, int depth, int hidden,
              const nils::TrainConfig& cfg, const std::string& out) {
  const nils::Graph g = files.load();
  std::vector<int> mask(g.n);
  std::iota(mask.begin(), mask.end(), 0);
  const std::vector<int> hidden_dims(depth - 1, hidden);
  const nils::GcnModel model = nils::train(g, depth, hidden_dims, cfg, mask);
  nils::save_model(model, out);
  std::cout << "trained depth-" << depth << " model, train accuracy "
            << nils::format_double(nils::train_accuracy(model, g, mask))
            << ", saved to " << out << "\n";
  return 0;
}

int cmd_attack(const GraphFiles& files, const std::string& model_path,
               int v_t, std::size_t target_count, const std::string& regime,
               const std::string& strategy, double delta,
               std::optional<double> epsilon, double count_fraction,
               std::uint64_t seed, bool trace) {
  const nils::Graph g = files.load();
  const nils::GcnModel model = nils::load_model(model_path);

  nils::Rng dp_rng = nils::Rng::stream(seed, 13);
  std::optional<nils::Server> server;
  if (epsilon) {
    server.emplace(g, model,
                   nils::LapGraphConfig{*epsilon, count_fraction, 0}, dp_rng);
  } else {
    server.emplace(g, model);
  }
  if (trace) server->set_trace(&std::cerr);

  nils::Rng sample_rng = nils::Rng::stream(seed, 17);
  std::vector<nils::NodeId> targets = nils::sample_targets(
      g, nils::regime_from_name(regime), target_count, sample_rng);
  if (std::find(targets.begin(), targets.end(), v_t) == targets.end()) {
    targets.back() = v_t;  // v_t must be a member of the target set
  }

  Eigen::MatrixXd x_va(targets.size(), g.feature_dim());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    x_va.row(i) = g.features.row(targets[i]);
  }
  std::set<nils::NodeId> truth;
  for (nils::NodeId v : targets) {
    if (v != v_t && g.has_edge(v_t, v)) truth.insert(v);
  }

  const nils::StrategySpec spec{nils::strategy_from_name(strategy), delta};
  const nils::AttackResult res = nils::run_attack(
      *server, targets, v_t, spec, nils::TuneAgainstTruth{truth}, x_va);

  json out;
  out["target"] = v_t;
  out["strategy"] = strategy;
  out["epsilon"] = epsilon ? json(*epsilon) : json("none");
  out["threshold"] = res.threshold;
  out["predicted_neighbors"] = res.predicted_neighbors;
  out["true_neighbors"] = truth;
  out["precision"] = res.metrics->precision;
  out["recall"] = res.metrics->recall;
  out["f1"] = res.metrics->f1;
  out["budget_spent"] = server->ledger().total();
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_sweep(const std::string& spec_path, const std::string& out_dir,
              bool trace) {
  const nils::SweepSpec spec = nils::parse_sweep_spec_file(spec_path);
  std::ofstream trace_out;
  if (trace) {
    fs::create_directories(out_dir);
    trace_out.open(out_dir + "/trace.jsonl", std::ios::binary);
  }
  const nils::SweepResult result =
      nils::run_sweep(spec, trace ? &trace_out : nullptr);
  nils::verify_aggregates(result);
  nils::write_sweep_outputs(result, out_dir);
  int failed = 0;
  for (const auto& c : result.cells) {
    std::cout << c.strategy << " depth=" << c.depth << " eps=" << c.epsilon;
    if (c.failed()) {
      std::cout << " FAILED: " << c.error << "\n";
      ++failed;
    } else {
      std::cout << " f1=" << nils::format_double(c.mean_f1) << "+-"
                << nils::format_double(c.std_f1) << "\n";
    }
  }
  std::cout << (failed ? "sweep finished with failed cells\n"
                       : "sweep complete\n");
  return failed ? 1 : 0;
}

int cmd_audit(const std::string& out_path,
              const std::vector<double>& epsilons, std::size_t trials,
              double count_fraction, std::uint64_t seed) {
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + out_path);
  out << "mechanism,epsilon_claimed,epsilon_lower,ci_low,ci_high,trials\n";
  bool ok = true;
  for (std::size_t i = 0; i < epsilons.size(); ++i) {
    const double eps = epsilons[i];
    nils::LapGraphConfig cfg{eps, count_fraction, 0};
    nils::Rng rng = nils::Rng::stream(seed, 100 + i);
    const nils::AuditResult r = nils::dp_audit(
        [&](const std::vector<std::vector<nils::NodeId>>& adj,
            nils::Rng& mech_rng) { return nils::lapgraph(adj, cfg, mech_rng); },
        nils::NeighborRelation::OneNodeOneEdge, eps, trials, rng);
    out << "lapgraph," << nils::format_double(eps) << ','
        << nils::format_double(r.epsilon_lower) << ','
        << nils::format_double(r.epsilon_lower) << ','
        << nils::format_double(r.epsilon_upper) << ',' << r.trials << '\n';
    std::cout << "lapgraph eps=" << nils::format_double(eps)
              << " empirical=[" << nils::format_double(r.epsilon_lower)
              << ", " << nils::format_double(r.epsilon_upper) << "]"
              << (r.degenerate ? " (degenerate)" : "") << "\n";
    if (r.epsilon_lower > eps) ok = false;
  }
  std::cout << (ok ? "audit passed\n" : "audit found a violation\n");
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"node-injection link-stealing lab"};
  app.require_subcommand(1);

  // generate
  auto* generate = app.add_subcommand("generate", "write a synthetic graph");
  std::string out_dir = "graph";
  std::uint64_t seed = 1;
  std::vector<int> blocks = {150, 150};
  double p_in = 0.1, p_out = 0.01;
  nils::FeatureSpec features{8, 0.2, 0.3};
  generate->add_option("--out", out_dir, "output directory");
  generate->add_option("--seed", seed);
  generate->add_option("--blocks", blocks, "block sizes");
  generate->add_option("--p-in", p_in);
  generate->add_option("--p-out", p_out);
  generate->add_option("--dim", features.dim);
  generate->add_option("--separation", features.separation);
  generate->add_option("--noise", features.noise);

  // train
  auto* train_cmd = app.add_subcommand("train", "train a GCN on graph files");
  GraphFiles train_files;
  add_graph_files(train_cmd, train_files, true);
  int depth = 2, hidden = 16;
  nils::TrainConfig cfg;
  cfg.epochs = 100;
  std::string model_out = "model.txt";
  train_cmd->add_option("--depth", depth)->check(CLI::Range(1, 8));
  train_cmd->add_option("--hidden", hidden);
  train_cmd->add_option("--epochs", cfg.epochs);
  train_cmd->add_option("--lr", cfg.learning_rate);
  train_cmd->add_option("--l2", cfg.l2);
  train_cmd->add_option("--seed", cfg.seed);
  train_cmd->add_option("--out", model_out, "model output path");

  // attack
  auto* attack_cmd =
      app.add_subcommand("attack", "single attack run, JSON to stdout");
  GraphFiles attack_files;
  add_graph_files(attack_cmd, attack_files, false);
  std::string model_path, strategy = "all_ones", regime = "uniform";
  int v_t = 0;
  std::size_t target_count = 50;
  double delta = 1e-3, count_fraction = 0.1;
  double attack_epsilon = -1.0;
  std::uint64_t attack_seed = 1;
  bool trace = false;
  attack_cmd->add_option("--model", model_path)->required();
  attack_cmd->add_option("--target", v_t, "the node whose neighbors to steal")
      ->required();
  attack_cmd->add_option("--strategy", strategy);
  attack_cmd->add_option("--delta", delta, "influence strategy step");
  attack_cmd->add_option("--targets", target_count, "|V_A|");
  attack_cmd->add_option("--regime", regime, "uniform|low|high");
  attack_cmd->add_option("--epsilon", attack_epsilon,
                         "LapGraph budget (omit for no defense)");
  attack_cmd->add_option("--count-fraction", count_fraction);
  attack_cmd->add_option("--seed", attack_seed);
  attack_cmd->add_flag("--trace", trace, "log every query to stderr");

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "run a sweep spec file");
  std::string spec_path, sweep_out = "results";
  bool sweep_trace = false;
  sweep_cmd->add_option("--spec", spec_path, "sweep spec file")->required();
  sweep_cmd->add_option("--out", sweep_out, "results directory");
  sweep_cmd->add_flag("--trace", sweep_trace,
                      "write a query audit log (forces one worker)");

  // audit
  auto* audit_cmd = app.add_subcommand("audit", "empirical DP audit suite");
  std::string audit_out = "audit.csv";
  std::vector<double> audit_epsilons = {0.5, 1.0, 2.0};
  std::size_t trials = 100000;
  std::uint64_t audit_seed = 1;
  audit_cmd->add_option("--out", audit_out, "CSV report path");
  audit_cmd->add_option("--epsilons", audit_epsilons);
  audit_cmd->add_option("--trials", trials)->check(CLI::Range(10000, 100000000));
  audit_cmd->add_option("--count-fraction", count_fraction);
  audit_cmd->add_option("--seed", audit_seed);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*generate) {
      return cmd_generate(out_dir, seed, blocks, p_in, p_out, features);
    }
    if (*train_cmd) {
      return cmd_train(train_files, depth, hidden, cfg, model_out);
    }
    if (*attack_cmd) {
      return cmd_attack(attack_files, model_path, v_t, target_count, regime,
                        strategy, delta,
                        attack_epsilon > 0
                            ? std::optional<double>(attack_epsilon)
                            : std::nullopt,
                        count_fraction, attack_seed, trace);
    }
    if (*sweep_cmd) return cmd_sweep(spec_path, sweep_out, sweep_trace);
    if (*audit_cmd) {
      return cmd_audit(audit_out, audit_epsilons, trials, count_fraction,
                       audit_seed);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
