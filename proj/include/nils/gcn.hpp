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
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "nils/graph.hpp"
#include "nils/rng.hpp"

namespace nils {

/// Stack of graph convolutions: H^{l+1} = relu(A_hat H^l W^l) on hidden
/// layers, row softmax after the last. Immutable once trained.
struct GcnModel {
  std::vector<Eigen::MatrixXd> weights;

  int depth() const { return static_cast<int>(weights.size()); }
  int input_dim() const { return static_cast<int>(weights.front().rows()); }
  int output_dim() const { return static_cast<int>(weights.back().cols()); }

  void check_chain() const {
    if (weights.empty()) throw std::invalid_argument("model has no layers");
    for (std::size_t l = 1; l < weights.size(); ++l) {
      if (weights[l - 1].cols() != weights[l].rows()) {
        throw std::invalid_argument("layer shapes do not chain at layer " +
                                    std::to_string(l));
      }
    }
  }
};

struct TrainConfig {
  double learning_rate = 0.2;
  int epochs = 200;
  double weight_init_scale = 1.0;
  std::uint64_t seed = 0;
  double l2 = 5e-4;

  void validate() const {
    if (!(learning_rate > 0.0)) {
      throw std::invalid_argument("learning_rate must be > 0");
    }
    if (epochs < 0) throw std::invalid_argument("epochs must be >= 0");
    if (l2 < 0.0) throw std::invalid_argument("l2 must be >= 0");
  }
};

namespace detail {

// Row-wise softmax with max subtraction.
inline Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& z) {
  Eigen::MatrixXd p(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double m = z.row(i).maxCoeff();
    Eigen::ArrayXd e = (z.row(i).array() - m).exp();
    p.row(i) = (e / e.sum()).matrix();
  }
  return p;
}

}  // namespace detail

/// Eq.-style forward pass; returns one softmax row per node.
inline Eigen::MatrixXd forward(const GcnModel& model,
                               const NormalizedAdjacency& a_hat,
                               const Eigen::MatrixXd& x) {
  model.check_chain();
  if (x.cols() != model.input_dim()) {
    throw std::invalid_argument("feature width does not match model input");
  }
  if (a_hat.matrix.rows() != x.rows()) {
    throw std::invalid_argument("adjacency and feature row counts differ");
  }
  Eigen::MatrixXd h = x;
  for (int l = 0; l < model.depth(); ++l) {
    h = a_hat.matrix * h * model.weights[l];
    if (l + 1 < model.depth()) h = h.cwiseMax(0.0);
  }
  return detail::softmax_rows(h);
}

/// Masked mean cross-entropy + (l2/2) sum ||W||_F^2 with exact analytic
/// gradients. Shared by training and the finite-difference checks.
inline std::pair<double, std::vector<Eigen::MatrixXd>> loss_and_gradients(
    const GcnModel& model, const NormalizedAdjacency& a_hat,
    const Eigen::MatrixXd& x, const std::vector<int>& labels,
    const std::vector<int>& mask, double l2) {
  model.check_chain();
  const int L = model.depth();
  if (mask.empty()) throw std::invalid_argument("empty training mask");
  if (static_cast<Eigen::Index>(labels.size()) != x.rows()) {
    throw std::invalid_argument("labels/features row mismatch");
  }

  // Forward, keeping A_hat * H^l and pre-activations for backprop.
  std::vector<Eigen::MatrixXd> ah(L);   // A_hat * H^l
  std::vector<Eigen::MatrixXd> pre(L);  // Z^l before the nonlinearity
  Eigen::MatrixXd h = x;
  for (int l = 0; l < L; ++l) {
    ah[l] = a_hat.matrix * h;
    pre[l] = ah[l] * model.weights[l];
    h = (l + 1 < L) ? pre[l].cwiseMax(0.0) : pre[l];
  }
  const Eigen::MatrixXd p = detail::softmax_rows(h);

  const double inv_m = 1.0 / static_cast<double>(mask.size());
  double loss = 0.0;
  for (int i : mask) {
    const double m = h.row(i).maxCoeff();
    const double lse = m + std::log((h.row(i).array() - m).exp().sum());
    loss += lse - h(i, labels[i]);
  }
  loss *= inv_m;
  for (const auto& w : model.weights) loss += 0.5 * l2 * w.squaredNorm();

  // dZ at the output: (P - Y) on masked rows, scaled by 1/|mask|.
  Eigen::MatrixXd dz = Eigen::MatrixXd::Zero(p.rows(), p.cols());
  for (int i : mask) {
    dz.row(i) = p.row(i) * inv_m;
    dz(i, labels[i]) -= inv_m;
  }

  std::vector<Eigen::MatrixXd> grads(L);
  for (int l = L - 1; l >= 0; --l) {
    grads[l] = ah[l].transpose() * dz + l2 * model.weights[l];
    if (l > 0) {
      Eigen::MatrixXd dh =
          a_hat.matrix.transpose() * (dz * model.weights[l].transpose());
      dz = ((pre[l - 1].array() > 0.0).cast<double>() * dh.array()).matrix();
    }
  }
  return {loss, std::move(grads)};
}

/// Seeded uniform init in [-s, s], s = weight_init_scale / sqrt(fan_in).
inline GcnModel init_model(int input_dim, const std::vector<int>& hidden_dims,
                           int output_dim, const TrainConfig& cfg) {
  GcnModel model;
  std::vector<int> dims;
  dims.push_back(input_dim);
  dims.insert(dims.end(), hidden_dims.begin(), hidden_dims.end());
  dims.push_back(output_dim);
  Rng rng = Rng::stream(cfg.seed, 0xC0DE);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const double s =
        cfg.weight_init_scale / std::sqrt(static_cast<double>(dims[l]));
    Eigen::MatrixXd w(dims[l], dims[l + 1]);
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index j = 0; j < w.cols(); ++j) {
        w(i, j) = s * (2.0 * rng.uniform01() - 1.0);
      }
    }
    model.weights.push_back(std::move(w));
  }
  return model;
}

/// Full-batch gradient descent on the masked cross-entropy. Deterministic
/// under (cfg.seed, graph): identical inputs give identical weights.
inline GcnModel train(const Graph& g, int depth,
                      const std::vector<int>& hidden_dims,
                      const TrainConfig& cfg, const std::vector<int>& mask) {
  cfg.validate();
  if (!g.has_labels()) throw std::invalid_argument("graph has no labels");
  if (mask.empty()) throw std::invalid_argument("empty training mask");
  if (depth != static_cast<int>(hidden_dims.size()) + 1) {
    throw std::invalid_argument("depth must equal len(hidden_dims) + 1");
  }
  const NormalizedAdjacency a_hat = normalize_adjacency(g);
  GcnModel model =
      init_model(g.feature_dim(), hidden_dims, g.num_classes, cfg);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    auto [loss, grads] =
        loss_and_gradients(model, a_hat, g.features, g.labels, mask, cfg.l2);
    (void)loss;
    for (int l = 0; l < model.depth(); ++l) {
      model.weights[l] -= cfg.learning_rate * grads[l];
    }
  }
  return model;
}

inline double train_accuracy(const GcnModel& model, const Graph& g,
                             const std::vector<int>& mask) {
  const Eigen::MatrixXd p =
      forward(model, normalize_adjacency(g), g.features);
  int correct = 0;
  for (int i : mask) {
    Eigen::Index arg;
    p.row(i).maxCoeff(&arg);
    if (static_cast<int>(arg) == g.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(mask.size());
}

/// Text format: "gcn <L> <d_0> ... <d_L>" then one row-major block per
/// layer, comma-separated, shortest round-trip floats.
inline void save_model(const GcnModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "gcn " << model.depth();
  out << ' ' << model.weights.front().rows();
  for (const auto& w : model.weights) out << ' ' << w.cols();
  out << '\n';
  for (const auto& w : model.weights) {
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index j = 0; j < w.cols(); ++j) {
        if (j) out << ',';
        out << format_double(w(i, j));
      }
      out << '\n';
    }
  }
}

inline GcnModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string tag;
  int depth;
  if (!(in >> tag >> depth) || tag != "gcn" || depth <= 0) {
    throw std::runtime_error(path + ": bad model header");
  }
  std::vector<int> dims(depth + 1);
  for (int& d : dims) {
    if (!(in >> d) || d <= 0) throw std::runtime_error(path + ": bad dims");
  }
  in.ignore(1);  // newline after the header
  GcnModel model;
  std::string line;
  for (int l = 0; l < depth; ++l) {
    Eigen::MatrixXd w(dims[l], dims[l + 1]);
    for (int i = 0; i < dims[l]; ++i) {
      if (!std::getline(in, line)) {
        throw std::runtime_error(path + ": truncated weight block");
      }
      std::stringstream ss(line);
      std::string cell;
      for (int j = 0; j < dims[l + 1]; ++j) {
        if (!std::getline(ss, cell, ',')) {
          throw std::runtime_error(path + ": short weight row");
        }
        w(i, j) = std::stod(cell);
      }
    }
    model.weights.push_back(std::move(w));
  }
  return model;
}

}  // namespace nils
