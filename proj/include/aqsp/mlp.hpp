// Copyright 2026 The AQSP Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Fully connected Q-value network: ReLU hidden layers, linear output,
// hand-written backpropagation and plain mini-batch gradient descent.

#pragma once

#include <cmath>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "aqsp/error.hpp"

namespace aqsp {

struct SgdConfig {
  double learning_rate = 0.001;
  int batch_size = 32;
};

// Per-layer gradients, shaped like the network's parameters.
struct GradientSet {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
};

class MlpNetwork {
 public:
  // All parameters zero.
  explicit MlpNetwork(std::vector<int> layer_sizes) : sizes_(std::move(layer_sizes)) {
    detail::require(sizes_.size() >= 2, "network needs at least an input and an output layer");
    for (int s : sizes_) detail::require(s >= 1, "layer sizes must be positive");
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      weights_.push_back(Eigen::MatrixXd::Zero(sizes_[l + 1], sizes_[l]));
      biases_.push_back(Eigen::VectorXd::Zero(sizes_[l + 1]));
    }
  }

  // Weights ~ U[-1/sqrt(fan_in), 1/sqrt(fan_in)] drawn layer by layer in
  // row-major order; biases zero.
  template <class Rng>
  static MlpNetwork init(std::vector<int> layer_sizes, Rng& rng) {
    MlpNetwork net(std::move(layer_sizes));
    for (auto& w : net.weights_) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(w.cols()));
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (Eigen::Index r = 0; r < w.rows(); ++r) {
        for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = dist(rng);
      }
    }
    return net;
  }

  const std::vector<int>& layer_sizes() const { return sizes_; }
  std::size_t num_layers() const { return weights_.size(); }
  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }

  Eigen::MatrixXd& weights(std::size_t l) { return weights_.at(l); }
  const Eigen::MatrixXd& weights(std::size_t l) const { return weights_.at(l); }
  Eigen::VectorXd& bias(std::size_t l) { return biases_.at(l); }
  const Eigen::VectorXd& bias(std::size_t l) const { return biases_.at(l); }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights_.size(); ++l) n += weights_[l].size() + biases_[l].size();
    return n;
  }

  bool all_finite() const {
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      if (!weights_[l].allFinite() || !biases_[l].allFinite()) return false;
    }
    return true;
  }

  // Columns of x are samples.
  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& x) const {
    detail::require(x.rows() == input_size(), "input size does not match the network");
    Eigen::MatrixXd a = x;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      Eigen::MatrixXd z = (weights_[l] * a).colwise() + biases_[l];
      a = l + 1 < weights_.size() ? Eigen::MatrixXd(z.cwiseMax(0.0)) : std::move(z);
    }
    return a;
  }

  Eigen::VectorXd forward(std::span<const double> x) const {
    detail::require(static_cast<int>(x.size()) == input_size(), "input size does not match the network");
    const Eigen::Map<const Eigen::VectorXd> v(x.data(), static_cast<Eigen::Index>(x.size()));
    return forward_batch(v);
  }

  bool same_architecture(const MlpNetwork& other) const { return sizes_ == other.sizes_; }

  bool operator==(const MlpNetwork& other) const {
    if (!same_architecture(other)) return false;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      if (weights_[l] != other.weights_[l] || biases_[l] != other.biases_[l]) return false;
    }
    return true;
  }

 private:
  std::vector<int> sizes_;
  std::vector<Eigen::MatrixXd> weights_;  // [out x in]
  std::vector<Eigen::VectorXd> biases_;
};

struct LossAndGradients {
  double loss = 0.0;
  GradientSet gradients;
};

// Loss = mean_i (y_i - Q(s_i, a_i))^2. Targets are constants; only the
// selected output unit of each sample carries error.
inline LossAndGradients loss_and_gradients(const MlpNetwork& net, const Eigen::MatrixXd& states,
                                           std::span<const int> actions,
                                           std::span<const double> targets) {
  const auto n = states.cols();
  detail::require(n > 0, "empty batch");
  detail::require(states.rows() == net.input_size(), "state size does not match the network");
  detail::require(static_cast<Eigen::Index>(actions.size()) == n &&
                      static_cast<Eigen::Index>(targets.size()) == n,
                  "batch arrays have different lengths");

  const std::size_t layers = net.num_layers();
  std::vector<Eigen::MatrixXd> activations;  // input, then post-activation of each layer
  activations.reserve(layers + 1);
  activations.push_back(states);
  for (std::size_t l = 0; l < layers; ++l) {
    Eigen::MatrixXd z = (net.weights(l) * activations.back()).colwise() + net.bias(l);
    if (l + 1 < layers) z = z.cwiseMax(0.0);
    activations.push_back(std::move(z));
  }

  const Eigen::MatrixXd& q = activations.back();
  Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(q.rows(), n);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int a = actions[static_cast<std::size_t>(i)];
    detail::require(a >= 0 && a < q.rows(), "action index out of range");
    const double diff = q(a, i) - targets[static_cast<std::size_t>(i)];
    loss += diff * diff;
    delta(a, i) = 2.0 * diff / static_cast<double>(n);
  }
  loss /= static_cast<double>(n);

  GradientSet g;
  g.weights.resize(layers);
  g.biases.resize(layers);
  for (std::size_t l = layers; l-- > 0;) {
    g.weights[l] = delta * activations[l].transpose();
    g.biases[l] = delta.rowwise().sum();
    if (l > 0) {
      // ReLU derivative: post-activation > 0 iff pre-activation > 0.
      delta = (net.weights(l).transpose() * delta).cwiseProduct(
          (activations[l].array() > 0.0).cast<double>().matrix());
    }
  }
  return {loss, std::move(g)};
}

// theta <- theta - alpha * g
inline void apply_gradients(MlpNetwork& net, const GradientSet& g, const SgdConfig& cfg) {
  detail::require(g.weights.size() == net.num_layers() && g.biases.size() == net.num_layers(),
                  "gradient layer count does not match the network");
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    detail::require(g.weights[l].rows() == net.weights(l).rows() &&
                        g.weights[l].cols() == net.weights(l).cols() &&
                        g.biases[l].size() == net.bias(l).size(),
                    "gradient shape does not match the network");
  }
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    net.weights(l) -= cfg.learning_rate * g.weights[l];
    net.bias(l) -= cfg.learning_rate * g.biases[l];
  }
}

// Adam with bias correction. Moments are lazily shaped on the first update.
class AdamOptimizer {
 public:
  explicit AdamOptimizer(double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
                         double epsilon = 1e-8)
      : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon) {
    detail::require(learning_rate >= 0.0, "learning rate must be non-negative");
  }

  void update(MlpNetwork& net, const GradientSet& g) {
    if (m_.weights.empty()) {
      for (std::size_t l = 0; l < net.num_layers(); ++l) {
        m_.weights.push_back(Eigen::MatrixXd::Zero(net.weights(l).rows(), net.weights(l).cols()));
        m_.biases.push_back(Eigen::VectorXd::Zero(net.bias(l).size()));
      }
      v_ = m_;
    }
    detail::require(g.weights.size() == net.num_layers() && m_.weights.size() == net.num_layers(),
                    "gradient layer count does not match the network");
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
      step(net.weights(l), m_.weights[l], v_.weights[l], g.weights[l], c1, c2);
      step(net.bias(l), m_.biases[l], v_.biases[l], g.biases[l], c1, c2);
    }
  }

  void reset() {
    m_ = {};
    v_ = {};
    t_ = 0;
  }

  long steps() const { return t_; }

 private:
  template <class Param, class Grad>
  void step(Param& p, Param& m, Param& v, const Grad& g, double c1, double c2) const {
    detail::require(g.rows() == p.rows() && g.cols() == p.cols(), "gradient shape does not match the network");
    m = beta1_ * m + (1.0 - beta1_) * g;
    v = beta2_ * v + (1.0 - beta2_) * g.cwiseAbs2();
    p.array() -= lr_ * (m.array() / c1) / ((v.array() / c2).sqrt() + eps_);
  }

  double lr_, beta1_, beta2_, eps_;
  GradientSet m_, v_;
  long t_ = 0;
};

enum class OptimizerKind { kSgd, kAdam };

// The update rule used by the trainer: plain SGD or Adam at the same rate.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double learning_rate)
      : kind_(kind), sgd_{learning_rate, 1}, adam_(learning_rate) {}

  void update(MlpNetwork& net, const GradientSet& g) {
    if (kind_ == OptimizerKind::kSgd) {
      apply_gradients(net, g, sgd_);
    } else {
      adam_.update(net, g);
    }
  }

  void reset() { adam_.reset(); }
  OptimizerKind kind() const { return kind_; }

 private:
  OptimizerKind kind_;
  SgdConfig sgd_;
  AdamOptimizer adam_;
};

inline void copy_parameters(const MlpNetwork& src, MlpNetwork& dst) {
  detail::require(src.same_architecture(dst), "cannot copy parameters between different architectures");
  dst = src;
}

// Structured-text parameter record:
//   {"format": "aqsp-mlp", "version": 1, "layer_sizes": [...],
//    "layers": [{"weights": [row-major, out x in], "bias": [...]}, ...]}
// Doubles are written in shortest round-trip form, so the round trip is exact.
inline constexpr int kMlpFormatVersion = 1;

inline nlohmann::json to_json(const MlpNetwork& net) {
  nlohmann::json layers = nlohmann::json::array();
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const auto& w = net.weights(l);
    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(w.size()));
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) flat.push_back(w(r, c));
    }
    const auto& b = net.bias(l);
    layers.push_back({{"weights", flat}, {"bias", std::vector<double>(b.data(), b.data() + b.size())}});
  }
  return {{"format", "aqsp-mlp"},
          {"version", kMlpFormatVersion},
          {"layer_sizes", net.layer_sizes()},
          {"layers", std::move(layers)}};
}

inline MlpNetwork mlp_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "aqsp-mlp") throw DataError("not a network record");
    if (j.at("version").get<int>() != kMlpFormatVersion) {
      throw DataError("unsupported network record version");
    }
    MlpNetwork net(j.at("layer_sizes").get<std::vector<int>>());
    const auto& layers = j.at("layers");
    if (layers.size() != net.num_layers()) throw DataError("network record has wrong layer count");
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
      const auto flat = layers[l].at("weights").get<std::vector<double>>();
      const auto bias = layers[l].at("bias").get<std::vector<double>>();
      auto& w = net.weights(l);
      if (flat.size() != static_cast<std::size_t>(w.size()) ||
          bias.size() != static_cast<std::size_t>(net.bias(l).size())) {
        throw DataError("network record has a mis-shaped layer");
      }
      std::size_t k = 0;
      for (Eigen::Index r = 0; r < w.rows(); ++r) {
        for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = flat[k++];
      }
      for (std::size_t i = 0; i < bias.size(); ++i) net.bias(l)(static_cast<Eigen::Index>(i)) = bias[i];
    }
    if (!net.all_finite()) throw DataError("network record has non-finite parameters");
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed network record: ") + e.what());
  } catch (const PreconditionError& e) {
    throw DataError(std::string("malformed network record: ") + e.what());
  }
}

}  // namespace aqsp
