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

// Deep Q-learning pieces: replay memory, epsilon-greedy selection, TD targets
// and the per-step update of the main network.
//
// Epsilon here is the probability of acting GREEDILY. It starts at 0 (pure
// exploration) and rises towards epsilon_max; evaluation uses epsilon = 1.

#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "aqsp/error.hpp"
#include "aqsp/mlp.hpp"

namespace aqsp {

struct ExperienceUnit {
  std::vector<double> s;
  int a = 0;
  double r = 0.0;
  std::vector<double> s_next;
  bool done = false;  // terminated by the fidelity threshold; timeouts bootstrap
};

// Fixed-capacity FIFO store.
class ReplayMemory {
 public:
  explicit ReplayMemory(std::size_t capacity) : capacity_(capacity) {
    detail::require(capacity > 0, "replay memory capacity must be positive");
  }

  void store(ExperienceUnit unit) {
    detail::require(unit.s.size() == unit.s_next.size(), "experience states differ in length");
    detail::require(std::isfinite(unit.r), "experience reward is not finite");
    if (buffer_.size() < capacity_) {
      buffer_.push_back(std::move(unit));
    } else {
      buffer_[head_] = std::move(unit);
      head_ = (head_ + 1) % capacity_;
    }
  }

  // i = 0 is the oldest retained unit.
  const ExperienceUnit& at(std::size_t i) const {
    detail::require(i < buffer_.size(), "replay memory index out of range");
    return buffer_[(head_ + i) % buffer_.size()];
  }

  std::size_t size() const { return buffer_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return buffer_.empty(); }

  void clear() {
    buffer_.clear();
    head_ = 0;
  }

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;  // oldest element once full
  std::vector<ExperienceUnit> buffer_;
};

struct EpsilonSchedule {
  double current = 0.0;
  double increment = 0.001;
  double maximum = 0.95;
};

inline EpsilonSchedule advance_epsilon(EpsilonSchedule eps) {
  eps.current = std::min(eps.current + eps.increment, eps.maximum);
  return eps;
}

struct AgentConfig {
  double gamma = 0.9;
  int replace_period = 200;
  SgdConfig sgd;
};

// Lowest index wins ties.
inline int argmax(const Eigen::VectorXd& v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (v(i) > v(best)) best = i;
  }
  return static_cast<int>(best);
}

inline int greedy_action(const MlpNetwork& net, std::span<const double> s) {
  return argmax(net.forward(s));
}

// Greedy with probability eps.current, uniform random otherwise.
template <class Rng>
int select_action(const MlpNetwork& net, std::span<const double> s, const EpsilonSchedule& eps,
                  Rng& rng) {
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  if (coin(rng) < eps.current) return greedy_action(net, s);
  std::uniform_int_distribution<int> pick(0, net.output_size() - 1);
  return pick(rng);
}

// n distinct units, uniformly at random.
template <class Rng>
std::vector<const ExperienceUnit*> sample_batch(const ReplayMemory& mem, std::size_t n, Rng& rng) {
  detail::require(n > 0, "batch size must be positive");
  detail::require(mem.size() >= n, "replay memory holds fewer units than the batch size");
  std::vector<std::size_t> picked;
  picked.reserve(n);
  if (4 * n <= mem.size()) {
    // Rejection keeps this O(n) for n << size.
    std::uniform_int_distribution<std::size_t> pick(0, mem.size() - 1);
    while (picked.size() < n) {
      const std::size_t i = pick(rng);
      if (std::find(picked.begin(), picked.end(), i) == picked.end()) picked.push_back(i);
    }
  } else {
    std::vector<std::size_t> idx(mem.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (std::size_t k = 0; k < n; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, idx.size() - 1);
      std::swap(idx[k], idx[pick(rng)]);
      picked.push_back(idx[k]);
    }
  }
  std::vector<const ExperienceUnit*> batch;
  batch.reserve(n);
  for (std::size_t i : picked) batch.push_back(&mem.at(i));
  return batch;
}

// y = r + gamma * max_a' Q_target(s', a'), or y = r for threshold terminals.
inline std::vector<double> compute_targets(std::span<const ExperienceUnit* const> batch,
                                           const MlpNetwork& target_net, double gamma) {
  detail::require(!batch.empty(), "empty batch");
  std::vector<double> y(batch.size());
  std::vector<std::size_t> bootstrap;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    y[i] = batch[i]->r;
    if (!batch[i]->done) bootstrap.push_back(i);
  }
  if (bootstrap.empty()) return y;

  Eigen::MatrixXd next(target_net.input_size(), static_cast<Eigen::Index>(bootstrap.size()));
  for (std::size_t k = 0; k < bootstrap.size(); ++k) {
    const auto& s = batch[bootstrap[k]]->s_next;
    detail::require(static_cast<int>(s.size()) == target_net.input_size(),
                    "experience state size does not match the network");
    next.col(static_cast<Eigen::Index>(k)) = Eigen::Map<const Eigen::VectorXd>(s.data(), next.rows());
  }
  const Eigen::MatrixXd q = target_net.forward_batch(next);
  for (std::size_t k = 0; k < bootstrap.size(); ++k) {
    y[bootstrap[k]] += gamma * q.col(static_cast<Eigen::Index>(k)).maxCoeff();
  }
  return y;
}

// One mini-batch gradient step on `main`. After the update, `target` is
// synchronized when step_counter is a multiple of the replace period.
// Returns nullopt (and changes nothing) while memory holds fewer than
// batch_size units.
template <class Rng, class Updater>
std::optional<double> train_step(MlpNetwork& main, MlpNetwork& target, const ReplayMemory& mem,
                                 const AgentConfig& cfg, std::int64_t step_counter, Rng& rng,
                                 Updater&& update) {
  const auto n = static_cast<std::size_t>(cfg.sgd.batch_size);
  if (mem.size() < n) return std::nullopt;
  const auto batch = sample_batch(mem, n, rng);
  const std::vector<double> y = compute_targets(batch, target, cfg.gamma);

  Eigen::MatrixXd states(main.input_size(), static_cast<Eigen::Index>(n));
  std::vector<int> actions(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = batch[i]->s;
    detail::require(static_cast<int>(s.size()) == main.input_size(),
                    "experience state size does not match the network");
    states.col(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::VectorXd>(s.data(), states.rows());
    actions[i] = batch[i]->a;
  }
  const LossAndGradients lg = loss_and_gradients(main, states, actions, y);
  update(main, lg.gradients);
  if (cfg.replace_period > 0 && step_counter % cfg.replace_period == 0) copy_parameters(main, target);
  return lg.loss;
}

// Plain mini-batch gradient descent with cfg.sgd.
template <class Rng>
std::optional<double> train_step(MlpNetwork& main, MlpNetwork& target, const ReplayMemory& mem,
                                 const AgentConfig& cfg, std::int64_t step_counter, Rng& rng) {
  return train_step(main, target, mem, cfg, step_counter, rng,
                    [&](MlpNetwork& net, const GradientSet& g) { apply_gradients(net, g, cfg.sgd); });
}

}  // namespace aqsp
