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

// State-preparation environment: task datasets, the [P_current, P_target]
// encoding, the pulse step with fidelity reward, and greedy rollouts.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "aqsp/dqd.hpp"
#include "aqsp/dqn.hpp"
#include "aqsp/error.hpp"
#include "aqsp/mlp.hpp"
#include "aqsp/povm.hpp"
#include "aqsp/quantum.hpp"

namespace aqsp {

// ---------------------------------------------------------------------------
// State pools

struct BlochAngles {
  double alpha = 0.0;  // polar
  double beta = 0.0;   // azimuth
};

// cos(alpha/2)|0> + e^{i beta} sin(alpha/2)|1>
inline PureState bloch_state(BlochAngles a) {
  ComplexVector v(2);
  v << std::cos(a.alpha / 2.0), std::polar(std::sin(a.alpha / 2.0), a.beta);
  return PureState(std::move(v));
}

// alpha = k pi / (n_alpha + 1), k = 1..n_alpha (poles excluded);
// beta = 2 pi m / n_beta, m = 0..n_beta-1. Alpha-major order.
inline std::vector<PureState> gen_bloch_states(int n_alpha = 7, int n_beta = 14) {
  detail::require(n_alpha > 0 && n_beta > 0, "Bloch grid counts must be positive");
  std::vector<PureState> out;
  out.reserve(static_cast<std::size_t>(n_alpha * n_beta));
  for (int k = 1; k <= n_alpha; ++k) {
    for (int m = 0; m < n_beta; ++m) {
      out.push_back(bloch_state({k * std::numbers::pi / (n_alpha + 1), 2.0 * std::numbers::pi * m / n_beta}));
    }
  }
  return out;
}

// A point on the unit 3-sphere in hyperspherical coordinates, with a
// quarter-turn phase b in {1, i, -1, -i} on each component.
struct HypersphericalPoint {
  std::array<double, 3> theta{};
  std::array<int, 4> phase{};  // b_j = i^phase[j]

  std::array<double, 4> magnitudes() const {
    const double s1 = std::sin(theta[0]);
    const double s2 = std::sin(theta[1]);
    return {std::cos(theta[0]), s1 * std::cos(theta[1]), s1 * s2 * std::cos(theta[2]),
            s1 * s2 * std::sin(theta[2])};
  }

  PureState state() const {
    static constexpr std::array<Complex, 4> kPhases = {Complex(1, 0), Complex(0, 1), Complex(-1, 0),
                                                       Complex(0, -1)};
    const auto c = magnitudes();
    ComplexVector v(4);
    for (int j = 0; j < 4; ++j) v(j) = kPhases[static_cast<std::size_t>(phase[j] & 3)] * c[j];
    return PureState(std::move(v));
  }
};

// All 3^3 * 4^4 = 6912 points with theta_i in {pi/8, pi/4, 3pi/8}. Theta-major
// (theta1 slowest), then phases (b1 slowest).
inline std::vector<PureState> gen_hypersphere_states() {
  const std::array<double, 3> angles = {std::numbers::pi / 8, std::numbers::pi / 4, 3 * std::numbers::pi / 8};
  std::vector<PureState> out;
  out.reserve(6912);
  for (double t1 : angles)
    for (double t2 : angles)
      for (double t3 : angles)
        for (int b1 = 0; b1 < 4; ++b1)
          for (int b2 = 0; b2 < 4; ++b2)
            for (int b3 = 0; b3 < 4; ++b3)
              for (int b4 = 0; b4 < 4; ++b4) {
                out.push_back(HypersphericalPoint{{t1, t2, t3}, {b1, b2, b3, b4}}.state());
              }
  return out;
}

// ---------------------------------------------------------------------------
// Datasets

struct TaskPair {
  DensityMatrix rho_ini;
  DensityMatrix rho_tar;
};

enum class Split { kTrain, kValidation, kTest };

inline Split parse_split(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "validation") return Split::kValidation;
  if (s == "test") return Split::kTest;
  throw PreconditionError("unknown split '" + s + "'");
}

// Pure-state pool plus ordered (initial, target) pairs and a three-way split
// of pair indices.
struct Dataset {
  int qubits = 1;
  std::uint64_t seed = 0;
  std::vector<PureState> states;
  std::vector<std::pair<int, int>> pairs;
  std::vector<int> train;
  std::vector<int> validation;
  std::vector<int> test;

  const std::vector<int>& split(Split s) const {
    switch (s) {
      case Split::kTrain: return train;
      case Split::kValidation: return validation;
      case Split::kTest: return test;
    }
    return test;
  }

  TaskPair task(int pair_index) const {
    detail::require(pair_index >= 0 && static_cast<std::size_t>(pair_index) < pairs.size(),
                    "pair index out of range");
    const auto [i, j] = pairs[static_cast<std::size_t>(pair_index)];
    return {DensityMatrix(states.at(static_cast<std::size_t>(i))),
            DensityMatrix(states.at(static_cast<std::size_t>(j)))};
  }

  std::vector<TaskPair> tasks(Split s, std::size_t limit = SIZE_MAX) const {
    std::vector<TaskPair> out;
    for (int p : split(s)) {
      if (out.size() >= limit) break;
      out.push_back(task(p));
    }
    return out;
  }
};

template <class Rng>
void shuffle_in_place(std::vector<std::pair<int, int>>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(v[i - 1], v[pick(rng)]);
  }
}

// All ordered pairs (i != j), shuffled; the first train_n go to training, the
// next val_n to validation, the rest to test.
template <class Rng>
Dataset build_pairs(std::vector<PureState> states, Rng& rng, int train_n, int val_n) {
  detail::require(states.size() >= 2, "need at least two states to form pairs");
  detail::require(train_n >= 0 && val_n >= 0, "split sizes must be non-negative");
  const auto dim = states.front().dim();
  for (const auto& s : states) detail::require(s.dim() == dim, "state pool mixes dimensions");
  const auto n = static_cast<int>(states.size());
  const std::size_t total = static_cast<std::size_t>(n) * static_cast<std::size_t>(n - 1);
  detail::require(static_cast<std::size_t>(train_n) + static_cast<std::size_t>(val_n) <= total,
                  "split sizes exceed the number of pairs");

  Dataset ds;
  ds.qubits = dim == 2 ? 1 : 2;
  ds.states = std::move(states);
  ds.pairs.reserve(total);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) ds.pairs.emplace_back(i, j);
  shuffle_in_place(ds.pairs, rng);
  for (int k = 0; k < static_cast<int>(total); ++k) {
    if (k < train_n) ds.train.push_back(k);
    else if (k < train_n + val_n) ds.validation.push_back(k);
    else ds.test.push_back(k);
  }
  return ds;
}

inline constexpr int kTwoQubitPoolDraw = 200;

// One qubit: the 98-state Bloch grid. Two qubits: 200 distinct entries drawn
// uniformly from the 6912-point hypersphere pool.
inline Dataset generate_dataset(int qubits, std::uint64_t seed, int train_n = 100, int val_n = 100) {
  detail::require(qubits == 1 || qubits == 2, "qubit count must be 1 or 2");
  std::mt19937_64 rng(seed);
  std::vector<PureState> pool;
  if (qubits == 1) {
    pool = gen_bloch_states();
  } else {
    const auto all = gen_hypersphere_states();
    std::vector<std::size_t> idx(all.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (std::size_t k = 0; k < static_cast<std::size_t>(kTwoQubitPoolDraw); ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, idx.size() - 1);
      std::swap(idx[k], idx[pick(rng)]);
      pool.push_back(all[idx[k]]);
    }
  }
  Dataset ds = build_pairs(std::move(pool), rng, train_n, val_n);
  ds.seed = seed;
  return ds;
}

// {qubits, seed, states: [[[re, im], ...], ...], pairs: [[ini, tar], ...],
//  splits: {train, validation, test}}; split entries index `pairs`.
inline nlohmann::json to_json(const Dataset& ds) {
  nlohmann::json states = nlohmann::json::array();
  for (const auto& s : ds.states) {
    nlohmann::json amps = nlohmann::json::array();
    for (Eigen::Index k = 0; k < s.dim(); ++k) amps.push_back({s.amplitudes()(k).real(), s.amplitudes()(k).imag()});
    states.push_back(std::move(amps));
  }
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& [i, j] : ds.pairs) pairs.push_back({i, j});
  return {{"qubits", ds.qubits},
          {"seed", ds.seed},
          {"states", std::move(states)},
          {"pairs", std::move(pairs)},
          {"splits", {{"train", ds.train}, {"validation", ds.validation}, {"test", ds.test}}}};
}

inline Dataset dataset_from_json(const nlohmann::json& j) {
  try {
    Dataset ds;
    ds.qubits = j.at("qubits").get<int>();
    if (ds.qubits != 1 && ds.qubits != 2) throw DataError("dataset qubit count must be 1 or 2");
    ds.seed = j.at("seed").get<std::uint64_t>();
    const Eigen::Index dim = ds.qubits == 1 ? 2 : 4;
    for (const auto& amps : j.at("states")) {
      if (static_cast<Eigen::Index>(amps.size()) != dim) throw DataError("dataset state has wrong dimension");
      ComplexVector v(dim);
      for (Eigen::Index k = 0; k < dim; ++k) {
        const auto& c = amps.at(static_cast<std::size_t>(k));
        if (c.size() != 2) throw DataError("complex amplitude must be a [re, im] pair");
        v(k) = Complex(c.at(0).get<double>(), c.at(1).get<double>());
      }
      ds.states.emplace_back(std::move(v));
    }
    const auto n = static_cast<int>(ds.states.size());
    for (const auto& p : j.at("pairs")) {
      if (p.size() != 2) throw DataError("pair must have two indices");
      const int a = p.at(0).get<int>();
      const int b = p.at(1).get<int>();
      if (a < 0 || a >= n || b < 0 || b >= n) throw DataError("pair index out of range");
      ds.pairs.emplace_back(a, b);
    }
    const auto& splits = j.at("splits");
    ds.train = splits.at("train").get<std::vector<int>>();
    ds.validation = splits.at("validation").get<std::vector<int>>();
    ds.test = splits.at("test").get<std::vector<int>>();
    for (const auto* s : {&ds.train, &ds.validation, &ds.test}) {
      for (int p : *s) {
        if (p < 0 || static_cast<std::size_t>(p) >= ds.pairs.size()) throw DataError("split index out of range");
      }
    }
    return ds;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed dataset: ") + e.what());
  } catch (const PreconditionError& e) {
    throw DataError(std::string("malformed dataset: ") + e.what());
  }
}

inline void save_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write dataset to " + path);
  out << to_json(ds).dump() << '\n';
  if (!out) throw DataError("failed writing dataset to " + path);
}

inline Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("cannot parse dataset " + path + ": " + e.what());
  }
  return dataset_from_json(j);
}

// ---------------------------------------------------------------------------
// Environment

// [P_current, P_target], each half a POVM outcome distribution.
struct EnvEncoding {
  std::vector<double> values;
};

inline EnvEncoding encode(const DensityMatrix& rho_cur, const DensityMatrix& rho_tar, const PovmSet& povm) {
  const ProbabilityVector cur = measure(rho_cur, povm);
  const ProbabilityVector tar = measure(rho_tar, povm);
  EnvEncoding e;
  e.values.reserve(static_cast<std::size_t>(cur.size() + tar.size()));
  e.values.insert(e.values.end(), cur.values().data(), cur.values().data() + cur.size());
  e.values.insert(e.values.end(), tar.values().data(), tar.values().data() + tar.size());
  return e;
}

inline std::pair<DensityMatrix, DensityMatrix> decode(const EnvEncoding& e, const PovmSet& povm) {
  const auto n = static_cast<Eigen::Index>(povm.size());
  detail::require(static_cast<Eigen::Index>(e.values.size()) == 2 * n, "encoding length does not match the POVM");
  const Eigen::Map<const Eigen::VectorXd> all(e.values.data(), 2 * n);
  return {reconstruct(ProbabilityVector(all.head(n)), povm), reconstruct(ProbabilityVector(all.tail(n)), povm)};
}

struct StepOutcome {
  EnvEncoding encoding_next;
  double reward = 0.0;
  double fidelity = 0.0;
  bool done_threshold = false;
  bool done_timeout = false;
};

struct StepResult {
  DensityMatrix rho_next;
  StepOutcome outcome;
};

// Applies one pulse. Reward is the post-pulse fidelity. The threshold check
// precedes the timeout check, so at most one flag is set.
// `encoding_target` overrides the target half of the encoding (fixed-target
// models); fidelity is always measured against rho_tar.
inline StepResult env_step(const DensityMatrix& rho_cur, const DensityMatrix& rho_tar, std::size_t action,
                           const ActionTable& table, int step_index, int max_steps, double f_threshold,
                           const NoiseSample& noise, const PovmSet& povm,
                           const DensityMatrix* encoding_target = nullptr) {
  detail::require(step_index >= 0 && step_index < max_steps, "step index outside the episode budget");
  detail::require(rho_cur.dim() == rho_tar.dim(), "current and target states differ in dimension");
  const ComplexMatrix h = build_hamiltonian(table.at(action), noise);
  DensityMatrix next = evolve(rho_cur, h, table.dt());
  StepOutcome out;
  out.fidelity = fidelity(rho_tar, next);
  out.reward = out.fidelity;
  out.done_threshold = out.fidelity > f_threshold;
  out.done_timeout = !out.done_threshold && step_index + 1 >= max_steps;
  out.encoding_next = encode(next, encoding_target ? *encoding_target : rho_tar, povm);
  return {std::move(next), std::move(out)};
}

struct EpisodeRecord {
  std::vector<int> actions;
  std::vector<double> fidelities;
  double final_fidelity = 0.0;
  double total_reward = 0.0;
  double discounted_return = 0.0;
};

struct EpisodeSettings {
  int max_steps = 10;
  double f_threshold = 0.999;
  double gamma = 0.9;
  double epsilon = 1.0;  // greedy probability; 1 for validation and test
  double noise_charge = 0.0;
  double noise_nuclear = 0.0;
  std::optional<DensityMatrix> encoding_target;
};

// Rolls out at most max_steps pulses. Noise, when enabled, is redrawn for
// every pulse. With epsilon = 1 and no noise the rng is not touched.
template <class Rng>
EpisodeRecord run_episode(const MlpNetwork& net, const TaskPair& task, const ActionTable& table,
                          const EpisodeSettings& settings, Rng& rng, const PovmSet& povm) {
  detail::require(task.rho_ini.dim() == task.rho_tar.dim(), "task states differ in dimension");
  detail::require(task.rho_ini.dim() == povm.dim(), "task dimension does not match the POVM");
  detail::require(settings.max_steps > 0, "max_steps must be positive");
  const int qubits = table.qubits();
  const bool noisy = settings.noise_charge > 0.0 || settings.noise_nuclear > 0.0;
  const DensityMatrix* enc_target = settings.encoding_target ? &*settings.encoding_target : nullptr;
  const EpsilonSchedule eps{settings.epsilon, 0.0, settings.epsilon};

  EpisodeRecord rec;
  DensityMatrix rho = task.rho_ini;
  EnvEncoding s = encode(rho, enc_target ? *enc_target : task.rho_tar, povm);
  double discount = 1.0;
  for (int step = 0; step < settings.max_steps; ++step) {
    const int a = settings.epsilon >= 1.0 ? greedy_action(net, s.values) : select_action(net, s.values, eps, rng);
    const NoiseSample noise = noisy ? sample_noise(settings.noise_charge, settings.noise_nuclear, qubits, rng)
                                    : NoiseSample::zero(qubits);
    StepResult r = env_step(rho, task.rho_tar, static_cast<std::size_t>(a), table, step, settings.max_steps,
                            settings.f_threshold, noise, povm, enc_target);
    rec.actions.push_back(a);
    rec.fidelities.push_back(r.outcome.fidelity);
    rec.total_reward += r.outcome.reward;
    rec.discounted_return += discount * r.outcome.reward;
    discount *= settings.gamma;
    rho = std::move(r.rho_next);
    s = std::move(r.outcome.encoding_next);
    if (r.outcome.done_threshold || r.outcome.done_timeout) break;
  }
  rec.final_fidelity = rec.fidelities.back();
  return rec;
}

}  // namespace aqsp
