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

// Singlet-triplet double-quantum-dot control Hamiltonians, discrete pulse
// tables, and coherent charge/nuclear noise.

#pragma once

#include <cmath>
#include <numbers>
#include <random>
#include <variant>
#include <vector>

#include "aqsp/error.hpp"
#include "aqsp/quantum.hpp"

namespace aqsp {

struct SingleQubitControls {
  double j = 0.0;
  double h = 1.0;
};

struct TwoQubitControls {
  double j1 = 0.0;
  double j2 = 0.0;
  double j12 = 0.0;
  double h1 = 1.0;
  double h2 = 1.0;

  // Capacitive coupling fixed to J1 * J2 / 2, unit Zeeman splittings.
  static TwoQubitControls from_exchange(double j1, double j2) {
    return {j1, j2, j1 * j2 / 2.0, 1.0, 1.0};
  }
};

using Controls = std::variant<SingleQubitControls, TwoQubitControls>;

inline int qubit_count(const Controls& c) {
  return std::holds_alternative<SingleQubitControls>(c) ? 1 : 2;
}

// Per-qubit additive perturbations: delta_z on the sigma_z (exchange) term,
// delta_x on the sigma_x (Zeeman) term.
struct NoiseSample {
  std::vector<double> delta_z;
  std::vector<double> delta_x;

  static NoiseSample zero(int qubits) {
    return {std::vector<double>(qubits, 0.0), std::vector<double>(qubits, 0.0)};
  }

  int qubits() const { return static_cast<int>(delta_z.size()); }
};

inline ComplexMatrix build_h1(const SingleQubitControls& c, const NoiseSample& n) {
  detail::require(n.delta_z.size() == 1 && n.delta_x.size() == 1,
                  "single-qubit Hamiltonian needs a one-qubit noise sample");
  const double jz = c.j + n.delta_z[0];
  const double hx = c.h + n.delta_x[0];
  ComplexMatrix h(2, 2);
  h << jz, hx, hx, -jz;
  return h;
}

inline ComplexMatrix build_h2(const TwoQubitControls& c, const NoiseSample& n) {
  detail::require(n.delta_z.size() == 2 && n.delta_x.size() == 2,
                  "two-qubit Hamiltonian needs a two-qubit noise sample");
  const double j1 = c.j1 + n.delta_z[0];
  const double j2 = c.j2 + n.delta_z[1];
  const double h1 = c.h1 + n.delta_x[0];
  const double h2 = c.h2 + n.delta_x[1];

  const ComplexMatrix id = pauli::identity();
  const ComplexMatrix sz = pauli::z();
  const ComplexMatrix sx = pauli::x();
  const ComplexMatrix sz_minus = sz - id;

  ComplexMatrix h = j1 * tensor(sz, id) + j2 * tensor(id, sz) +
                    (c.j12 / 2.0) * tensor(sz_minus, sz_minus) + h1 * tensor(sx, id) +
                    h2 * tensor(id, sx);
  return 0.5 * h;
}

inline ComplexMatrix build_hamiltonian(const Controls& c, const NoiseSample& n) {
  return std::visit(
      [&](const auto& ctl) -> ComplexMatrix {
        if constexpr (std::is_same_v<std::decay_t<decltype(ctl)>, SingleQubitControls>) {
          return build_h1(ctl, n);
        } else {
          return build_h2(ctl, n);
        }
      },
      c);
}

// Ordered set of pulses sharing one duration. Indices are stable for a run.
class ActionTable {
 public:
  ActionTable(std::vector<Controls> actions, double dt) : actions_(std::move(actions)), dt_(dt) {
    detail::require(!actions_.empty(), "action table is empty");
    detail::require(dt_ > 0.0 && std::isfinite(dt_), "pulse duration must be positive");
    const int q = qubit_count(actions_.front());
    for (const auto& a : actions_) {
      detail::require(qubit_count(a) == q, "action table mixes qubit counts");
    }
  }

  std::size_t size() const { return actions_.size(); }
  double dt() const { return dt_; }
  int qubits() const { return qubit_count(actions_.front()); }

  const Controls& at(std::size_t index) const {
    detail::require(index < actions_.size(), "action index out of range");
    return actions_[index];
  }

  const std::vector<Controls>& actions() const { return actions_; }

 private:
  std::vector<Controls> actions_;
  double dt_;
};

// J in {0, 1, 2, 3, 4}, dt = pi/5.
inline ActionTable action_table_single() {
  std::vector<Controls> actions;
  for (int j = 0; j <= 4; ++j) actions.emplace_back(SingleQubitControls{static_cast<double>(j), 1.0});
  return ActionTable(std::move(actions), std::numbers::pi / 5.0);
}

enum class TwoQubitActionSet {
  kFull,        // (J1, J2) in {0..5}^2, 36 actions
  kRestricted,  // (J1, J2) in {1..5}^2, 25 actions
};

// Row-major over (J1, J2): index = n * i + j. dt = pi/4.
inline ActionTable action_table_two(TwoQubitActionSet set = TwoQubitActionSet::kFull) {
  const int lo = set == TwoQubitActionSet::kFull ? 0 : 1;
  std::vector<Controls> actions;
  for (int i = lo; i <= 5; ++i) {
    for (int j = lo; j <= 5; ++j) {
      actions.emplace_back(TwoQubitControls::from_exchange(i, j));
    }
  }
  return ActionTable(std::move(actions), std::numbers::pi / 4.0);
}

// Independent uniform draws on [-amplitude, +amplitude] per qubit. One call per
// pulse. The same number of variates is consumed for every amplitude, so sweeps
// sharing a seed reuse the same noise directions.
template <class Rng>
NoiseSample sample_noise(double delta_charge, double delta_nuclear, int qubits, Rng& rng) {
  detail::require(std::isfinite(delta_charge) && std::isfinite(delta_nuclear),
                  "noise amplitudes must be finite");
  detail::require(delta_charge >= 0.0 && delta_nuclear >= 0.0, "noise amplitudes must be >= 0");
  detail::require(qubits == 1 || qubits == 2, "qubit count must be 1 or 2");
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  NoiseSample n = NoiseSample::zero(qubits);
  for (int q = 0; q < qubits; ++q) {
    n.delta_z[q] = delta_charge * unit(rng);
    n.delta_x[q] = delta_nuclear * unit(rng);
  }
  return n;
}

}  // namespace aqsp
