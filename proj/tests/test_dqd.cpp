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

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "aqsp/dqd.hpp"

namespace aqsp {
namespace {

ComplexMatrix real2(double a, double b, double c, double d) {
  ComplexMatrix m(2, 2);
  m << a, b, c, d;
  return m;
}

// Eq.-free reference: build the 4x4 two-qubit operator entry by entry in the
// computational basis |q1 q2>, q1 most significant.
ComplexMatrix reference_h2(double j1, double j2, double j12, double h1, double h2) {
  ComplexMatrix h = ComplexMatrix::Zero(4, 4);
  for (int s = 0; s < 4; ++s) {
    const int b1 = s >> 1, b2 = s & 1;
    const double z1 = b1 ? -1.0 : 1.0, z2 = b2 ? -1.0 : 1.0;
    const double m1 = z1 - 1.0, m2 = z2 - 1.0;  // (sigma_z - I) eigenvalues
    h(s, s) = 0.5 * (j1 * z1 + j2 * z2 + 0.5 * j12 * m1 * m2);
    h(s ^ 2, s) += 0.5 * h1;  // sigma_x on qubit 1 flips the high bit
    h(s ^ 1, s) += 0.5 * h2;
  }
  return h;
}

TEST(BuildH1, Examples) {
  const NoiseSample zero = NoiseSample::zero(1);
  EXPECT_EQ(build_h1({1.0, 1.0}, zero), real2(1, 1, 1, -1));
  EXPECT_EQ(build_h1({0.0, 1.0}, zero), pauli::x());
  const ComplexMatrix h = build_h1({2.0, 1.0}, NoiseSample{{0.1}, {-0.05}});
  EXPECT_NEAR(std::abs(h(0, 0) - 2.1), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(h(0, 1) - 0.95), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(h(1, 0) - 0.95), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(h(1, 1) + 2.1), 0.0, 1e-15);
  EXPECT_EQ(hermiticity_defect(h), 0.0);
  const auto spec = hermitian_spectrum(h);
  const double e = std::sqrt(2.1 * 2.1 + 0.95 * 0.95);
  EXPECT_NEAR(spec.values(0), -e, 1e-12);
  EXPECT_NEAR(spec.values(1), e, 1e-12);
}

TEST(BuildH1, RejectsWrongNoiseShape) {
  EXPECT_THROW(build_h1({1.0, 1.0}, NoiseSample::zero(2)), PreconditionError);
}

TEST(BuildH2, UnitExchangeExample) {
  const ComplexMatrix h = build_h2(TwoQubitControls::from_exchange(1, 1), NoiseSample::zero(2));
  EXPECT_NEAR(h(0, 0).real(), 1.0, 1e-15);
  EXPECT_NEAR(h(1, 1).real(), 0.0, 1e-15);
  EXPECT_NEAR(h(2, 2).real(), 0.0, 1e-15);
  EXPECT_NEAR(h(3, 3).real(), -0.5, 1e-15);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      if (i != j && std::abs(h(i, j)) > 0) EXPECT_NEAR(h(i, j).real(), 0.5, 1e-15);
}

TEST(BuildH2, ZeroExchangeIsTransverseField) {
  const ComplexMatrix h = build_h2(TwoQubitControls::from_exchange(0, 0), NoiseSample::zero(2));
  const ComplexMatrix ref = 0.5 * (tensor(pauli::x(), pauli::identity()) + tensor(pauli::identity(), pauli::x()));
  EXPECT_LT((h - ref).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(BuildH2, CouplingIsHalfProduct) {
  EXPECT_EQ(TwoQubitControls::from_exchange(2, 3).j12, 3.0);
}

TEST(BuildH2, MatchesReferenceForEveryAction) {
  const ActionTable t = action_table_two();
  for (std::size_t a = 0; a < t.size(); ++a) {
    const auto& c = std::get<TwoQubitControls>(t.at(a));
    const ComplexMatrix h = build_h2(c, NoiseSample::zero(2));
    EXPECT_LT((h - reference_h2(c.j1, c.j2, c.j12, c.h1, c.h2)).cwiseAbs().maxCoeff(), 1e-12) << a;
    EXPECT_EQ(hermiticity_defect(h), 0.0);
  }
}

TEST(BuildH2, NoiseEntersExchangeAndZeemanTerms) {
  const NoiseSample n{{0.1, -0.2}, {0.03, 0.04}};
  const ComplexMatrix h = build_h2(TwoQubitControls::from_exchange(2, 1), n);
  // J12 keeps its nominal value; noise shifts J and h only.
  EXPECT_LT((h - reference_h2(2.1, 0.8, 1.0, 1.03, 1.04)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(BuildHamiltonian, ZeroNoiseIsBitIdenticalToNoiseless) {
  std::mt19937_64 rng(1);
  for (const auto& table : {action_table_single(), action_table_two()}) {
    for (const auto& c : table.actions()) {
      const NoiseSample sampled = sample_noise(0.0, 0.0, table.qubits(), rng);
      EXPECT_EQ(build_hamiltonian(c, sampled), build_hamiltonian(c, NoiseSample::zero(table.qubits())));
    }
  }
}

TEST(ActionTable, SingleQubit) {
  const ActionTable t = action_table_single();
  EXPECT_EQ(t.size(), 5u);
  EXPECT_EQ(std::get<SingleQubitControls>(t.at(3)).j, 3.0);
  EXPECT_EQ(std::get<SingleQubitControls>(t.at(3)).h, 1.0);
  EXPECT_DOUBLE_EQ(t.dt(), std::numbers::pi / 5);
  EXPECT_EQ(t.qubits(), 1);
  EXPECT_THROW(t.at(5), PreconditionError);
}

TEST(ActionTable, TwoQubitRowMajor) {
  const ActionTable t = action_table_two();
  EXPECT_EQ(t.size(), 36u);
  EXPECT_DOUBLE_EQ(t.dt(), std::numbers::pi / 4);
  const auto& first = std::get<TwoQubitControls>(t.at(0));
  EXPECT_EQ(first.j1, 0.0);
  EXPECT_EQ(first.j2, 0.0);
  const auto& last = std::get<TwoQubitControls>(t.at(35));
  EXPECT_EQ(last.j1, 5.0);
  EXPECT_EQ(last.j2, 5.0);
  std::set<std::pair<double, double>> seen;
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) {
      const auto& c = std::get<TwoQubitControls>(t.at(static_cast<std::size_t>(6 * i + j)));
      EXPECT_EQ(c.j1, i);
      EXPECT_EQ(c.j2, j);
      seen.insert({c.j1, c.j2});
    }
  EXPECT_EQ(seen.size(), 36u);
}

TEST(ActionTable, RestrictedVariant) {
  const ActionTable t = action_table_two(TwoQubitActionSet::kRestricted);
  EXPECT_EQ(t.size(), 25u);
  const auto& c = std::get<TwoQubitControls>(t.at(0));
  EXPECT_EQ(c.j1, 1.0);
  EXPECT_EQ(c.j2, 1.0);
}

TEST(ActionTable, RejectsMixedOrEmpty) {
  EXPECT_THROW(ActionTable({}, 1.0), PreconditionError);
  EXPECT_THROW(ActionTable({SingleQubitControls{}, TwoQubitControls{}}, 1.0), PreconditionError);
  EXPECT_THROW(ActionTable({SingleQubitControls{}}, 0.0), PreconditionError);
}

TEST(SampleNoise, ZeroAmplitudeIsZero) {
  std::mt19937_64 rng(1);
  const NoiseSample n = sample_noise(0.0, 0.0, 2, rng);
  for (double d : n.delta_z) EXPECT_EQ(d, 0.0);
  for (double d : n.delta_x) EXPECT_EQ(d, 0.0);
}

TEST(SampleNoise, BoundedAndCentred) {
  std::mt19937_64 rng(2);
  double sum = 0.0;
  const int n = 100000;
  for (int k = 0; k < n; ++k) {
    const NoiseSample s = sample_noise(0.1, 0.0, 1, rng);
    ASSERT_LE(std::abs(s.delta_z[0]), 0.1);
    ASSERT_EQ(s.delta_x[0], 0.0);
    sum += s.delta_z[0];
  }
  // Uniform[-0.1, 0.1] has sd 0.1/sqrt(3); the sample mean's sd is ~1.8e-4.
  EXPECT_NEAR(sum / n, 0.0, 0.002);
}

TEST(SampleNoise, RejectsNegativeAmplitude) {
  std::mt19937_64 rng(3);
  EXPECT_THROW(sample_noise(-0.1, 0.0, 1, rng), PreconditionError);
  EXPECT_THROW(sample_noise(0.0, 0.1, 3, rng), PreconditionError);
}

}  // namespace
}  // namespace aqsp
