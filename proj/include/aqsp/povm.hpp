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

// Informationally complete POVM codec: density matrix <-> outcome distribution.
//
// measure:      P(a) = Tr[rho M(a)]
// reconstruct:  rho  = sum_{a,a'} P(a) Tinv(a,a') M(a'),  T(a,a') = Tr[M(a) M(a')]
//
// The single-qubit Pauli-4 set uses |l> = (|0> + i|1>)/sqrt(2).

#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "aqsp/error.hpp"
#include "aqsp/quantum.hpp"

namespace aqsp {

class PovmSet {
 public:
  explicit PovmSet(std::vector<ComplexMatrix> operators) : ops_(std::move(operators)) {
    detail::require(!ops_.empty(), "POVM needs at least one operator");
    const Eigen::Index dim = ops_.front().rows();
    ComplexMatrix total = ComplexMatrix::Zero(dim, dim);
    for (const auto& m : ops_) {
      detail::require(m.rows() == dim && m.cols() == dim, "POVM operators differ in shape");
      detail::require(hermitian_spectrum(m).values.minCoeff() >= -1e-12,
                      "POVM operator is not positive semidefinite");
      total += m;
    }
    detail::require((total - ComplexMatrix::Identity(dim, dim)).cwiseAbs().maxCoeff() <= 1e-12,
                    "POVM operators do not sum to the identity");

    // Reconstruction inverts the overlap matrix, so the set must be minimal: d^2 operators.
    const auto n = static_cast<Eigen::Index>(ops_.size());
    detail::require(n == dim * dim, "POVM is not informationally complete (needs d^2 operators)");
    overlap_.resize(n, n);
    for (Eigen::Index a = 0; a < n; ++a) {
      for (Eigen::Index b = 0; b < n; ++b) {
        overlap_(a, b) = (ops_[a] * ops_[b]).trace().real();
      }
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(overlap_);
    detail::require(lu.isInvertible(), "POVM is not informationally complete");
    overlap_inverse_ = lu.inverse();
    if ((overlap_ * overlap_inverse_ - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff() > 1e-9) {
      throw NumericalError("POVM overlap matrix is too ill-conditioned to invert");
    }
  }

  std::size_t size() const { return ops_.size(); }
  Eigen::Index dim() const { return ops_.front().rows(); }
  const ComplexMatrix& op(std::size_t a) const { return ops_.at(a); }
  const std::vector<ComplexMatrix>& operators() const { return ops_; }
  const Eigen::MatrixXd& overlap() const { return overlap_; }
  const Eigen::MatrixXd& overlap_inverse() const { return overlap_inverse_; }

 private:
  std::vector<ComplexMatrix> ops_;
  Eigen::MatrixXd overlap_;
  Eigen::MatrixXd overlap_inverse_;
};

// Outcome distribution over the POVM's operators.
class ProbabilityVector {
 public:
  explicit ProbabilityVector(Eigen::VectorXd probs) : p_(std::move(probs)) {
    detail::require(p_.size() > 0, "probability vector is empty");
    detail::require(p_.allFinite(), "probability vector has non-finite entries");
    detail::require(p_.minCoeff() >= -1e-12, "probability vector has a negative entry");
    detail::require(std::abs(p_.sum() - 1.0) <= kStateTolerance, "probabilities do not sum to 1");
  }

  const Eigen::VectorXd& values() const { return p_; }
  Eigen::Index size() const { return p_.size(); }
  double operator[](Eigen::Index i) const { return p_(i); }

 private:
  Eigen::VectorXd p_;
};

inline PovmSet pauli4_single() {
  const double r = 1.0 / std::numbers::sqrt2;
  ComplexVector zero(2), left(2), plus(2);
  zero << 1.0, 0.0;
  left << r, Complex(0.0, r);
  plus << r, r;
  std::vector<ComplexMatrix> ops;
  ops.push_back(zero * zero.adjoint() / 3.0);
  ops.push_back(left * left.adjoint() / 3.0);
  ops.push_back(plus * plus.adjoint() / 3.0);
  ops.push_back(ComplexMatrix::Identity(2, 2) - ops[0] - ops[1] - ops[2]);
  return PovmSet(std::move(ops));
}

// n-fold tensor power; the first qubit's outcome is the most significant digit.
inline PovmSet tensor_povm(const PovmSet& base, int n_qubits) {
  detail::require(n_qubits == 1 || n_qubits == 2, "only 1- and 2-qubit POVMs are supported");
  if (n_qubits == 1) return base;
  std::vector<ComplexMatrix> ops;
  ops.reserve(base.size() * base.size());
  for (const auto& a : base.operators()) {
    for (const auto& b : base.operators()) ops.push_back(tensor(a, b));
  }
  return PovmSet(std::move(ops));
}

inline PovmSet pauli4(int n_qubits) { return tensor_povm(pauli4_single(), n_qubits); }

inline ProbabilityVector measure(const DensityMatrix& rho, const PovmSet& povm) {
  detail::require(rho.dim() == povm.dim(), "state and POVM dimensions differ");
  Eigen::VectorXd p(static_cast<Eigen::Index>(povm.size()));
  for (std::size_t a = 0; a < povm.size(); ++a) {
    // Tr[rho M] = sum_ij rho_ij M_ji
    const Complex t = rho.matrix().cwiseProduct(povm.op(a).transpose()).sum();
    if (std::abs(t.imag()) >= 1e-10) throw NumericalError("POVM outcome has an imaginary part");
    p(static_cast<Eigen::Index>(a)) = t.real();
  }
  return ProbabilityVector(std::move(p));
}

// Linear inversion. The result is Hermitian-symmetrized; its validity as a
// state is checked by the DensityMatrix constructor, not enforced by clipping.
inline DensityMatrix reconstruct(const ProbabilityVector& p, const PovmSet& povm) {
  detail::require(static_cast<std::size_t>(p.size()) == povm.size(),
                  "probability vector length does not match the POVM");
  const Eigen::VectorXd coeffs = povm.overlap_inverse().transpose() * p.values();
  ComplexMatrix rho = ComplexMatrix::Zero(povm.dim(), povm.dim());
  for (std::size_t a = 0; a < povm.size(); ++a) {
    rho += coeffs(static_cast<Eigen::Index>(a)) * povm.op(a);
  }
  return DensityMatrix(ComplexMatrix(0.5 * (rho + rho.adjoint())));
}

}  // namespace aqsp
