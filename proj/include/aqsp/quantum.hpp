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

// Small-dimension (2 and 4) complex linear algebra for closed-system state
// evolution: density matrices, Hermitian exponentials and Uhlmann fidelity.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>

#include <Eigen/Dense>

#include "aqsp/error.hpp"

namespace aqsp {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

inline constexpr double kStateTolerance = 1e-9;

namespace pauli {

inline ComplexMatrix identity(Eigen::Index dim = 2) { return ComplexMatrix::Identity(dim, dim); }

inline ComplexMatrix x() {
  ComplexMatrix m(2, 2);
  m << 0.0, 1.0, 1.0, 0.0;
  return m;
}

inline ComplexMatrix y() {
  ComplexMatrix m(2, 2);
  m << 0.0, Complex(0.0, -1.0), Complex(0.0, 1.0), 0.0;
  return m;
}

inline ComplexMatrix z() {
  ComplexMatrix m(2, 2);
  m << 1.0, 0.0, 0.0, -1.0;
  return m;
}

}  // namespace pauli

// Largest entrywise |A - A^dagger|.
inline double hermiticity_defect(const ComplexMatrix& a) {
  if (a.rows() != a.cols()) return INFINITY;
  return (a - a.adjoint()).cwiseAbs().maxCoeff();
}

inline bool all_finite(const ComplexMatrix& a) {
  return a.real().allFinite() && a.imag().allFinite();
}

// Kronecker product; the left factor indexes the most significant digit.
inline ComplexMatrix tensor(const ComplexMatrix& a, const ComplexMatrix& b) {
  ComplexMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

struct HermitianSpectrum {
  Eigen::VectorXd values;  // ascending
  ComplexMatrix vectors;   // columns
};

inline HermitianSpectrum hermitian_spectrum(const ComplexMatrix& h) {
  detail::require(h.rows() == h.cols() && h.rows() > 0, "matrix must be square and nonempty");
  detail::require(all_finite(h), "matrix has non-finite entries");
  detail::require(hermiticity_defect(h) <= kStateTolerance, "matrix is not Hermitian");
  // Solve on the exactly Hermitian part so round-off in h never leaks into U.
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(0.5 * (h + h.adjoint()));
  if (solver.info() != Eigen::Success) throw NumericalError("Hermitian eigensolver did not converge");
  return {solver.eigenvalues(), solver.eigenvectors()};
}

// Square root of a positive semidefinite matrix. Eigenvalues below the
// round-off floor are treated as exact zeros.
inline ComplexMatrix psd_sqrt(const ComplexMatrix& a) {
  const HermitianSpectrum spec = hermitian_spectrum(a);
  const double floor = 64.0 * Eigen::NumTraits<double>::epsilon() *
                       std::max(1.0, spec.values.cwiseAbs().maxCoeff());
  Eigen::VectorXd roots(spec.values.size());
  for (Eigen::Index i = 0; i < roots.size(); ++i) {
    roots(i) = spec.values(i) > floor ? std::sqrt(spec.values(i)) : 0.0;
  }
  return spec.vectors * roots.asDiagonal() * spec.vectors.adjoint();
}

class DensityMatrix;

class PureState {
 public:
  explicit PureState(ComplexVector amplitudes) : amplitudes_(std::move(amplitudes)) {
    detail::require(amplitudes_.size() == 2 || amplitudes_.size() == 4,
                    "pure state must have 2 or 4 amplitudes");
    detail::require(amplitudes_.real().allFinite() && amplitudes_.imag().allFinite(),
                    "pure state has non-finite amplitudes");
    detail::require(std::abs(amplitudes_.norm() - 1.0) <= kStateTolerance,
                    "pure state is not normalized");
  }

  // |k> in the computational basis of the given dimension.
  static PureState basis(Eigen::Index dim, Eigen::Index k) {
    detail::require(k >= 0 && k < dim, "basis index out of range");
    ComplexVector v = ComplexVector::Zero(dim);
    v(k) = 1.0;
    return PureState(std::move(v));
  }

  const ComplexVector& amplitudes() const { return amplitudes_; }
  Eigen::Index dim() const { return amplitudes_.size(); }

  Complex inner(const PureState& other) const { return amplitudes_.dot(other.amplitudes_); }

 private:
  ComplexVector amplitudes_;
};

// Hermitian, unit-trace, positive semidefinite operator on 2 or 4 dimensions.
class DensityMatrix {
 public:
  explicit DensityMatrix(ComplexMatrix m) : m_(std::move(m)) { validate(); }

  explicit DensityMatrix(const PureState& psi)
      : m_(psi.amplitudes() * psi.amplitudes().adjoint()) {}

  static DensityMatrix maximally_mixed(Eigen::Index dim) {
    return DensityMatrix(ComplexMatrix(ComplexMatrix::Identity(dim, dim) / static_cast<double>(dim)));
  }

  const ComplexMatrix& matrix() const { return m_; }
  Eigen::Index dim() const { return m_.rows(); }
  int qubits() const { return m_.rows() == 2 ? 1 : 2; }

  double trace() const { return m_.trace().real(); }
  double purity() const { return (m_ * m_).trace().real(); }

  Complex operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }

 private:
  void validate() const {
    detail::require(m_.rows() == m_.cols() && (m_.rows() == 2 || m_.rows() == 4),
                    "density matrix must be 2x2 or 4x4");
    detail::require(all_finite(m_), "density matrix has non-finite entries");
    detail::require(hermiticity_defect(m_) <= kStateTolerance, "density matrix is not Hermitian");
    detail::require(std::abs(m_.trace() - Complex(1.0)) <= kStateTolerance,
                    "density matrix trace is not 1");
    const HermitianSpectrum spec = hermitian_spectrum(m_);
    detail::require(spec.values.minCoeff() >= -kStateTolerance,
                    "density matrix has a negative eigenvalue");
  }

  ComplexMatrix m_;
};

class Unitary {
 public:
  explicit Unitary(ComplexMatrix m) : m_(std::move(m)) {
    detail::require(m_.rows() == m_.cols(), "unitary must be square");
    if (defect() > kStateTolerance) throw NumericalError("matrix is not unitary");
  }

  const ComplexMatrix& matrix() const { return m_; }
  Eigen::Index dim() const { return m_.rows(); }

  // max |U^dagger U - I| entrywise
  double defect() const {
    return (m_.adjoint() * m_ - ComplexMatrix::Identity(m_.rows(), m_.cols())).cwiseAbs().maxCoeff();
  }

 private:
  ComplexMatrix m_;
};

// exp(-i H t) through the spectral decomposition of H.
inline Unitary hermitian_exp(const ComplexMatrix& h, double t) {
  detail::require(std::isfinite(t), "duration must be finite");
  const HermitianSpectrum spec = hermitian_spectrum(h);
  ComplexVector phases(spec.values.size());
  for (Eigen::Index i = 0; i < phases.size(); ++i) {
    phases(i) = std::polar(1.0, -spec.values(i) * t);
  }
  return Unitary(spec.vectors * phases.asDiagonal() * spec.vectors.adjoint());
}

// Exact evolution under a constant Hamiltonian for a time dt:
// rho' = U rho U^dagger with U = exp(-i H dt), re-symmetrized.
inline DensityMatrix evolve(const DensityMatrix& rho, const ComplexMatrix& h, double dt) {
  detail::require(h.rows() == rho.dim() && h.cols() == rho.dim(),
                  "Hamiltonian dimension does not match the state");
  const Unitary u = hermitian_exp(h, dt);
  const ComplexMatrix next = u.matrix() * rho.matrix() * u.matrix().adjoint();
  return DensityMatrix(ComplexMatrix(0.5 * (next + next.adjoint())));
}

// Uhlmann root fidelity Tr sqrt(sqrt(target) rho sqrt(target)), computed as the
// trace norm of sqrt(target) sqrt(rho). Clamped to [0, 1].
inline double fidelity(const DensityMatrix& target, const DensityMatrix& rho) {
  detail::require(target.dim() == rho.dim(), "fidelity of states with different dimensions");
  const ComplexMatrix product = psd_sqrt(target.matrix()) * psd_sqrt(rho.matrix());
  Eigen::JacobiSVD<ComplexMatrix> svd(product);
  return std::clamp(svd.singularValues().sum(), 0.0, 1.0);
}

}  // namespace aqsp
