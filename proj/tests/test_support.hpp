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

// Random instances and independent reference computations shared by tests.

#pragma once

#include <cmath>
#include <complex>
#include <algorithm>
#include <random>
#include <vector>

#include "aqsp/mlp.hpp"
#include "aqsp/quantum.hpp"

namespace aqsp::testing {

inline ComplexMatrix random_complex(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  ComplexMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = Complex(g(rng), g(rng));
  return m;
}

inline ComplexMatrix random_hermitian(Eigen::Index dim, std::mt19937_64& rng, double scale = 1.0) {
  const ComplexMatrix a = random_complex(dim, dim, rng);
  return scale * 0.5 * (a + a.adjoint());
}

inline PureState random_pure(Eigen::Index dim, std::mt19937_64& rng) {
  ComplexVector v = random_complex(dim, 1, rng).col(0);
  v /= v.norm();
  return PureState(v);
}

// Ginibre ensemble: G G^dagger / Tr, full rank almost surely.
inline DensityMatrix random_mixed(Eigen::Index dim, std::mt19937_64& rng) {
  const ComplexMatrix g = random_complex(dim, dim, rng);
  ComplexMatrix rho = g * g.adjoint();
  rho /= rho.trace().real();
  return DensityMatrix(ComplexMatrix(0.5 * (rho + rho.adjoint())));
}

// exp(-i H t) by scaling and squaring of a truncated Taylor series.
inline ComplexMatrix taylor_exp(const ComplexMatrix& h, double t) {
  const Eigen::Index n = h.rows();
  const double norm = std::max(1.0, (h * t).cwiseAbs().rowwise().sum().maxCoeff());
  int squarings = 0;
  while (std::ldexp(norm, -squarings) > 0.25) ++squarings;
  const ComplexMatrix a = Complex(0.0, -t) * std::ldexp(1.0, -squarings) * h;
  ComplexMatrix sum = ComplexMatrix::Identity(n, n);
  ComplexMatrix term = ComplexMatrix::Identity(n, n);
  for (int k = 1; k <= 30; ++k) {
    term = term * a / static_cast<double>(k);
    sum += term;
  }
  for (int s = 0; s < squarings; ++s) sum = sum * sum;
  return sum;
}

// Integrates d rho / dt = -i [H, rho] with classical RK4.
inline ComplexMatrix rk4_evolve(const ComplexMatrix& rho0, const ComplexMatrix& h, double t, int steps) {
  const Complex mi(0.0, -1.0);
  auto f = [&](const ComplexMatrix& r) -> ComplexMatrix { return mi * (h * r - r * h); };
  ComplexMatrix r = rho0;
  const double dt = t / steps;
  for (int k = 0; k < steps; ++k) {
    const ComplexMatrix k1 = f(r);
    const ComplexMatrix k2 = f(r + 0.5 * dt * k1);
    const ComplexMatrix k3 = f(r + 0.5 * dt * k2);
    const ComplexMatrix k4 = f(r + dt * k3);
    r += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return r;
}

// Forward Euler; first-order, needs many steps.
inline ComplexMatrix euler_evolve(const ComplexMatrix& rho0, const ComplexMatrix& h, double t, int steps) {
  const Complex mi(0.0, -1.0);
  ComplexMatrix r = rho0;
  const double dt = t / steps;
  for (int k = 0; k < steps; ++k) r += dt * (mi * (h * r - r * h));
  return r;
}

// Uhlmann fidelity straight from the definition, via a generic
// (non-Hermitian) eigensolver for every square root.
inline double reference_fidelity(const ComplexMatrix& a, const ComplexMatrix& b) {
  auto msqrt = [](const ComplexMatrix& m) {
    Eigen::ComplexEigenSolver<ComplexMatrix> es(m);
    ComplexVector r = es.eigenvalues();
    for (Eigen::Index i = 0; i < r.size(); ++i) r(i) = std::sqrt(Complex(std::max(r(i).real(), 0.0), 0.0));
    return ComplexMatrix(es.eigenvectors() * r.asDiagonal() * es.eigenvectors().inverse());
  };
  const ComplexMatrix sa = msqrt(a);
  const ComplexMatrix inner = sa * b * sa;
  return msqrt(0.5 * (inner + inner.adjoint())).trace().real();
}

inline double max_abs_diff(const ComplexMatrix& a, const ComplexMatrix& b) { return (a - b).cwiseAbs().maxCoeff(); }

// Central differences of the same loss, evaluated through forward_batch only.
inline double batch_loss(const MlpNetwork& net, const Eigen::MatrixXd& x, const std::vector<int>& a,
                  const std::vector<double>& y) {
  const Eigen::MatrixXd q = net.forward_batch(x);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < x.cols(); ++i) {
    const double d = q(a[static_cast<std::size_t>(i)], i) - y[static_cast<std::size_t>(i)];
    loss += d * d;
  }
  return loss / static_cast<double>(x.cols());
}

// Denominator floor: gradients below ~1e-6 are compared on an absolute scale.
inline constexpr double kFdFloor = 1e-6;
inline double max_relative_fd_error(MlpNetwork net, const Eigen::MatrixXd& x, const std::vector<int>& a,
                             const std::vector<double>& y) {
  const LossAndGradients lg = loss_and_gradients(net, x, a, y);
  const double h = 1e-5;
  double worst = 0.0;
  auto check = [&](double& param, double analytic) {
    const double keep = param;
    param = keep + h;
    const double up = batch_loss(net, x, a, y);
    param = keep - h;
    const double down = batch_loss(net, x, a, y);
    param = keep;
    const double numeric = (up - down) / (2 * h);
    const double err = std::abs(numeric - analytic) / std::max({std::abs(numeric), std::abs(analytic), kFdFloor});
    worst = std::max(worst, err);
  };
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    for (Eigen::Index r = 0; r < net.weights(l).rows(); ++r)
      for (Eigen::Index c = 0; c < net.weights(l).cols(); ++c) check(net.weights(l)(r, c), lg.gradients.weights[l](r, c));
    for (Eigen::Index r = 0; r < net.bias(l).size(); ++r) check(net.bias(l)(r), lg.gradients.biases[l](r));
  }
  return worst;
}

// Zero-initialized biases can leave pre-activations exactly on a ReLU kink, where
// central differences are meaningless; small random biases give a generic point.
inline void randomize_biases(MlpNetwork& net, std::mt19937_64& rng, double scale = 0.1) {
  std::normal_distribution<double> g(0.0, scale);
  for (std::size_t l = 0; l < net.num_layers(); ++l)
    for (Eigen::Index i = 0; i < net.bias(l).size(); ++i) net.bias(l)(i) = g(rng);
}

struct Batch {
  Eigen::MatrixXd x;
  std::vector<int> a;
  std::vector<double> y;
};

inline Batch random_batch(int in, int out, int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_int_distribution<int> pick(0, out - 1);
  Batch b{Eigen::MatrixXd(in, n), std::vector<int>(n), std::vector<double>(n)};
  for (int i = 0; i < n; ++i) {
    for (int r = 0; r < in; ++r) b.x(r, i) = g(rng);
    b.a[i] = pick(rng);
    b.y[i] = g(rng);
  }
  return b;
}

}  // namespace aqsp::testing
