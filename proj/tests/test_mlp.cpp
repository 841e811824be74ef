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

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "aqsp/mlp.hpp"
#include "test_support.hpp"

namespace aqsp {
namespace {

using testing::Batch;
using testing::max_relative_fd_error;
using testing::random_batch;

TEST(Init, ParameterCountAndZeroBiases) {
  std::mt19937_64 rng(1);
  const MlpNetwork net = MlpNetwork::init({8, 64, 64, 5}, rng);
  EXPECT_EQ(net.parameter_count(), 8u * 64 + 64 + 64 * 64 + 64 + 64 * 5 + 5);
  EXPECT_EQ(net.parameter_count(), 5061u);
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    EXPECT_EQ(net.bias(l).cwiseAbs().maxCoeff(), 0.0);
    const double bound = 1.0 / std::sqrt(static_cast<double>(net.weights(l).cols()));
    EXPECT_LE(net.weights(l).cwiseAbs().maxCoeff(), bound);
  }
}

TEST(Init, DeterministicPerSeed) {
  std::mt19937_64 a(7), b(7), c(8);
  const MlpNetwork na = MlpNetwork::init({32, 128, 128, 64, 36}, a);
  EXPECT_TRUE(na == MlpNetwork::init({32, 128, 128, 64, 36}, b));
  EXPECT_FALSE(na == MlpNetwork::init({32, 128, 128, 64, 36}, c));
}

TEST(Init, RejectsBadSizes) {
  EXPECT_THROW(MlpNetwork({4}), PreconditionError);
  EXPECT_THROW(MlpNetwork({4, 0, 2}), PreconditionError);
}

TEST(Forward, ZeroNetworkGivesZero) {
  const MlpNetwork net({3, 4, 2});
  const std::vector<double> x = {1.0, -2.0, 3.0};
  EXPECT_EQ(net.forward(x).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Forward, IdentityLinearLayer) {
  MlpNetwork net({3, 3});
  net.weights(0).setIdentity();
  const std::vector<double> x = {1.5, -2.0, 0.25};
  const Eigen::VectorXd y = net.forward(x);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(y(i), x[static_cast<std::size_t>(i)]);
}

TEST(Forward, HandBuiltTwoTwoOne) {
  MlpNetwork net({2, 2, 1});
  net.weights(0) << 1.0, -1.0, 0.5, 2.0;
  net.bias(0) << 0.0, -1.0;
  net.weights(1) << 3.0, -1.0;
  net.bias(1) << 0.5;
  // x = (1, 2): hidden pre = (-1, 3.5), relu = (0, 3.5), out = 0 - 3.5 + 0.5
  const std::vector<double> x = {1.0, 2.0};
  EXPECT_DOUBLE_EQ(net.forward(x)(0), -3.0);
  // x = (3, 1): hidden pre = (2, 2.5), out = 6 - 2.5 + 0.5
  const std::vector<double> x2 = {3.0, 1.0};
  EXPECT_DOUBLE_EQ(net.forward(x2)(0), 4.0);
}

TEST(Forward, RejectsWrongInputLength) {
  const MlpNetwork net({3, 2});
  const std::vector<double> x = {1.0, 2.0};
  EXPECT_THROW(net.forward(x), PreconditionError);
}

TEST(Gradients, ExactFitGivesZero) {
  std::mt19937_64 rng(2);
  const MlpNetwork net = MlpNetwork::init({4, 6, 3}, rng);
  Batch b = random_batch(4, 3, 5, rng);
  const Eigen::MatrixXd q = net.forward_batch(b.x);
  for (int i = 0; i < 5; ++i) b.y[i] = q(b.a[i], i);
  const LossAndGradients lg = loss_and_gradients(net, b.x, b.a, b.y);
  EXPECT_EQ(lg.loss, 0.0);
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    EXPECT_EQ(lg.gradients.weights[l].cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(lg.gradients.biases[l].cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(Gradients, HandDifferentiatedLinearUnit) {
  MlpNetwork net({1, 1});
  net.weights(0)(0, 0) = 1.0;
  Eigen::MatrixXd x(1, 1);
  x << 2.0;
  const std::vector<int> a = {0};
  const std::vector<double> y = {0.0};
  const LossAndGradients lg = loss_and_gradients(net, x, a, y);
  EXPECT_DOUBLE_EQ(lg.loss, 4.0);
  EXPECT_DOUBLE_EQ(lg.gradients.weights[0](0, 0), 8.0);  // -2 (y - q) s
  EXPECT_DOUBLE_EQ(lg.gradients.biases[0](0), 4.0);
}

TEST(Gradients, MatchCentralFiniteDifferences) {
  std::mt19937_64 rng(3);
  const std::vector<std::vector<int>> shapes = {{8, 16, 5}, {8, 64, 64, 5}, {4, 7, 9, 3}, {32, 20, 12, 36}, {3, 5, 2}};
  for (const auto& shape : shapes) {
    MlpNetwork net = MlpNetwork::init(shape, rng);
    testing::randomize_biases(net, rng);
    const Batch b = random_batch(shape.front(), shape.back(), 16, rng);
    EXPECT_LT(max_relative_fd_error(net, b.x, b.a, b.y), 1e-5);
  }
}

TEST(Gradients, RejectsInconsistentBatch) {
  const MlpNetwork net({2, 3});
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(2, 2);
  const std::vector<int> a = {0};
  const std::vector<double> y = {0.0, 1.0};
  EXPECT_THROW(loss_and_gradients(net, x, a, y), PreconditionError);
  const std::vector<int> bad = {0, 3};
  EXPECT_THROW(loss_and_gradients(net, x, bad, y), PreconditionError);
}

TEST(Sgd, UpdateArithmetic) {
  MlpNetwork net({1, 1});
  net.weights(0)(0, 0) = 1.0;
  GradientSet g{{Eigen::MatrixXd::Constant(1, 1, 2.0)}, {Eigen::VectorXd::Zero(1)}};
  apply_gradients(net, g, {0.1, 1});
  EXPECT_DOUBLE_EQ(net.weights(0)(0, 0), 0.8);
}

TEST(Sgd, ZeroGradientOrRateLeavesParameters) {
  std::mt19937_64 rng(4);
  MlpNetwork net = MlpNetwork::init({3, 4, 2}, rng);
  const MlpNetwork before = net;
  const Batch b = random_batch(3, 2, 4, rng);
  const GradientSet g = loss_and_gradients(net, b.x, b.a, b.y).gradients;
  apply_gradients(net, g, {0.0, 4});
  EXPECT_TRUE(net == before);
  GradientSet zero = g;
  for (auto& w : zero.weights) w.setZero();
  for (auto& v : zero.biases) v.setZero();
  apply_gradients(net, zero, {0.5, 4});
  EXPECT_TRUE(net == before);
}

TEST(Sgd, RejectsShapeMismatch) {
  MlpNetwork net({2, 3});
  GradientSet g{{Eigen::MatrixXd::Zero(2, 2)}, {Eigen::VectorXd::Zero(3)}};
  EXPECT_THROW(apply_gradients(net, g, {0.1, 1}), PreconditionError);
}

TEST(Sgd, FitsSmallRegression) {
  std::mt19937_64 rng(5);
  MlpNetwork net = MlpNetwork::init({2, 8, 1}, rng);
  Eigen::MatrixXd x(2, 4);
  x << 0, 0, 1, 1, 0, 1, 0, 1;
  const std::vector<int> a = {0, 0, 0, 0};
  const std::vector<double> y = {0.1, 0.4, 0.6, 0.9};
  double loss = 1.0;
  for (int k = 0; k < 10000 && loss >= 1e-3; ++k) {
    const LossAndGradients lg = loss_and_gradients(net, x, a, y);
    loss = lg.loss;
    apply_gradients(net, lg.gradients, {0.05, 4});
  }
  EXPECT_LT(loss, 1e-3);
}

TEST(Sgd, DeterministicTrajectory) {
  auto run = [] {
    std::mt19937_64 rng(6);
    MlpNetwork net = MlpNetwork::init({3, 5, 2}, rng);
    for (int k = 0; k < 50; ++k) {
      const Batch b = random_batch(3, 2, 8, rng);
      apply_gradients(net, loss_and_gradients(net, b.x, b.a, b.y).gradients, {0.01, 8});
    }
    return net;
  };
  EXPECT_TRUE(run() == run());
}

TEST(Adam, FirstStepMovesByLearningRateAgainstGradientSign) {
  MlpNetwork net({1, 2});
  AdamOptimizer opt(0.01);
  GradientSet g{{Eigen::MatrixXd(2, 1)}, {Eigen::VectorXd(2)}};
  g.weights[0] << 3.0, -0.5;
  g.biases[0] << 0.0, 1e-3;
  opt.update(net, g);
  // Bias-corrected first step: m/sqrt(v) = sign(g), so |delta| = lr (up to eps).
  EXPECT_NEAR(net.weights(0)(0, 0), -0.01, 1e-9);
  EXPECT_NEAR(net.weights(0)(1, 0), 0.01, 1e-9);
  EXPECT_EQ(net.bias(0)(0), 0.0);
  EXPECT_NEAR(net.bias(0)(1), -0.01, 1e-7);
  EXPECT_EQ(opt.steps(), 1);
  opt.reset();
  EXPECT_EQ(opt.steps(), 0);
}

TEST(Adam, MatchesScalarRecurrence) {
  MlpNetwork net({1, 1});
  AdamOptimizer opt(0.1, 0.9, 0.999, 1e-8);
  double w = 0.0, m = 0.0, v = 0.0;
  const double grads[] = {1.0, -2.0, 0.5, 4.0};
  for (int t = 1; t <= 4; ++t) {
    const double gr = grads[t - 1];
    GradientSet g{{Eigen::MatrixXd::Constant(1, 1, gr)}, {Eigen::VectorXd::Zero(1)}};
    opt.update(net, g);
    m = 0.9 * m + 0.1 * gr;
    v = 0.999 * v + 0.001 * gr * gr;
    w -= 0.1 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
    EXPECT_NEAR(net.weights(0)(0, 0), w, 1e-14);
  }
}

TEST(CopyParameters, DeepCopySemantics) {
  std::mt19937_64 rng(8);
  MlpNetwork src = MlpNetwork::init({4, 6, 3}, rng);
  MlpNetwork dst({4, 6, 3});
  copy_parameters(src, dst);
  const std::vector<double> x = {0.1, 0.2, -0.3, 0.4};
  EXPECT_EQ(src.forward(x), dst.forward(x));
  const MlpNetwork snapshot = src;
  src.weights(0)(0, 0) += 1.0;
  EXPECT_TRUE(dst == snapshot);
  copy_parameters(dst, src);
  EXPECT_TRUE(src == snapshot);
  MlpNetwork other({4, 5, 3});
  EXPECT_THROW(copy_parameters(src, other), PreconditionError);
}

TEST(Serialization, RoundTripIsBitExact) {
  std::mt19937_64 rng(9);
  const MlpNetwork net = MlpNetwork::init({8, 64, 64, 5}, rng);
  const MlpNetwork back = mlp_from_json(nlohmann::json::parse(to_json(net).dump()));
  EXPECT_TRUE(back == net);
}

TEST(Serialization, RejectsMalformed) {
  std::mt19937_64 rng(10);
  nlohmann::json j = to_json(MlpNetwork::init({2, 3, 1}, rng));
  nlohmann::json wrong_version = j;
  wrong_version["version"] = 99;
  EXPECT_THROW(mlp_from_json(wrong_version), DataError);
  nlohmann::json short_layer = j;
  short_layer["layers"][0]["weights"].erase(0);
  EXPECT_THROW(mlp_from_json(short_layer), DataError);
  EXPECT_THROW(mlp_from_json(nlohmann::json::object()), DataError);
}

}  // namespace
}  // namespace aqsp
