#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "nuig/builtin_models.hpp"
#include "nuig/finite_difference.hpp"
#include "test_support.hpp"

namespace nuig {
namespace {

using testing::logistic;

TEST(Forward, LogisticScalarAtOriginIsHalf) {
  const LogisticScalar m({2}, {1.0, -1.0}, 0.0, 1.0);
  EXPECT_DOUBLE_EQ(m.forward(Tensor::vector({0.0, 0.0}), {0}), 0.5);
}

TEST(Forward, ZeroWeightMlpIsUniformOverClasses) {
  for (std::size_t classes : {2u, 3u, 7u}) {
    const std::size_t d = 4, h = 5;
    const MLP2 m({d}, h, classes, std::vector<double>(h * d, 0.0), std::vector<double>(h, 0.0),
                 std::vector<double>(classes * h, 0.0), std::vector<double>(classes, 0.0));
    std::mt19937_64 rng(classes);
    const Tensor x = testing::random_tensor(rng, {d}, -3.0, 3.0);
    for (std::size_t c = 0; c < classes; ++c) {
      EXPECT_NEAR(m.forward(x, {c}), 1.0 / static_cast<double>(classes), 1e-15);
    }
  }
}

TEST(Forward, SharpSigmoidIsHalfAtThreshold) {
  const SharpSigmoid1D m(50.0, 0.9);
  EXPECT_DOUBLE_EQ(m.forward(Tensor::vector({0.9}), {0}), 0.5);
}

TEST(Forward, ShapeAndTargetErrors) {
  const LogisticScalar m({2}, {1.0, -1.0}, 0.0, 1.0);
  try {
    m.forward(Tensor::vector({1.0, 2.0, 3.0}), {0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::shape);
  }
  try {
    m.forward(Tensor::vector({1.0, 2.0}), {1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::target);
  }
}

TEST(Forward, InconsistentWeightShapesAreRejected) {
  EXPECT_THROW(LinearSoftmax({3}, 2, std::vector<double>(5, 0.0), {0.0, 0.0}), Error);
  EXPECT_THROW(LogisticScalar({3}, {1.0}, 0.0, 1.0), Error);
  EXPECT_THROW(MLP2({2}, 3, 2, std::vector<double>(6), std::vector<double>(3), std::vector<double>(5),
                    std::vector<double>(2)),
               Error);
}

TEST(Gradient, SingleClassSoftmaxHasZeroGradient) {
  std::mt19937_64 rng(1);
  const LinearSoftmax m = testing::random_linear(rng, {4}, 1);
  const Tensor x = testing::random_tensor(rng, {4});
  EXPECT_DOUBLE_EQ(m.forward(x, {0}), 1.0);
  const Tensor g = m.grad(x, {0});
  for (double v : g.values()) EXPECT_EQ(v, 0.0);
}

TEST(Gradient, LogisticScalarAtOrigin) {
  const LogisticScalar m({2}, {1.0, -1.0}, 0.0, 1.0);
  const Tensor g = m.grad(Tensor::vector({0.0, 0.0}), {0});
  EXPECT_DOUBLE_EQ(g[0], 0.25);
  EXPECT_DOUBLE_EQ(g[1], -0.25);
}

TEST(FiniteDifference, MatchesAnalyticSigmoidDerivative) {
  const LogisticScalar m({2}, {1.0, -1.0}, 0.0, 1.0);
  const Tensor fd = finite_difference_gradient(m, Tensor::vector({0.0, 0.0}), {0}, 1e-5);
  EXPECT_NEAR(fd[0], 0.25, 1e-8);
  EXPECT_NEAR(fd[1], -0.25, 1e-8);
}

TEST(FiniteDifference, ConstantModelGivesZero) {
  const AffineProbability m({3}, {0.0, 0.0, 0.0}, 0.4);
  const Tensor fd = finite_difference_gradient(m, Tensor::vector({0.1, 0.2, 0.3}), {0}, 1e-5);
  for (double v : fd.values()) EXPECT_EQ(v, 0.0);
}

TEST(FiniteDifference, SharpSigmoidFarFromThresholdIsFlat) {
  const SharpSigmoid1D m(50.0, 0.9);
  const double x = 0.1;
  // analytic: g * s * (1 - s) with s = sigmoid(g (x - t))
  const double s = logistic(50.0 * (x - 0.9));
  const double analytic = 50.0 * s * (1.0 - s);
  const Tensor fd = finite_difference_gradient(m, Tensor::vector({x}), {0}, 1e-5);
  EXPECT_LT(analytic, 1e-15);
  EXPECT_NEAR(fd[0], analytic, 1e-12);
}

TEST(FiniteDifference, RejectsNonPositiveStep) {
  const SharpSigmoid1D m(1.0, 0.0);
  EXPECT_THROW(finite_difference_gradient(m, Tensor::vector({0.0}), {0}, 0.0), Error);
}

// Analytic gradient vs central differences over random inputs, every builtin.
struct GradientCase {
  const char* name;
  BuiltinModel model;
  double lo, hi;
};

std::vector<GradientCase> gradient_cases() {
  std::mt19937_64 rng(2024);
  std::vector<GradientCase> cases;
  cases.push_back({"LinearSoftmax", testing::random_linear(rng, {2, 3}, 4), -1.0, 1.0});
  cases.push_back({"LogisticScalar", LogisticScalar({5}, testing::random_values(rng, 5), 0.3, 2.5), -1.0, 1.0});
  cases.push_back({"SharpSigmoid1D", SharpSigmoid1D(50.0, 0.9), 0.6, 1.2});
  cases.push_back({"MLP2", testing::random_mlp(rng, {6}, 8, 3), -1.0, 1.0});
  cases.push_back({"AffineProbability", AffineProbability({4}, {0.05, -0.1, 0.02, 0.08}, 0.5), -1.0, 1.0});
  return cases;
}

TEST(Gradient, MatchesFiniteDifferencesOnRandomInputs) {
  std::mt19937_64 rng(7);
  for (const auto& c : gradient_cases()) {
    const DifferentiableModel& m = as_model(c.model);
    for (int trial = 0; trial < 100; ++trial) {
      const Tensor x = testing::random_tensor(rng, m.input_shape(), c.lo, c.hi);
      for (std::size_t cls = 0; cls < m.num_classes(); ++cls) {
        const Tensor g = m.grad(x, {cls});
        const Tensor fd = finite_difference_gradient(m, x, {cls}, 1e-5);
        for (std::size_t i = 0; i < g.size(); ++i) {
          EXPECT_LE(std::abs(g[i] - fd[i]), std::max(1e-5 * std::abs(g[i]), 1e-8))
              << c.name << " trial " << trial << " class " << cls << " feature " << i;
        }
      }
    }
  }
}

TEST(Batching, BatchEqualsSingleCallsBitwise) {
  std::mt19937_64 rng(11);
  for (const auto& c : gradient_cases()) {
    const DifferentiableModel& m = as_model(c.model);
    std::vector<Tensor> batch;
    for (int i = 0; i < 9; ++i) batch.push_back(testing::random_tensor(rng, m.input_shape(), c.lo, c.hi));
    const auto f = m.forward_batch(batch, {0});
    const auto g = m.grad_batch(batch, {0});
    ASSERT_EQ(f.size(), batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      EXPECT_EQ(std::bit_cast<std::uint64_t>(f[i]), std::bit_cast<std::uint64_t>(m.forward(batch[i], {0}))) << c.name;
      EXPECT_TRUE(bitwise_equal(g[i], m.grad(batch[i], {0}))) << c.name;
      EXPECT_EQ(g[i].shape(), m.input_shape());
      EXPECT_GE(f[i], 0.0);
      EXPECT_LE(f[i], 1.0);
    }
    // purity: repeated calls agree bit for bit
    const auto f2 = m.forward_batch(batch, {0});
    for (std::size_t i = 0; i < batch.size(); ++i) {
      EXPECT_EQ(std::bit_cast<std::uint64_t>(f[i]), std::bit_cast<std::uint64_t>(f2[i]));
    }
  }
}

TEST(Output, LogitModeDifferentiatesRawScore) {
  std::mt19937_64 rng(5);
  const LinearSoftmax prob = testing::random_linear(rng, {3}, 2);
  const LinearSoftmax logit({3}, 2, std::vector<double>(prob.weights().begin(), prob.weights().end()),
                            std::vector<double>(prob.bias().begin(), prob.bias().end()), OutputKind::logit);
  const Tensor x = Tensor::vector({0.2, -0.4, 0.9});
  const Tensor g = logit.grad(x, {1});
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(g[i], prob.weights()[3 + i]);
  const Tensor fd = finite_difference_gradient(logit, x, {1}, 1e-5);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(fd[i], g[i], 1e-8);
}

TEST(AffineProbability, LeavingUnitRangeIsAnError) {
  const AffineProbability m({1}, {1.0}, 0.0);
  EXPECT_THROW(m.forward(Tensor::vector({1.5}), {0}), Error);
  EXPECT_THROW(m.grad(Tensor::vector({-0.5}), {0}), Error);
}

}  // namespace
}  // namespace nuig
