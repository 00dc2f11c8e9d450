// Copyright 2026 The icpx Authors.
// SPDX-License-Identifier: Apache-2.0

#include "icpx/kernel_shap.hpp"

#include <gtest/gtest.h>

#include <Eigen/QR>
#include <random>

#include "icpx/random.hpp"

namespace icpx {
namespace {

constexpr PerturbationSetting kUnitX{1.0, 2.0, 1.0};

// Lifts a function of the coalition bits onto settings for x = kUnitX,
// r = reference, so z_j = 1 exactly when component j sits at x.
UncertaintyFunction on_coalition(std::function<double(int, int, int)> g) {
  return [g](const PerturbationSetting& s) {
    return g(s.noise_sigma == 1.0, s.pose_scale == 2.0, s.overlap_reduction == 1.0);
  };
}

TEST(ShapleyKernelWeight, ThreeFeatureValues) {
  EXPECT_EQ(shapley_kernel_weight(3, 1), (KernelWeight{false, 1, 3}));
  EXPECT_EQ(shapley_kernel_weight(3, 2), (KernelWeight{false, 1, 3}));
  EXPECT_TRUE(shapley_kernel_weight(3, 0).infinite);
  EXPECT_TRUE(shapley_kernel_weight(3, 3).infinite);
  EXPECT_EQ(shapley_kernel_weight(3, 0).value(), std::numeric_limits<double>::infinity());
}

TEST(ShapleyKernelWeight, MatchesFormulaForLargerM) {
  // (M-1) / (C(M,k) k (M-k)) for M = 20, k = 10: 19 / (184756 * 100),
  // and 184756 = 19 * 9724.
  KernelWeight w = shapley_kernel_weight(20, 10);
  EXPECT_FALSE(w.infinite);
  EXPECT_EQ(w.numerator, 1);
  EXPECT_EQ(w.denominator, 972400);
  EXPECT_THROW(shapley_kernel_weight(3, 4), PreconditionViolation);
}

TEST(EnumerateCoalitions, SmallSizes) {
  auto one = enumerate_coalitions(1);
  ASSERT_EQ(one.size(), 2u);
  EXPECT_EQ(one[0].to_string(), "0");
  EXPECT_EQ(one[1].to_string(), "1");
  auto three = enumerate_coalitions(3);
  ASSERT_EQ(three.size(), 8u);
  EXPECT_EQ(three.front().to_string(), "000");
  EXPECT_EQ(three[4].to_string(), "100");
  EXPECT_EQ(three.back().to_string(), "111");
  EXPECT_TRUE(three[4][0]);
  EXPECT_FALSE(three[4][2]);
  EXPECT_THROW(enumerate_coalitions(0), PreconditionViolation);
  EXPECT_THROW(enumerate_coalitions(21), PreconditionViolation);
}

TEST(MapCoalition, Examples) {
  const PerturbationSetting x{0.05, 1.5, 0.05};
  EXPECT_EQ(map_coalition(Coalition(3, 0b000), x, kReferenceSetting), kReferenceSetting);
  EXPECT_EQ(map_coalition(Coalition(3, 0b111), x, kReferenceSetting), x);
  EXPECT_EQ(map_coalition(Coalition(3, 0b100), {0.09, 1.1, 0.09}, kReferenceSetting),
            (PerturbationSetting{0.09, 1.0, 0.0}));
  std::vector<double> xs{1, 2}, rs{3, 4, 5};
  EXPECT_THROW(map_coalition(Coalition(2, 1), xs, rs), PreconditionViolation);
}

TEST(WeightedLinearRegression, SingleFeatureInterpolates) {
  Eigen::MatrixXd z(2, 1);
  z << 0, 1;
  Eigen::VectorXd y(2);
  y << 0, 5;
  for (double w : {1e-3, 1.0, 1e3}) {
    Eigen::VectorXd phi = weighted_linear_regression(z, Eigen::Vector2d(w, 2 * w), y);
    EXPECT_NEAR(phi(0), 5.0, 1e-12);
  }
}

TEST(WeightedLinearRegression, ExactlyLinearTargets) {
  Rng rng(3);
  std::uniform_real_distribution<double> u(0.1, 2.0);
  Eigen::MatrixXd z(6, 3);
  z << 1, 0, 0, 0, 1, 0, 0, 0, 1, 1, 1, 0, 1, 0, 1, 0, 1, 1;
  Eigen::Vector3d beta(1.5, -2.0, 0.25);
  Eigen::VectorXd w(6);
  for (int i = 0; i < 6; ++i) w(i) = u(rng);
  Eigen::VectorXd phi = weighted_linear_regression(z, w, z * beta);
  EXPECT_LT((phi - beta).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(WeightedLinearRegression, MatchesQrOnScaledRows) {
  Rng rng(4);
  std::normal_distribution<double> n;
  std::uniform_real_distribution<double> u(0.1, 3.0);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::MatrixXd z(12, 4);
    Eigen::VectorXd w(12), y(12);
    for (int i = 0; i < 12; ++i) {
      for (int j = 0; j < 4; ++j) z(i, j) = n(rng);
      w(i) = u(rng);
      y(i) = n(rng);
    }
    Eigen::VectorXd sw = w.cwiseSqrt();
    Eigen::VectorXd oracle = (sw.asDiagonal() * z).colPivHouseholderQr().solve(sw.asDiagonal() * y);
    EXPECT_LT((weighted_linear_regression(z, w, y) - oracle).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(WeightedLinearRegression, SingularDesignThrows) {
  Eigen::MatrixXd z(3, 2);
  z << 1, 1, 0, 0, 1, 1;
  EXPECT_THROW(weighted_linear_regression(z, Eigen::Vector3d::Ones(), Eigen::Vector3d(1, 2, 3)), SingularDesign);
  EXPECT_THROW(weighted_linear_regression(z, Eigen::Vector3d(1, 0, 1), Eigen::Vector3d(1, 2, 3)),
               PreconditionViolation);
}

TEST(Explain, AdditiveFunction) {
  auto f = on_coalition([](int sn, int, int po) { return 3.0 * sn + 5.0 * po; });
  ShapExplanation e = explain(f, kUnitX);
  EXPECT_NEAR(e.phi[0], 3.0, 1e-12);
  EXPECT_NEAR(e.phi[1], 0.0, 1e-12);
  EXPECT_NEAR(e.phi[2], 5.0, 1e-12);
  auto bf = brute_force_shapley(f, kUnitX);
  EXPECT_NEAR(bf[0], 3.0, 1e-15);
  EXPECT_NEAR(bf[1], 0.0, 1e-15);
  EXPECT_NEAR(bf[2], 5.0, 1e-15);
}

TEST(Explain, ConstantFunctionGivesZeros) {
  ShapExplanation e = explain([](const PerturbationSetting&) { return 4.2; }, kUnitX);
  for (double phi : e.phi) EXPECT_NEAR(phi, 0.0, 1e-12);
  EXPECT_EQ(e.f_empty, 4.2);
  EXPECT_EQ(e.f_full, 4.2);
}

TEST(Explain, PureInteractionSplitsEqually) {
  auto f = on_coalition([](int sn, int ip, int) { return double(sn * ip); });
  ShapExplanation e = explain(f, kUnitX);
  EXPECT_NEAR(e.phi[0], 0.5, 1e-12);
  EXPECT_NEAR(e.phi[1], 0.5, 1e-12);
  EXPECT_NEAR(e.phi[2], 0.0, 1e-12);
}

TEST(Explain, EvaluatesCoalitionsAtMappedSettings) {
  std::vector<PerturbationSetting> seen;
  explain(
      [&](const PerturbationSetting& s) {
        seen.push_back(s);
        return 0.0;
      },
      {0.05, 1.5, 0.05});
  ASSERT_EQ(seen.size(), 8u);
  EXPECT_EQ(seen.front(), kReferenceSetting);
  EXPECT_EQ(seen[1], (PerturbationSetting{0.0, 1.0, 0.05}));
  EXPECT_EQ(seen.back(), (PerturbationSetting{0.05, 1.5, 0.05}));
}

TEST(Explain, MatchesBruteForceOnRandomFunctions) {
  Rng rng(20260);
  std::uniform_real_distribution<double> u(-100.0, 100.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::array<double, 8> table;
    for (double& v : table) v = u(rng);
    auto f = on_coalition([&](int a, int b, int c) { return table[a * 4 + b * 2 + c]; });
    ShapExplanation e = explain(f, kUnitX);
    auto oracle = brute_force_shapley(f, kUnitX);
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(e.phi[j], oracle[j], 1e-9) << trial;
    EXPECT_LT(e.local_accuracy_error(), 1e-9);
    EXPECT_EQ(e.coalition_values, table);
  }
}

TEST(KernelShapValues, MatchesBruteForceForLargerM) {
  Rng rng(31);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int m : {1, 2, 4, 6}) {
    std::vector<double> values(std::size_t{1} << m);
    for (double& v : values) v = u(rng);
    CoalitionShap s = kernel_shap_values(m, values);
    Eigen::VectorXd oracle = brute_force_shapley_values(m, values);
    EXPECT_LT((s.phi - oracle).cwiseAbs().maxCoeff(), 1e-9) << m;
  }
  std::vector<double> wrong(7, 0.0);
  EXPECT_THROW(kernel_shap_values(3, wrong), PreconditionViolation);
}

TEST(Axioms, MissingnessSymmetryAndScaling) {
  Rng rng(41);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int trial = 0; trial < 50; ++trial) {
    double a = u(rng), b = u(rng), c = u(rng);
    // ip never matters; sn and po enter symmetrically.
    auto g = [&](int sn, int, int po) { return a * (sn + po) + b * sn * po + c; };
    ShapExplanation e = explain(on_coalition(g), kUnitX);
    EXPECT_NEAR(e.phi[1], 0.0, 1e-9);
    EXPECT_NEAR(e.phi[0], e.phi[2], 1e-9);
    double k = u(rng);
    ShapExplanation scaled =
        explain(on_coalition([&](int x, int y, int z) { return k * g(x, y, z); }), kUnitX);
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(scaled.phi[j], k * e.phi[j], 1e-9);
  }
}

TEST(Axioms, LocalAccuracyAtLargeMagnitude) {
  Rng rng(42);
  std::uniform_real_distribution<double> u(0.0, 1e5);
  std::array<double, 8> table;
  for (double& v : table) v = u(rng);
  ShapExplanation e = explain(on_coalition([&](int a, int b, int c) { return table[a * 4 + b * 2 + c]; }), kUnitX);
  EXPECT_LT(e.local_accuracy_error(), 1e-12);
}

TEST(LargeWeightPolicy, ApproachesConstrainedSolution) {
  Rng rng(51);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> values(8);
  for (double& v : values) v = u(rng);
  ShapOptions options;
  options.policy = InfiniteWeightPolicy::kLargeWeight;
  options.large_weight = 1e6;
  CoalitionShap approx = kernel_shap_values(3, values, options);
  Eigen::VectorXd exact = brute_force_shapley_values(3, values);
  EXPECT_LT((approx.phi - exact).cwiseAbs().maxCoeff(), 1e-5);
  EXPECT_GT((approx.phi - exact).cwiseAbs().maxCoeff(), 0.0);
}

}  // namespace
}  // namespace icpx
