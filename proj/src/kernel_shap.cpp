// Copyright 2026 The icpx Authors.
// SPDX-License-Identifier: Apache-2.0

#include "icpx/kernel_shap.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <bit>
#include <cmath>
#include <numeric>

#include "icpx/errors.hpp"

namespace icpx {

Coalition::Coalition(int size, std::uint32_t mask) : size_(size), mask_(mask) {
  require(size >= 1 && size <= kMaxFeatures, "Coalition: size must lie in [1, 20]");
  require(mask < (1U << size), "Coalition: mask has bits beyond size");
}

int Coalition::count() const { return std::popcount(mask_); }

std::string Coalition::to_string() const {
  std::string s;
  for (int j = 0; j < size_; ++j) s += (*this)[j] ? '1' : '0';
  return s;
}

std::vector<Coalition> enumerate_coalitions(int m) {
  require(m >= 1 && m <= kMaxFeatures, "enumerate_coalitions: M must lie in [1, 20]");
  std::vector<Coalition> out;
  out.reserve(std::size_t{1} << m);
  for (std::uint32_t mask = 0; mask < (1U << m); ++mask) out.emplace_back(m, mask);
  return out;
}

std::vector<double> map_coalition(const Coalition& z, std::span<const double> x,
                                  std::span<const double> r) {
  require(x.size() == static_cast<std::size_t>(z.size()) && r.size() == x.size(),
          "map_coalition: dimension mismatch");
  std::vector<double> out(x.size());
  for (int j = 0; j < z.size(); ++j) out[j] = z[j] ? x[j] : r[j];
  return out;
}

PerturbationSetting map_coalition(const Coalition& z, const PerturbationSetting& x,
                                  const PerturbationSetting& r) {
  const auto xv = x.values(), rv = r.values();
  auto v = map_coalition(z, xv, rv);
  return PerturbationSetting::from_values({v[0], v[1], v[2]});
}

double KernelWeight::value() const {
  return infinite ? std::numeric_limits<double>::infinity()
                  : static_cast<double>(numerator) / static_cast<double>(denominator);
}

KernelWeight shapley_kernel_weight(int m, int subset_size) {
  require(m >= 1 && m <= kMaxFeatures, "shapley_kernel_weight: M must lie in [1, 20]");
  require(subset_size >= 0 && subset_size <= m, "shapley_kernel_weight: subset size out of range");
  if (subset_size == 0 || subset_size == m) return {true, 0, 0};
  std::int64_t binom = 1;
  for (int i = 1; i <= subset_size; ++i) binom = binom * (m - subset_size + i) / i;
  std::int64_t num = m - 1;
  std::int64_t den = binom * subset_size * (m - subset_size);
  const std::int64_t g = std::gcd(num, den);
  return {false, num / g, den / g};
}

Eigen::VectorXd weighted_linear_regression(const Eigen::MatrixXd& design,
                                           const Eigen::VectorXd& weights,
                                           const Eigen::VectorXd& targets) {
  require(design.rows() == weights.size() && design.rows() == targets.size(),
          "weighted_linear_regression: row count mismatch");
  require((weights.array() > 0.0).all(), "weighted_linear_regression: weights must be positive");
  const Eigen::MatrixXd normal = design.transpose() * weights.asDiagonal() * design;
  const Eigen::VectorXd rhs = design.transpose() * (weights.asDiagonal() * targets);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(normal, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff(), hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo >= 1e12) {
    throw SingularDesign("weighted_linear_regression: normal matrix is singular or ill-conditioned");
  }
  return normal.ldlt().solve(rhs);
}

CoalitionShap kernel_shap_values(int m, std::span<const double> values, const ShapOptions& options) {
  require(m >= 1 && m <= kMaxFeatures, "kernel_shap_values: M must lie in [1, 20]");
  const std::uint32_t full = (1U << m) - 1;
  require(values.size() == std::size_t{full} + 1, "kernel_shap_values: need 2^M coalition values");

  CoalitionShap out;
  out.f_empty = values[0];
  out.f_full = values[full];
  const double total = out.f_full - out.f_empty;
  out.phi = Eigen::VectorXd::Zero(m);

  if (options.policy == InfiniteWeightPolicy::kLargeWeight) {
    // Every non-empty coalition is a row; the empty one is all-zero after
    // centring and contributes nothing.
    Eigen::MatrixXd design(full, m);
    Eigen::VectorXd w(full), y(full);
    for (std::uint32_t mask = 1; mask <= full; ++mask) {
      Coalition z(m, mask);
      for (int j = 0; j < m; ++j) design(mask - 1, j) = z[j];
      auto kw = shapley_kernel_weight(m, z.count());
      w(mask - 1) = kw.infinite ? options.large_weight : kw.value();
      y(mask - 1) = values[mask] - out.f_empty;
    }
    out.phi = weighted_linear_regression(design, w, y);
    return out;
  }

  if (m == 1) {
    out.phi(0) = total;
    return out;
  }
  // phi_last = total - sum_{j<last} phi_j substituted into every finite row.
  const int last = m - 1;
  const auto rows = static_cast<Eigen::Index>(full - 1);
  Eigen::MatrixXd design(rows, last);
  Eigen::VectorXd w(rows), y(rows);
  for (std::uint32_t mask = 1; mask < full; ++mask) {
    Coalition z(m, mask);
    const double z_last = z[last];
    const Eigen::Index row = mask - 1;
    for (int j = 0; j < last; ++j) design(row, j) = z[j] - z_last;
    w(row) = shapley_kernel_weight(m, z.count()).value();
    y(row) = values[mask] - out.f_empty - z_last * total;
  }
  const Eigen::VectorXd head = weighted_linear_regression(design, w, y);
  out.phi.head(last) = head;
  out.phi(last) = total - head.sum();
  return out;
}

Eigen::VectorXd brute_force_shapley_values(int m, std::span<const double> values) {
  require(m >= 1 && m <= 10, "brute_force_shapley_values: M must lie in [1, 10]");
  require(values.size() == (std::size_t{1} << m), "brute_force_shapley_values: need 2^M values");
  std::vector<double> factorial(m + 1, 1.0);
  for (int i = 1; i <= m; ++i) factorial[i] = factorial[i - 1] * i;

  Eigen::VectorXd phi = Eigen::VectorXd::Zero(m);
  for (int j = 0; j < m; ++j) {
    const std::uint32_t bit = Coalition::bit(m, j);
    for (std::uint32_t s = 0; s < (1U << m); ++s) {
      if (s & bit) continue;
      const int k = std::popcount(s);
      const double weight = factorial[k] * factorial[m - k - 1] / factorial[m];
      phi(j) += weight * (values[s | bit] - values[s]);
    }
  }
  return phi;
}

// ---------------------------------------------------------------------------

double ShapExplanation::local_accuracy_error() const {
  const double sum = phi[0] + phi[1] + phi[2];
  return std::abs(sum - (f_full - f_empty)) / std::max(1.0, std::abs(f_full));
}

namespace {

std::array<double, 8> evaluate_coalitions(const UncertaintyFunction& f, const PerturbationSetting& x,
                                          const PerturbationSetting& r) {
  std::array<double, 8> values{};
  for (const Coalition& z : enumerate_coalitions(3)) values[z.mask()] = f(map_coalition(z, x, r));
  return values;
}

}  // namespace

ShapExplanation explain(const UncertaintyFunction& f, const PerturbationSetting& x,
                        const PerturbationSetting& r, const ShapOptions& options) {
  ShapExplanation e;
  e.coalition_values = evaluate_coalitions(f, x, r);
  const CoalitionShap s = kernel_shap_values(3, e.coalition_values, options);
  for (int j = 0; j < 3; ++j) e.phi[j] = s.phi(j);
  e.f_empty = s.f_empty;
  e.f_full = s.f_full;
  return e;
}

std::array<double, 3> brute_force_shapley(const UncertaintyFunction& f, const PerturbationSetting& x,
                                          const PerturbationSetting& r) {
  const auto values = evaluate_coalitions(f, x, r);
  const Eigen::VectorXd phi = brute_force_shapley_values(3, values);
  return {phi(0), phi(1), phi(2)};
}

}  // namespace icpx
