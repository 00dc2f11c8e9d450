// Copyright 2026 The icpx Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Exact kernel SHAP over all 2^M coalitions.
//
// The Shapley kernel weight is infinite for the empty and the full
// coalition. By default those two rows are enforced as hard constraints:
// targets are centred on f(empty) and sum(phi) = f(full) - f(empty) is
// substituted into the regression, leaving an (M-1)-unknown weighted least
// squares problem over the remaining 2^M - 2 rows. The alternative policy
// keeps all rows and gives the full coalition a large finite weight.

#ifndef ICPX_KERNEL_SHAP_HPP
#define ICPX_KERNEL_SHAP_HPP

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "icpx/errors.hpp"
#include "icpx/perturbation.hpp"

namespace icpx {

inline constexpr int kMaxFeatures = 20;

/// Binary vector z' in {0,1}^M. Feature 0 is the most significant bit of
/// `mask()`, so coalitions sorted by mask read 00..0, 00..1, ..., 11..1.
class Coalition {
 public:
  Coalition(int size, std::uint32_t mask);

  int size() const { return size_; }
  std::uint32_t mask() const { return mask_; }
  bool operator[](int feature) const { return (mask_ >> (size_ - 1 - feature)) & 1U; }
  int count() const;
  std::string to_string() const;

  static std::uint32_t bit(int size, int feature) { return 1U << (size - 1 - feature); }

 private:
  int size_;
  std::uint32_t mask_;
};

/// All 2^M coalitions ordered by mask. Requires 1 <= M <= 20.
std::vector<Coalition> enumerate_coalitions(int m);

/// h_x: component j is x[j] when bit j is set, r[j] otherwise.
PerturbationSetting map_coalition(const Coalition& z, const PerturbationSetting& x,
                                  const PerturbationSetting& r);
std::vector<double> map_coalition(const Coalition& z, std::span<const double> x,
                                  std::span<const double> r);

/// pi(z') = (M-1) / (C(M,|z'|) |z'| (M-|z'|)) as a reduced fraction, or
/// infinite for |z'| in {0, M}.
struct KernelWeight {
  bool infinite = false;
  std::int64_t numerator = 0;
  std::int64_t denominator = 1;

  double value() const;
  bool operator==(const KernelWeight&) const = default;
};

KernelWeight shapley_kernel_weight(int m, int subset_size);

/// phi = (Z^T W Z)^-1 Z^T W y. Throws SingularDesign when the weighted
/// normal matrix is singular or its condition number reaches 1e12.
Eigen::VectorXd weighted_linear_regression(const Eigen::MatrixXd& design,
                                           const Eigen::VectorXd& weights,
                                           const Eigen::VectorXd& targets);

enum class InfiniteWeightPolicy { kConstraintElimination, kLargeWeight };

struct ShapOptions {
  InfiniteWeightPolicy policy = InfiniteWeightPolicy::kConstraintElimination;
  double large_weight = 1e6;
};

struct CoalitionShap {
  Eigen::VectorXd phi;
  double f_empty = 0.0;
  double f_full = 0.0;
};

/// Kernel SHAP from coalition values indexed by mask (enumerate_coalitions
/// order); values.size() must be 2^M.
CoalitionShap kernel_shap_values(int m, std::span<const double> values, const ShapOptions& options = {});

/// Exact Shapley values by subset enumeration; M <= 10. Test oracle.
Eigen::VectorXd brute_force_shapley_values(int m, std::span<const double> values);

// ---------------------------------------------------------------------------
// The three-source explanation.

/// g(z') = phi_sn z_sn + phi_ip z_ip + phi_po z_po on top of f_empty.
struct ShapExplanation {
  std::array<double, 3> phi{};
  double f_empty = 0.0;
  double f_full = 0.0;
  std::array<double, 8> coalition_values{};  // indexed by coalition mask

  double phi_of(Source s) const { return phi[static_cast<int>(s)]; }
  /// |sum(phi) - (f_full - f_empty)| / max(1, |f_full|).
  double local_accuracy_error() const;
};

using UncertaintyFunction = std::function<double(const PerturbationSetting&)>;

/// Evaluates f on all 8 mapped coalitions and solves for phi.
ShapExplanation explain(const UncertaintyFunction& f, const PerturbationSetting& x,
                        const PerturbationSetting& r = kReferenceSetting,
                        const ShapOptions& options = {});

std::array<double, 3> brute_force_shapley(const UncertaintyFunction& f, const PerturbationSetting& x,
                                          const PerturbationSetting& r = kReferenceSetting);

}  // namespace icpx

#endif  // ICPX_KERNEL_SHAP_HPP
