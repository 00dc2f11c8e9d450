// Copyright 2026 The icpx Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef ICPX_PERTURBATION_HPP
#define ICPX_PERTURBATION_HPP

#include <array>
#include <compare>
#include <cstdint>
#include <string>

#include "icpx/errors.hpp"

namespace icpx {

/// The three explained uncertainty sources, in attribution order.
enum class Source : int { kSensorNoise = 0, kInitialPose = 1, kPartialOverlap = 2 };

inline constexpr std::array<const char*, 3> kSourceNames = {"sn", "ip", "po"};

/// x = {x_sn, x_ip, x_po}.
struct PerturbationSetting {
  double noise_sigma = 0.0;        // m, std-dev of per-coordinate sensor noise
  double pose_scale = 1.0;         // s, initial-pose covariance multiplier
  double overlap_reduction = 0.0;  // lambda, drop in overlap ratio

  std::array<double, 3> values() const { return {noise_sigma, pose_scale, overlap_reduction}; }
  static PerturbationSetting from_values(const std::array<double, 3>& v) { return {v[0], v[1], v[2]}; }
  double operator[](Source s) const { return values()[static_cast<int>(s)]; }

  auto operator<=>(const PerturbationSetting&) const = default;
};

/// Reference (unperturbed) values r = {0, 1, 0}.
inline constexpr PerturbationSetting kReferenceSetting{0.0, 1.0, 0.0};

struct PerturbationBounds {
  std::array<double, 3> lower{0.0, 1.0, 0.0};
  std::array<double, 3> upper{0.1, 2.0, 0.1};

  bool contains(const PerturbationSetting& x) const;
  /// Throws PreconditionViolation naming the offending source.
  void check(const PerturbationSetting& x) const;
};

std::string to_string(const PerturbationSetting& x);

}  // namespace icpx

#endif  // ICPX_PERTURBATION_HPP
