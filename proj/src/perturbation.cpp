// Copyright 2026 The icpx Authors.
// SPDX-License-Identifier: Apache-2.0

#include "icpx/perturbation.hpp"

#include <cstdio>

#include "icpx/errors.hpp"

namespace icpx {

bool PerturbationBounds::contains(const PerturbationSetting& x) const {
  const auto v = x.values();
  for (int j = 0; j < 3; ++j) {
    if (!(v[j] >= lower[j] && v[j] <= upper[j])) return false;
  }
  return true;
}

void PerturbationBounds::check(const PerturbationSetting& x) const {
  const auto v = x.values();
  for (int j = 0; j < 3; ++j) {
    if (!(v[j] >= lower[j] && v[j] <= upper[j])) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "x_%s = %g outside [%g, %g]", kSourceNames[j], v[j], lower[j],
                    upper[j]);
      throw PreconditionViolation(buf);
    }
  }
}

std::string to_string(const PerturbationSetting& x) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "(%g, %g, %g)", x.noise_sigma, x.pose_scale, x.overlap_reduction);
  return buf;
}

}  // namespace icpx
