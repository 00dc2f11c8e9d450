// Copyright 2026 The icpx Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Run configuration as flat key = value text. `[section]` headers prefix
// the keys that follow ("[icp]" then "max_iterations = 20" sets
// icp.max_iterations); `#` starts a comment. Lists are comma separated and
// grids also accept "lo:hi:step".
//
//   seed, workers, replicates
//   icp.max_iterations, icp.translation_tol, icp.rotation_tol,
//   icp.max_correspondence_dist (number or inf), icp.subsample_fraction,
//   icp.outlier_trim_fraction
//   sigma.rotation, sigma.translation       (rad, m; Sigma = diag(r^2 x3, t^2 x3))
//   overlap.distance, samples.count, samples.regularization, kl.include_means
//   grid.sn, grid.ip, grid.po, grid.mode    (per_axis | full_product)
//   shap.policy (constraint_elimination | large_weight), shap.large_weight
//   sweep.setting                           (sn, ip, po)
//   bounds.sn, bounds.ip, bounds.po         (lo, hi)

#ifndef ICPX_CONFIG_HPP
#define ICPX_CONFIG_HPP

#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "icpx/harness.hpp"

namespace icpx {

struct RunConfig {
  ExperimentConfig experiment;
  double sigma_rotation = 0.02;
  double sigma_translation = 0.05;
  PerturbationGrid grid = PerturbationGrid::standard();
  GridMode grid_mode = GridMode::kPerAxis;
  PerturbationSetting sweep_setting{0.05, 1.5, 0.05};

  /// Rebuilds the base covariance from the sigmas and checks every value.
  /// Throws ConfigError.
  void finalize();
};

using KeyValues = std::map<std::string, std::string>;

/// Parses the text format; line numbers appear in ConfigError messages.
KeyValues parse_key_values(const std::string& text, const std::string& origin = "<config>");
KeyValues read_key_values(const std::filesystem::path& path);

/// Applies `values` over `config`; unknown keys are errors.
void apply_key_values(RunConfig& config, const KeyValues& values);

/// Every key with its resolved value; parse + apply reproduces the config.
std::string snapshot(const RunConfig& config);

inline constexpr const char* kConfigEnvironmentVariable = "ICP_EXPLAIN_CONFIG";

/// defaults < config file < flag overrides. The file is `explicit_path` when
/// given, else the path in ICP_EXPLAIN_CONFIG when set, else none.
RunConfig resolve_config(const std::optional<std::filesystem::path>& explicit_path,
                         const KeyValues& overrides);

}  // namespace icpx

#endif  // ICPX_CONFIG_HPP
