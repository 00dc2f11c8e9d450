// Copyright 2026 The icpx Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Scalar pose uncertainty: repeated ICP runs under a perturbation setting,
// a Gaussian fitted in the tangent space of the ground-truth relative pose,
// and the KL divergence of that Gaussian from the unperturbed (pseudo-true)
// one.

#ifndef ICPX_UNCERTAINTY_HPP
#define ICPX_UNCERTAINTY_HPP

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "icpx/icp.hpp"
#include "icpx/perturbation.hpp"
#include "icpx/point_cloud.hpp"
#include "icpx/se3.hpp"
#include "icpx/spatial_index.hpp"

namespace icpx {

/// Two consecutive scans in their local frames with absolute ground-truth
/// poses (local -> world). The source is registered onto the reference;
/// overlap reduction acts on the reference.
struct ScanPair {
  std::string id;
  PointCloud source;
  PointCloud reference;
  RigidTransformd source_pose;
  RigidTransformd reference_pose;

  /// Relative pose taking source-local points into the reference frame.
  RigidTransformd ground_truth() const { return reference_pose.inverse() * source_pose; }
};

/// Per-pair data shared by every scenario on that pair.
struct PairContext {
  ScanPair pair;
  RigidTransformd ground_truth;
  OverlapReport overlap;  // reference points (world frame) near the source
  std::shared_ptr<const SpatialIndex> reference_index;
};

std::shared_ptr<const PairContext> prepare_pair(ScanPair pair, double overlap_distance);

struct UncertaintyConfig {
  int sample_count = 100;
  PoseCovarianced base_covariance = diagonal_pose_covariance();
  double overlap_distance = kDefaultOverlapDistance;
  IcpConfig icp;
  bool kl_include_means = false;
  double regularization = 1e-12;
  int workers = 1;

  static constexpr int kMinSamples = 7;
};

struct Scenario {
  std::shared_ptr<const PairContext> pair;
  PerturbationSetting setting;
  std::uint64_t seed = 0;  // root of every per-sample stream
};

/// One draw of perturbed inputs, clouds in their local frames.
struct PerturbedInputs {
  PointCloud source;
  PointCloud reference;
  bool reference_unchanged = false;
  RigidTransformd init;
};

/// Perturbed inputs for sample `sample_index` of a scenario: sensor noise on
/// both clouds, overlap reduction on the reference (selected in the world
/// frame, applied to the local cloud), and an initial pose
/// T_gt exp(xi), xi ~ N(0, x_ip Sigma). Throws InsufficientOverlap when the
/// pair's overlap ratio does not exceed x_po.
PerturbedInputs apply_perturbations(const Scenario& scenario, std::uint64_t sample_index,
                                    const UncertaintyConfig& config);

struct PoseSampleSet {
  std::vector<RigidTransformd> samples;
  RigidTransformd ground_truth;
  std::vector<Tangentd> tangent_errors;  // log(T_gt^-1 T_k)
  int failures = 0;
};

/// Runs `config.sample_count` independent ICP registrations. Failed runs are
/// dropped; fewer than 7 successes throws TooFewSamples.
PoseSampleSet sample_pose_estimates(const Scenario& scenario, const UncertaintyConfig& config);

struct GaussianPoseDistribution {
  Tangentd mean = Tangentd::Zero();
  PoseCovarianced covariance = PoseCovarianced::Identity();
};

/// Sample mean and unbiased covariance plus regularization * I.
GaussianPoseDistribution fit_gaussian(std::span<const Tangentd> errors, double regularization = 1e-12);
GaussianPoseDistribution fit_gaussian(const PoseSampleSet& set, double regularization = 1e-12);

/// KL(p || q) between 6-D Gaussians; the mean term is optional. Throws
/// SingularCovariance when either covariance is not numerically positive
/// definite.
double kl_divergence(const GaussianPoseDistribution& p, const GaussianPoseDistribution& q,
                     bool include_means = false);

/// Distribution of estimates under the reference setting {0, 1, 0}.
GaussianPoseDistribution pseudo_true_distribution(const std::shared_ptr<const PairContext>& pair,
                                                  const UncertaintyConfig& config,
                                                  std::uint64_t seed);

/// KL(perturbed || pseudo-true) for the scenario.
double estimate_uncertainty(const Scenario& scenario, const GaussianPoseDistribution& pseudo_true,
                            const UncertaintyConfig& config);

// Pseudo-true cache file, text, versioned:
//   icpx-pseudo-true 1
//   pair <id>
//   seed <uint64>
//   samples <count> failures <count>
//   mean <6 values>
//   covariance
//   <6 lines of 6 values>
struct PseudoTrueCache {
  std::string pair_id;
  std::uint64_t seed = 0;
  int samples = 0;
  int failures = 0;
  GaussianPoseDistribution distribution;
};

void write_pseudo_true_cache(const PseudoTrueCache& cache, const std::filesystem::path& path);
PseudoTrueCache read_pseudo_true_cache(const std::filesystem::path& path);

}  // namespace icpx

#endif  // ICPX_UNCERTAINTY_HPP
