// Copyright 2026 The icpx Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef ICPX_ICP_HPP
#define ICPX_ICP_HPP

#include <Eigen/Core>
#include <limits>
#include <span>
#include <vector>

#include "icpx/point_cloud.hpp"
#include "icpx/random.hpp"
#include "icpx/se3.hpp"
#include "icpx/spatial_index.hpp"

namespace icpx {

struct IcpConfig {
  int max_iterations = 50;
  double translation_tol = 1e-6;  // m, on the per-iteration update
  double rotation_tol = 1e-6;     // rad, on the per-iteration update
  double max_correspondence_dist = std::numeric_limits<double>::infinity();
  double subsample_fraction = 1.0;     // (0, 1]
  double outlier_trim_fraction = 0.0;  // [0, 0.5)

  /// Throws PreconditionViolation naming the first offending field.
  void validate() const;
};

struct Correspondence {
  Eigen::Index source = 0;
  Eigen::Index reference = 0;
  double distance = 0.0;
};

struct IcpResult {
  RigidTransformd estimate;
  int iterations = 0;
  double final_cost = 0.0;  // mean squared residual of the last pairing at `estimate`
  bool converged = false;
  Eigen::Index correspondences = 0;
  /// Cost of the nearest-neighbor pairing at the pose entering each iteration.
  std::vector<double> cost_history;
};

/// Pairs every (optionally subsampled) source point with its exact nearest
/// reference point, then drops pairs beyond max_correspondence_dist and, if
/// requested, the worst floor(q N) pairs. `hints` (one per source point, may
/// be empty) carry the previous pairing and are updated in place.
std::vector<Correspondence> find_correspondences(const PointCloud& source_transformed,
                                                 const SpatialIndex& reference_index,
                                                 const IcpConfig& config, Rng& rng,
                                                 std::vector<Eigen::Index>* hints = nullptr);

/// Closed-form least-squares rigid transform mapping `source` columns onto
/// `reference` columns (centroids + SVD with reflection correction).
RigidTransformd estimate_rigid_transform(const Eigen::Ref<const Eigen::Matrix3Xd>& source,
                                         const Eigen::Ref<const Eigen::Matrix3Xd>& reference);

/// Point-to-point ICP from `init`; the estimate maps source into the
/// reference frame.
IcpResult run_icp(const PointCloud& source, const SpatialIndex& reference_index,
                  const RigidTransformd& init, const IcpConfig& config, Rng& rng);

IcpResult run_icp(const PointCloud& source, const PointCloud& reference,
                  const RigidTransformd& init, const IcpConfig& config, Rng& rng);

/// (1/N) sum |T s_i - r_i|^2 over paired columns.
double point_to_point_cost(const RigidTransformd& transform,
                           const Eigen::Ref<const Eigen::Matrix3Xd>& source,
                           const Eigen::Ref<const Eigen::Matrix3Xd>& reference);

}  // namespace icpx

#endif  // ICPX_ICP_HPP
