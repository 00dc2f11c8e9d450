// Copyright 2026 The icpx Authors.
// SPDX-License-Identifier: Apache-2.0

#include "icpx/icp.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <numeric>

namespace icpx {

void IcpConfig::validate() const {
  require(max_iterations > 0, "IcpConfig: max_iterations must be positive");
  require(translation_tol > 0.0, "IcpConfig: translation_tol must be positive");
  require(rotation_tol > 0.0, "IcpConfig: rotation_tol must be positive");
  require(max_correspondence_dist >= 0.0, "IcpConfig: max_correspondence_dist must be >= 0");
  require(subsample_fraction > 0.0 && subsample_fraction <= 1.0,
          "IcpConfig: subsample_fraction must lie in (0, 1]");
  require(outlier_trim_fraction >= 0.0 && outlier_trim_fraction < 0.5,
          "IcpConfig: outlier_trim_fraction must lie in [0, 0.5)");
}

std::vector<Correspondence> find_correspondences(const PointCloud& source_transformed,
                                                 const SpatialIndex& reference_index,
                                                 const IcpConfig& config, Rng& rng,
                                                 std::vector<Eigen::Index>* hints) {
  const Eigen::Index n = source_transformed.size();
  require(n > 0 && reference_index.size() > 0, "find_correspondences: empty cloud");

  std::vector<Eigen::Index> active(static_cast<std::size_t>(n));
  std::iota(active.begin(), active.end(), Eigen::Index{0});
  if (config.subsample_fraction < 1.0) {
    auto k = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(config.subsample_fraction * static_cast<double>(n))));
    std::vector<Eigen::Index> chosen;
    chosen.reserve(k);
    std::sample(active.begin(), active.end(), std::back_inserter(chosen), k, rng);
    active = std::move(chosen);
  }
  if (hints && hints->size() != static_cast<std::size_t>(n)) {
    hints->assign(static_cast<std::size_t>(n), -1);
  }

  const double max_d = config.max_correspondence_dist;
  std::vector<Correspondence> pairs;
  pairs.reserve(active.size());
  for (Eigen::Index i : active) {
    Eigen::Index hint = hints ? (*hints)[static_cast<std::size_t>(i)] : -1;
    const Neighbor nn = std::isfinite(max_d)
                            ? reference_index.nearest_within(source_transformed.point(i), max_d, hint)
                            : reference_index.nearest(source_transformed.point(i), hint);
    if (nn.index < 0) continue;
    if (hints) (*hints)[static_cast<std::size_t>(i)] = nn.index;
    const double dist = nn.distance();
    if (dist <= max_d) pairs.push_back({i, nn.index, dist});
  }

  if (config.outlier_trim_fraction > 0.0 && !pairs.empty()) {
    auto drop = static_cast<std::size_t>(
        std::floor(config.outlier_trim_fraction * static_cast<double>(pairs.size())));
    if (drop > 0) {
      std::vector<Correspondence> sorted = pairs;
      std::sort(sorted.begin(), sorted.end(), [](const Correspondence& a, const Correspondence& b) {
        return a.distance < b.distance || (a.distance == b.distance && a.source < b.source);
      });
      sorted.resize(sorted.size() - drop);
      std::sort(sorted.begin(), sorted.end(),
                [](const Correspondence& a, const Correspondence& b) { return a.source < b.source; });
      pairs = std::move(sorted);
    }
  }
  if (pairs.empty()) throw NoCorrespondences("no correspondence within the acceptance distance");
  return pairs;
}

RigidTransformd estimate_rigid_transform(const Eigen::Ref<const Eigen::Matrix3Xd>& source,
                                         const Eigen::Ref<const Eigen::Matrix3Xd>& reference) {
  require(source.cols() == reference.cols(), "estimate_rigid_transform: size mismatch");
  if (source.cols() < 3) {
    throw DegenerateConfiguration("estimate_rigid_transform: need at least 3 pairs");
  }
  const Eigen::Vector3d source_mean = source.rowwise().mean();
  const Eigen::Vector3d reference_mean = reference.rowwise().mean();
  const Eigen::Matrix3d cross = (source.colwise() - source_mean) *
                                (reference.colwise() - reference_mean).transpose();

  Eigen::JacobiSVD<Eigen::Matrix3d> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d sv = svd.singularValues();
  if (!(sv(0) > 0.0) || sv(1) <= 1e-12 * sv(0)) {
    throw DegenerateConfiguration("estimate_rigid_transform: cross-covariance rank < 2");
  }
  const Eigen::Matrix3d& u = svd.matrixU();
  const Eigen::Matrix3d& v = svd.matrixV();
  Eigen::Vector3d d(1.0, 1.0, (v * u.transpose()).determinant() < 0.0 ? -1.0 : 1.0);
  Eigen::Matrix3d rotation = v * d.asDiagonal() * u.transpose();
  return {rotation, reference_mean - rotation * source_mean};
}

double point_to_point_cost(const RigidTransformd& transform,
                           const Eigen::Ref<const Eigen::Matrix3Xd>& source,
                           const Eigen::Ref<const Eigen::Matrix3Xd>& reference) {
  if (source.cols() == 0) return 0.0;
  Eigen::Matrix3Xd moved = (transform.rotation() * source).colwise() + transform.translation();
  return (moved - reference).colwise().squaredNorm().mean();
}

IcpResult run_icp(const PointCloud& source, const SpatialIndex& reference_index,
                  const RigidTransformd& init, const IcpConfig& config, Rng& rng) {
  config.validate();
  require(!source.empty() && reference_index.size() > 0, "run_icp: clouds must be non-empty");

  IcpResult result;
  result.estimate = init;
  std::vector<Eigen::Index> hints;
  Eigen::Matrix3Xd src, ref;
  for (int it = 0; it < config.max_iterations; ++it) {
    const PointCloud moved = transform_cloud(source, result.estimate);
    const auto pairs = find_correspondences(moved, reference_index, config, rng, &hints);

    const auto m = static_cast<Eigen::Index>(pairs.size());
    src.resize(3, m);
    ref.resize(3, m);
    double cost = 0.0;
    for (Eigen::Index k = 0; k < m; ++k) {
      src.col(k) = moved.points().col(pairs[k].source);
      ref.col(k) = reference_index.point(pairs[k].reference);
      cost += pairs[k].distance * pairs[k].distance;
    }
    result.cost_history.push_back(cost / static_cast<double>(m));

    const RigidTransformd delta = estimate_rigid_transform(src, ref);
    result.estimate = delta * result.estimate;
    result.iterations = it + 1;
    result.correspondences = m;
    result.final_cost = point_to_point_cost(delta, src, ref);
    if (delta.translation().norm() < config.translation_tol &&
        rotation_angle(delta) < config.rotation_tol) {
      result.converged = true;
      break;
    }
  }
  return result;
}

IcpResult run_icp(const PointCloud& source, const PointCloud& reference,
                  const RigidTransformd& init, const IcpConfig& config, Rng& rng) {
  return run_icp(source, SpatialIndex(reference), init, config, rng);
}

}  // namespace icpx
