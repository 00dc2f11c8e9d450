// Copyright 2026 The icpx Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef ICPX_SPATIAL_INDEX_HPP
#define ICPX_SPATIAL_INDEX_HPP

#include <Eigen/Core>
#include <cstdint>
#include <limits>
#include <vector>

#include "icpx/point_cloud.hpp"

namespace icpx {

struct Neighbor {
  Eigen::Index index = -1;
  double squared_distance = std::numeric_limits<double>::infinity();

  double distance() const;
};

/// Exact nearest-neighbor search over one cloud. A kd-tree above
/// kBruteForceLimit points, a linear scan below. Equidistant candidates
/// resolve to the lowest point index, in both modes.
///
/// Read-only after construction; concurrent queries are safe.
class SpatialIndex {
 public:
  static constexpr Eigen::Index kBruteForceLimit = 256;
  static constexpr int kLeafSize = 12;

  explicit SpatialIndex(const PointCloud& cloud);

  Eigen::Index size() const { return static_cast<Eigen::Index>(order_.size()); }
  bool uses_tree() const { return !nodes_.empty(); }

  Neighbor nearest(const Eigen::Vector3d& query) const;

  /// Same answer as nearest(query); `hint` (any point index, e.g. the
  /// previous ICP correspondence) seeds the search radius.
  Neighbor nearest(const Eigen::Vector3d& query, Eigen::Index hint) const;

  /// Nearest point no farther than `max_distance`, or index -1 when there
  /// is none. Far queries prune early, which is what makes gated ICP cheap.
  Neighbor nearest_within(const Eigen::Vector3d& query, double max_distance,
                          Eigen::Index hint = -1) const;

  Eigen::Vector3d point(Eigen::Index original_index) const;

 private:
  struct Node {
    // Leaf when split_dim < 0: points [begin, end) of the reordered arrays.
    std::int32_t split_dim = -1;
    double split_value = 0.0;
    std::int32_t left = -1, right = -1;
    std::int32_t begin = 0, end = 0;
    Eigen::Vector3d lo, hi;
  };

  std::int32_t build(std::int32_t begin, std::int32_t end);
  void search(std::int32_t node, const Eigen::Vector3d& q, Neighbor& best) const;
  void scan(std::int32_t begin, std::int32_t end, const Eigen::Vector3d& q, Neighbor& best) const;

  Eigen::Matrix3Xd sorted_;              // points in tree order
  std::vector<Eigen::Index> order_;      // tree slot -> original index
  std::vector<Eigen::Index> slot_of_;    // original index -> tree slot
  std::vector<Node> nodes_;
};

/// Exhaustive search with the same tie rule; used as a test oracle.
Neighbor brute_force_nearest(const PointCloud& cloud, const Eigen::Vector3d& query);

}  // namespace icpx

#endif  // ICPX_SPATIAL_INDEX_HPP
