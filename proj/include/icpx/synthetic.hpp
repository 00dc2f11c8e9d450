// Copyright 2026 The icpx Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef ICPX_SYNTHETIC_HPP
#define ICPX_SYNTHETIC_HPP

#include <cstdint>
#include <vector>

#include "icpx/point_cloud.hpp"
#include "icpx/se3.hpp"
#include "icpx/uncertainty.hpp"

namespace icpx {

/// A furnished box-shaped room sampled by scans that each see an x-window
/// of it. Used for tests, the acceptance suite, and `icpx synth`.
struct RoomSceneOptions {
  Eigen::Index points_per_scan = 20000;
  Eigen::Vector3d room_size{9.5, 6.0, 3.0};
  /// World-x windows seen by consecutive scans, [min, max] each.
  std::vector<Eigen::Vector2d> windows{{0.0, 7.0}, {2.3, 9.3}};
  /// Absolute poses (local -> world), one per window.
  std::vector<RigidTransformd> poses;
};

struct SyntheticScene {
  std::vector<PointCloud> scans;  // local frames
  std::vector<RigidTransformd> poses;
};

/// Default poses used when RoomSceneOptions::poses is empty.
std::vector<RigidTransformd> default_scan_poses(std::size_t count);

SyntheticScene make_room_scene(const RoomSceneOptions& options, std::uint64_t seed);

/// Whole furnished room, `count` points in the world frame.
PointCloud make_structured_cloud(Eigen::Index count, std::uint64_t seed);

/// Scans i (source) and i + 1 (reference) as a registration pair.
ScanPair scene_pair(const SyntheticScene& scene, std::size_t i);

}  // namespace icpx

#endif  // ICPX_SYNTHETIC_HPP
