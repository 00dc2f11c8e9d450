// Copyright 2026 The icpx Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef ICPX_POINT_CLOUD_HPP
#define ICPX_POINT_CLOUD_HPP

#include <Eigen/Core>
#include <filesystem>
#include <span>
#include <vector>

#include "icpx/random.hpp"
#include "icpx/se3.hpp"

namespace icpx {

enum class Frame { kLocal, kWorld };

/// Ordered 3D points stored column-wise (3 x N, meters).
class PointCloud {
 public:
  PointCloud() = default;
  explicit PointCloud(Eigen::Matrix3Xd points, Frame frame = Frame::kLocal);

  static PointCloud from_points(std::span<const Eigen::Vector3d> points,
                                Frame frame = Frame::kLocal);

  Eigen::Index size() const { return points_.cols(); }
  bool empty() const { return points_.cols() == 0; }
  const Eigen::Matrix3Xd& points() const { return points_; }
  Eigen::Vector3d point(Eigen::Index i) const { return points_.col(i); }
  Frame frame() const { return frame_; }

  /// Points at `indices`, in the given order.
  PointCloud select(std::span<const Eigen::Index> indices) const;
  /// All points except those at `indices`; order of survivors is kept.
  PointCloud remove(std::span<const Eigen::Index> indices) const;

 private:
  Eigen::Matrix3Xd points_ = Eigen::Matrix3Xd(3, 0);
  Frame frame_ = Frame::kLocal;
};

// ---------------------------------------------------------------------------
// File I/O

enum class CloudFormat { kCsv, kPly };

/// Format from the file extension (.csv / .ply); throws ParseError otherwise.
CloudFormat cloud_format_from_path(const std::filesystem::path& path);

/// CSV: one `x,y,z` record per line, optional header line. PLY: ascii 1.0
/// with a vertex element carrying x, y, z properties.
PointCloud load_cloud(const std::filesystem::path& path, CloudFormat format);
PointCloud load_cloud(const std::filesystem::path& path);
void save_cloud(const PointCloud& cloud, const std::filesystem::path& path, CloudFormat format);
void save_cloud(const PointCloud& cloud, const std::filesystem::path& path);

/// Pose files hold a 4x4 row-major homogeneous matrix: 16 whitespace
/// separated tokens.
RigidTransformd load_pose(const std::filesystem::path& path);
void save_pose(const RigidTransformd& pose, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Cloud operations

/// Applies p -> R p + t to every point and relabels the frame.
PointCloud transform_cloud(const PointCloud& cloud, const RigidTransformd& transform,
                           Frame target = Frame::kWorld);

/// Adds independent N(0, sigma^2) noise to every coordinate. Draws are taken
/// point by point, x then y then z, so a fixed seed yields noise that scales
/// linearly with sigma.
PointCloud add_sensor_noise(const PointCloud& cloud, double sigma, Rng& rng);

class SpatialIndex;

/// Overlap of P2 onto P1: N = #{p in P2 : |NN_P1(p) - p| <= d}, ratio N/|P1|.
/// The ratio is not clamped; it can exceed 1 when |P2| > |P1|.
struct OverlapReport {
  double ratio = 0.0;
  std::vector<Eigen::Index> valid_indices;  // into P2, ascending
  Eigen::Index p1_size = 0;
};

inline constexpr double kDefaultOverlapDistance = 0.2;

OverlapReport overlap_ratio(const PointCloud& p1_world, const PointCloud& p2_world,
                            double d = kDefaultOverlapDistance);
OverlapReport overlap_ratio(const SpatialIndex& p1_index, const PointCloud& p2_world,
                            double d = kDefaultOverlapDistance);

/// Number of P2 points to drop to lower the ratio by `lambda`:
/// ceil(N - |P1| * (O - lambda)).
Eigen::Index overlap_removal_count(const OverlapReport& report, double lambda);

/// Indices of P2 to delete, drawn uniformly from the valid set. The draw is
/// a seeded permutation truncated to the removal count, so for one seed the
/// removal sets are nested as lambda grows. Throws InsufficientOverlap when
/// O <= lambda.
std::vector<Eigen::Index> select_overlap_removal(const OverlapReport& report, double lambda,
                                                 Rng& rng);

/// P2 with the overlap ratio lowered by `lambda` (lambda = 0 returns P2).
PointCloud reduce_overlap(const PointCloud& p1_world, const PointCloud& p2_world, double lambda,
                          double d, Rng& rng);

}  // namespace icpx

#endif  // ICPX_POINT_CLOUD_HPP
