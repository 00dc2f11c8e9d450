// Copyright 2026 The icpx Authors.
// SPDX-License-Identifier: Apache-2.0

#include "icpx/synthetic.hpp"

#include <cmath>
#include <random>

#include "icpx/errors.hpp"
#include "icpx/random.hpp"

namespace icpx {
namespace {

struct Rectangle {
  Eigen::Vector3d origin, u, v;
  double area() const { return u.cross(v).norm(); }
};

void add_box(std::vector<Rectangle>& faces, const Eigen::Vector3d& lo, const Eigen::Vector3d& hi) {
  const Eigen::Vector3d d = hi - lo;
  const Eigen::Vector3d ex(d.x(), 0, 0), ey(0, d.y(), 0), ez(0, 0, d.z());
  faces.push_back({lo + ez, ex, ey});  // top
  faces.push_back({lo, ex, ez});
  faces.push_back({lo + ey, ex, ez});
  faces.push_back({lo, ey, ez});
  faces.push_back({lo + ex, ey, ez});
}

// Floor, ceiling, four walls, and furniture that breaks the corridor
// symmetry along x inside the overlap region.
std::vector<Rectangle> room_surfaces(const Eigen::Vector3d& size) {
  const double l = size.x(), w = size.y(), h = size.z();
  std::vector<Rectangle> faces = {
      {{0, 0, 0}, {l, 0, 0}, {0, w, 0}},  // floor
      {{0, 0, h}, {l, 0, 0}, {0, w, 0}},  // ceiling
      {{0, 0, 0}, {l, 0, 0}, {0, 0, h}},  // wall y = 0
      {{0, w, 0}, {l, 0, 0}, {0, 0, h}},  // wall y = w
      {{0, 0, 0}, {0, w, 0}, {0, 0, h}},  // wall x = 0
      {{l, 0, 0}, {0, w, 0}, {0, 0, h}},  // wall x = l
  };
  add_box(faces, {1.0, 3.6, 0.0}, {1.7, 5.1, 0.8});
  add_box(faces, {3.0, 0.5, 0.0}, {3.8, 1.6, 0.9});
  add_box(faces, {4.4, 2.8, 0.0}, {4.7, 3.1, h});
  add_box(faces, {5.3, 4.0, 0.0}, {6.1, 5.3, 1.2});
  add_box(faces, {7.6, 1.0, 0.0}, {8.6, 2.1, 1.0});
  add_box(faces, {2.6, 5.2, 1.2}, {3.9, 6.0, 1.8});  // wall shelf
  add_box(faces, {2.2, 0.0, 0.0}, {2.5, 1.1, 2.2});  // partition stubs
  add_box(faces, {6.6, 4.6, 0.0}, {6.9, 6.0, 2.2});
  add_box(faces, {5.6, 1.4, 0.0}, {5.9, 1.7, h});    // pillar
  add_box(faces, {3.1, 0.0, 1.6}, {3.6, 0.3, 2.4});  // wall cabinet
  return faces;
}

class SurfaceSampler {
 public:
  explicit SurfaceSampler(std::vector<Rectangle> faces) : faces_(std::move(faces)) {
    std::vector<double> areas;
    for (const auto& f : faces_) areas.push_back(f.area());
    pick_ = std::discrete_distribution<std::size_t>(areas.begin(), areas.end());
  }

  Eigen::Vector3d operator()(Rng& rng) {
    const Rectangle& f = faces_[pick_(rng)];
    const double a = unit_(rng), b = unit_(rng);
    return f.origin + a * f.u + b * f.v;
  }

 private:
  std::vector<Rectangle> faces_;
  std::discrete_distribution<std::size_t> pick_;
  std::uniform_real_distribution<double> unit_{0.0, 1.0};
};

RigidTransformd pose(double roll, double pitch, double yaw, const Eigen::Vector3d& t) {
  Eigen::Vector3d delta(roll, pitch, yaw);
  return RigidTransformd(exp_so3(delta), t);
}

}  // namespace

std::vector<RigidTransformd> default_scan_poses(std::size_t count) {
  std::vector<RigidTransformd> poses;
  for (std::size_t i = 0; i < count; ++i) {
    const double k = static_cast<double>(i);
    poses.push_back(pose(0.02 * k, -0.015 * k, 0.1 + 0.25 * k, {1.5 + 3.5 * k, 3.0 - 0.2 * k, 1.2 + 0.05 * k}));
  }
  return poses;
}

SyntheticScene make_room_scene(const RoomSceneOptions& options, std::uint64_t seed) {
  require(options.points_per_scan > 0, "make_room_scene: points_per_scan must be positive");
  require(!options.windows.empty(), "make_room_scene: need at least one window");
  SyntheticScene scene;
  scene.poses = options.poses.empty() ? default_scan_poses(options.windows.size()) : options.poses;
  require(scene.poses.size() == options.windows.size(), "make_room_scene: one pose per window");

  SurfaceSampler sampler(room_surfaces(options.room_size));
  for (std::size_t s = 0; s < options.windows.size(); ++s) {
    Rng rng = make_rng(derive_seed(seed, {s}));
    const Eigen::Vector2d window = options.windows[s];
    Eigen::Matrix3Xd world(3, options.points_per_scan);
    for (Eigen::Index i = 0; i < options.points_per_scan;) {
      Eigen::Vector3d p = sampler(rng);
      if (p.x() >= window.x() && p.x() <= window.y()) world.col(i++) = p;
    }
    scene.scans.push_back(
        transform_cloud(PointCloud(std::move(world), Frame::kWorld), scene.poses[s].inverse(), Frame::kLocal));
  }
  return scene;
}

PointCloud make_structured_cloud(Eigen::Index count, std::uint64_t seed) {
  SurfaceSampler sampler(room_surfaces({9.5, 6.0, 3.0}));
  Rng rng = make_rng(seed);
  Eigen::Matrix3Xd pts(3, count);
  for (Eigen::Index i = 0; i < count; ++i) pts.col(i) = sampler(rng);
  return PointCloud(std::move(pts), Frame::kWorld);
}

ScanPair scene_pair(const SyntheticScene& scene, std::size_t i) {
  require(i + 1 < scene.scans.size(), "scene_pair: index out of range");
  return {std::to_string(i) + "-" + std::to_string(i + 1), scene.scans[i], scene.scans[i + 1],
          scene.poses[i], scene.poses[i + 1]};
}

}  // namespace icpx
