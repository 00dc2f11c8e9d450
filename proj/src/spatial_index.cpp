// Copyright 2026 The icpx Authors.
// SPDX-License-Identifier: Apache-2.0

#include "icpx/spatial_index.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace icpx {

double Neighbor::distance() const { return std::sqrt(squared_distance); }

SpatialIndex::SpatialIndex(const PointCloud& cloud) {
  const Eigen::Index n = cloud.size();
  require(n > 0, "SpatialIndex: cloud is empty");
  order_.resize(static_cast<std::size_t>(n));
  std::iota(order_.begin(), order_.end(), Eigen::Index{0});
  if (n >= kBruteForceLimit) {
    sorted_ = cloud.points();  // scratch for build(), re-gathered below
    nodes_.reserve(static_cast<std::size_t>(2 * n / kLeafSize + 1));
    build(0, static_cast<std::int32_t>(n));
  }
  sorted_.resize(3, n);
  slot_of_.resize(static_cast<std::size_t>(n));
  for (Eigen::Index slot = 0; slot < n; ++slot) {
    sorted_.col(slot) = cloud.points().col(order_[slot]);
    slot_of_[order_[slot]] = slot;
  }
}

std::int32_t SpatialIndex::build(std::int32_t begin, std::int32_t end) {
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.emplace_back();
  Eigen::Vector3d lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
  Eigen::Vector3d hi = -lo;
  for (std::int32_t i = begin; i < end; ++i) {
    const auto p = sorted_.col(order_[i]);
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  nodes_[id].begin = begin;
  nodes_[id].end = end;
  nodes_[id].lo = lo;
  nodes_[id].hi = hi;
  if (end - begin <= kLeafSize) return id;

  Eigen::Index dim;
  (hi - lo).maxCoeff(&dim);
  const std::int32_t mid = begin + (end - begin) / 2;
  auto less = [&](Eigen::Index a, Eigen::Index b) {
    double ca = sorted_(dim, a), cb = sorted_(dim, b);
    return ca < cb || (ca == cb && a < b);
  };
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end, less);

  const double split = sorted_(dim, order_[mid]);
  const std::int32_t left = build(begin, mid);
  const std::int32_t right = build(mid, end);
  Node& node = nodes_[id];
  node.split_dim = static_cast<std::int32_t>(dim);
  node.split_value = split;
  node.left = left;
  node.right = right;
  return id;
}

void SpatialIndex::scan(std::int32_t begin, std::int32_t end, const Eigen::Vector3d& q,
                        Neighbor& best) const {
  const double* data = sorted_.data();
  for (std::int32_t slot = begin; slot < end; ++slot) {
    const double* p = data + 3 * static_cast<std::ptrdiff_t>(slot);
    const double dx = p[0] - q.x(), dy = p[1] - q.y(), dz = p[2] - q.z();
    const double d2 = dx * dx + dy * dy + dz * dz;
    if (d2 < best.squared_distance ||
        (d2 == best.squared_distance && (best.index < 0 || order_[slot] < best.index))) {
      best.squared_distance = d2;
      best.index = order_[slot];
    }
  }
}

void SpatialIndex::search(std::int32_t id, const Eigen::Vector3d& q, Neighbor& best) const {
  const Node& node = nodes_[id];
  if (node.split_dim < 0) {
    scan(node.begin, node.end, q, best);
    return;
  }
  const double diff = q(node.split_dim) - node.split_value;
  const std::int32_t near = diff < 0.0 ? node.left : node.right;
  const std::int32_t far = diff < 0.0 ? node.right : node.left;
  search(near, q, best);
  // <= keeps equidistant points reachable so the lowest-index rule holds.
  if (diff * diff <= best.squared_distance) {
    const Node& f = nodes_[far];
    const Eigen::Vector3d gap = (f.lo - q).cwiseMax(q - f.hi).cwiseMax(0.0);
    if (gap.squaredNorm() <= best.squared_distance) search(far, q, best);
  }
}

Neighbor SpatialIndex::nearest(const Eigen::Vector3d& query) const {
  Neighbor best;
  if (nodes_.empty()) {
    scan(0, static_cast<std::int32_t>(size()), query, best);
  } else {
    search(0, query, best);
  }
  return best;
}

Neighbor SpatialIndex::nearest(const Eigen::Vector3d& query, Eigen::Index hint) const {
  if (nodes_.empty() || hint < 0 || hint >= size()) return nearest(query);
  Neighbor best{hint, (sorted_.col(slot_of_[hint]) - query).squaredNorm()};
  search(0, query, best);
  return best;
}

Neighbor SpatialIndex::nearest_within(const Eigen::Vector3d& query, double max_distance,
                                      Eigen::Index hint) const {
  // Slightly inflated so the final sqrt-based test, not rounding of r^2,
  // decides boundary cases.
  Neighbor best{-1, max_distance * max_distance * (1.0 + 1e-12)};
  if (hint >= 0 && hint < size()) {
    const double d2 = (sorted_.col(slot_of_[hint]) - query).squaredNorm();
    if (d2 <= best.squared_distance) best = {hint, d2};
  }
  if (nodes_.empty()) {
    scan(0, static_cast<std::int32_t>(size()), query, best);
  } else {
    search(0, query, best);
  }
  if (best.index < 0 || best.distance() > max_distance) return {};
  return best;
}

Eigen::Vector3d SpatialIndex::point(Eigen::Index original_index) const {
  return sorted_.col(slot_of_[original_index]);
}

Neighbor brute_force_nearest(const PointCloud& cloud, const Eigen::Vector3d& query) {
  Neighbor best;
  for (Eigen::Index i = 0; i < cloud.size(); ++i) {
    const double d2 = (cloud.points().col(i) - query).squaredNorm();
    if (d2 < best.squared_distance) best = {i, d2};
  }
  return best;
}

}  // namespace icpx
