// Copyright 2026 The icpx Authors.
// SPDX-License-Identifier: Apache-2.0

#include "icpx/point_cloud.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "icpx/spatial_index.hpp"

namespace icpx {

PointCloud::PointCloud(Eigen::Matrix3Xd points, Frame frame)
    : points_(std::move(points)), frame_(frame) {
  require(points_.allFinite(), "PointCloud: coordinates must be finite");
}

PointCloud PointCloud::from_points(std::span<const Eigen::Vector3d> points, Frame frame) {
  Eigen::Matrix3Xd m(3, static_cast<Eigen::Index>(points.size()));
  for (std::size_t i = 0; i < points.size(); ++i) m.col(static_cast<Eigen::Index>(i)) = points[i];
  return PointCloud(std::move(m), frame);
}

PointCloud PointCloud::select(std::span<const Eigen::Index> indices) const {
  Eigen::Matrix3Xd m(3, static_cast<Eigen::Index>(indices.size()));
  for (std::size_t i = 0; i < indices.size(); ++i) {
    m.col(static_cast<Eigen::Index>(i)) = points_.col(indices[i]);
  }
  return PointCloud(std::move(m), frame_);
}

PointCloud PointCloud::remove(std::span<const Eigen::Index> indices) const {
  std::vector<char> drop(static_cast<std::size_t>(size()), 0);
  for (Eigen::Index i : indices) drop[static_cast<std::size_t>(i)] = 1;
  std::vector<Eigen::Index> keep;
  keep.reserve(drop.size());
  for (Eigen::Index i = 0; i < size(); ++i) {
    if (!drop[static_cast<std::size_t>(i)]) keep.push_back(i);
  }
  return select(keep);
}

// ---------------------------------------------------------------------------
// I/O

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

bool parse_double(std::string_view token, double& out) {
  std::string t = trim(token);
  if (t.empty()) return false;
  const char* first = t.data();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, t.data() + t.size(), out);
  return ec == std::errc() && ptr == t.data() + t.size();
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<std::string> whitespace_tokens(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> out;
  for (std::string tok; in >> tok;) out.push_back(tok);
  return out;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

std::string where(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line) + ": ";
}

PointCloud load_csv(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::vector<Eigen::Vector3d> pts;
  std::string line;
  std::size_t line_no = 0;
  bool first_record = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split(line, ',');
    Eigen::Vector3d p;
    bool numeric = fields.size() == 3;
    for (std::size_t k = 0; numeric && k < 3; ++k) numeric = parse_double(fields[k], p(k));
    if (!numeric) {
      bool header = first_record && std::any_of(line.begin(), line.end(), [](unsigned char c) {
                      return std::isalpha(c) && c != 'e' && c != 'E';
                    });
      first_record = false;
      if (header) continue;
      if (fields.size() != 3) {
        throw ParseError(where(path, line_no) + "expected 3 comma-separated values, got " +
                         std::to_string(fields.size()));
      }
      throw ParseError(where(path, line_no) + "malformed number");
    }
    first_record = false;
    if (!p.allFinite()) throw ParseError(where(path, line_no) + "non-finite coordinate");
    pts.push_back(p);
  }
  return PointCloud::from_points(pts);
}

PointCloud load_ply(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::string line;
  std::size_t line_no = 0;
  auto next = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    ++line_no;
    return true;
  };
  if (!next() || trim(line) != "ply") throw ParseError(where(path, 1) + "missing 'ply' magic");

  // Only elements declared before `vertex` matter for locating its body.
  long long vertex_count = -1;
  long long skip_lines = 0;  // ascii lines of elements preceding vertex
  bool in_vertex = false;
  std::vector<std::string> vertex_props;
  long long current_count = 0;
  while (true) {
    if (!next()) throw ParseError(where(path, line_no) + "unterminated header");
    auto tok = whitespace_tokens(line);
    if (tok.empty() || tok[0] == "comment" || tok[0] == "obj_info") continue;
    if (tok[0] == "format") {
      if (tok.size() < 2 || tok[1] != "ascii") {
        throw ParseError(where(path, line_no) + "only ascii PLY is supported");
      }
    } else if (tok[0] == "element") {
      if (tok.size() != 3) throw ParseError(where(path, line_no) + "malformed element line");
      if (!in_vertex && vertex_count < 0) skip_lines += current_count;
      current_count = std::stoll(tok[2]);
      in_vertex = tok[1] == "vertex";
      if (in_vertex) {
        vertex_count = current_count;
        current_count = 0;
      }
    } else if (tok[0] == "property") {
      if (in_vertex) vertex_props.push_back(tok.back());
    } else if (tok[0] == "end_header") {
      break;
    } else {
      throw ParseError(where(path, line_no) + "unknown header keyword '" + tok[0] + "'");
    }
  }
  if (vertex_count < 0) throw ParseError(path.string() + ": no vertex element");
  int ix = -1, iy = -1, iz = -1;
  for (int k = 0; k < static_cast<int>(vertex_props.size()); ++k) {
    if (vertex_props[k] == "x") ix = k;
    if (vertex_props[k] == "y") iy = k;
    if (vertex_props[k] == "z") iz = k;
  }
  if (ix < 0 || iy < 0 || iz < 0) throw ParseError(path.string() + ": vertex lacks x, y, z");

  for (long long i = 0; i < skip_lines; ++i) {
    if (!next()) throw ParseError(where(path, line_no) + "truncated body");
  }
  Eigen::Matrix3Xd m(3, vertex_count);
  for (long long i = 0; i < vertex_count; ++i) {
    if (!next()) throw ParseError(where(path, line_no) + "truncated vertex list");
    auto tok = whitespace_tokens(line);
    if (tok.size() != vertex_props.size()) {
      throw ParseError(where(path, line_no) + "expected " + std::to_string(vertex_props.size()) +
                       " values, got " + std::to_string(tok.size()));
    }
    Eigen::Vector3d p;
    if (!parse_double(tok[ix], p.x()) || !parse_double(tok[iy], p.y()) ||
        !parse_double(tok[iz], p.z()) || !p.allFinite()) {
      throw ParseError(where(path, line_no) + "malformed coordinate");
    }
    m.col(i) = p;
  }
  return PointCloud(std::move(m));
}

}  // namespace

CloudFormat cloud_format_from_path(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".csv") return CloudFormat::kCsv;
  if (ext == ".ply") return CloudFormat::kPly;
  throw ParseError("unrecognised point cloud extension '" + ext + "' for " + path.string());
}

PointCloud load_cloud(const std::filesystem::path& path, CloudFormat format) {
  return format == CloudFormat::kCsv ? load_csv(path) : load_ply(path);
}

PointCloud load_cloud(const std::filesystem::path& path) {
  return load_cloud(path, cloud_format_from_path(path));
}

void save_cloud(const PointCloud& cloud, const std::filesystem::path& path, CloudFormat format) {
  auto out = open_output(path);
  char buf[96];
  if (format == CloudFormat::kPly) {
    out << "ply\nformat ascii 1.0\nelement vertex " << cloud.size()
        << "\nproperty double x\nproperty double y\nproperty double z\nend_header\n";
  }
  const char* fmt = format == CloudFormat::kCsv ? "%.17g,%.17g,%.17g\n" : "%.17g %.17g %.17g\n";
  for (Eigen::Index i = 0; i < cloud.size(); ++i) {
    auto p = cloud.point(i);
    std::snprintf(buf, sizeof buf, fmt, p.x(), p.y(), p.z());
    out << buf;
  }
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

void save_cloud(const PointCloud& cloud, const std::filesystem::path& path) {
  save_cloud(cloud, path, cloud_format_from_path(path));
}

RigidTransformd load_pose(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::vector<double> values;
  for (std::string tok; in >> tok;) {
    double v;
    if (!parse_double(tok, v)) throw ParseError(path.string() + ": malformed token '" + tok + "'");
    values.push_back(v);
  }
  if (values.size() != 16) {
    throw ParseError(path.string() + ": expected 16 pose values, got " +
                     std::to_string(values.size()));
  }
  Eigen::Matrix4d m = Eigen::Map<Eigen::Matrix<double, 4, 4, Eigen::RowMajor>>(values.data());
  auto pose = RigidTransformd::from_matrix(m);
  if (!pose.is_valid(1e-6)) throw ParseError(path.string() + ": rotation block is not in SO(3)");
  return pose;
}

void save_pose(const RigidTransformd& pose, const std::filesystem::path& path) {
  auto out = open_output(path);
  Eigen::Matrix4d m = pose.matrix();
  char buf[32];
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", m(r, c));
      out << buf << (c == 3 ? '\n' : ' ');
    }
  }
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

// ---------------------------------------------------------------------------
// Operations

PointCloud transform_cloud(const PointCloud& cloud, const RigidTransformd& transform,
                           Frame target) {
  Eigen::Matrix3Xd m = (transform.rotation() * cloud.points()).colwise() + transform.translation();
  return PointCloud(std::move(m), target);
}

PointCloud add_sensor_noise(const PointCloud& cloud, double sigma, Rng& rng) {
  require(sigma >= 0.0, "add_sensor_noise: sigma must be non-negative");
  if (sigma == 0.0) return cloud;
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::Matrix3Xd m = cloud.points();
  for (Eigen::Index i = 0; i < m.cols(); ++i) {
    for (int k = 0; k < 3; ++k) m(k, i) += sigma * normal(rng);
  }
  return PointCloud(std::move(m), cloud.frame());
}

OverlapReport overlap_ratio(const SpatialIndex& p1_index, const PointCloud& p2_world, double d) {
  require(p1_index.size() > 0 && !p2_world.empty(), "overlap_ratio: clouds must be non-empty");
  OverlapReport report;
  report.p1_size = p1_index.size();
  Eigen::Index hint = -1;
  for (Eigen::Index i = 0; i < p2_world.size(); ++i) {
    const Neighbor nn = p1_index.nearest_within(p2_world.point(i), d, hint);
    if (nn.index < 0) continue;
    hint = nn.index;
    report.valid_indices.push_back(i);
  }
  report.ratio = static_cast<double>(report.valid_indices.size()) /
                 static_cast<double>(report.p1_size);
  return report;
}

OverlapReport overlap_ratio(const PointCloud& p1_world, const PointCloud& p2_world, double d) {
  return overlap_ratio(SpatialIndex(p1_world), p2_world, d);
}

Eigen::Index overlap_removal_count(const OverlapReport& report, double lambda) {
  const double n = static_cast<double>(report.valid_indices.size());
  const double target = report.ratio - lambda;
  // Guard against ceil() turning 100.00000000000001 into 101.
  return static_cast<Eigen::Index>(
      std::ceil(n - static_cast<double>(report.p1_size) * target - 1e-9));
}

std::vector<Eigen::Index> select_overlap_removal(const OverlapReport& report, double lambda,
                                                 Rng& rng) {
  require(lambda >= 0.0, "reduce_overlap: lambda must be non-negative");
  if (lambda == 0.0) return {};
  if (report.ratio <= lambda) {
    throw InsufficientOverlap("overlap ratio " + std::to_string(report.ratio) +
                              " does not exceed requested reduction " + std::to_string(lambda));
  }
  const Eigen::Index count =
      std::clamp<Eigen::Index>(overlap_removal_count(report, lambda), 0,
                               static_cast<Eigen::Index>(report.valid_indices.size()));
  std::vector<Eigen::Index> pool = report.valid_indices;
  std::shuffle(pool.begin(), pool.end(), rng);
  pool.resize(static_cast<std::size_t>(count));
  std::sort(pool.begin(), pool.end());
  return pool;
}

PointCloud reduce_overlap(const PointCloud& p1_world, const PointCloud& p2_world, double lambda,
                          double d, Rng& rng) {
  if (lambda == 0.0) return p2_world;
  OverlapReport report = overlap_ratio(p1_world, p2_world, d);
  return p2_world.remove(select_overlap_removal(report, lambda, rng));
}

}  // namespace icpx
