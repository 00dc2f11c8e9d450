// Copyright 2026 The icpx Authors.
// SPDX-License-Identifier: Apache-2.0

#include "icpx/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#include "icpx/errors.hpp"

namespace icpx {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream in(s);
  for (std::string item; std::getline(in, item, sep);) out.push_back(trim(item));
  return out;
}

double to_double(const std::string& key, const std::string& text) {
  if (text == "inf") return std::numeric_limits<double>::infinity();
  double v = 0.0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) {
    throw ConfigError(key + ": expected a number, got '" + text + "'");
  }
  return v;
}

template <typename Int>
Int to_integer(const std::string& key, const std::string& text) {
  Int v = 0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ConfigError(key + ": expected an integer, got '" + text + "'");
  return v;
}

bool to_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError(key + ": expected true or false, got '" + text + "'");
}

std::vector<double> to_list(const std::string& key, const std::string& text) {
  std::vector<double> out;
  for (const auto& item : split(text, ',')) out.push_back(to_double(key, item));
  if (out.empty()) throw ConfigError(key + ": empty list");
  return out;
}

std::vector<double> to_grid(const std::string& key, const std::string& text) {
  if (text.find(':') == std::string::npos) return to_list(key, text);
  const auto parts = split(text, ':');
  if (parts.size() != 3) throw ConfigError(key + ": expected lo:hi:step, got '" + text + "'");
  const double lo = to_double(key, parts[0]), hi = to_double(key, parts[1]), step = to_double(key, parts[2]);
  if (!(step > 0.0) || hi < lo) throw ConfigError(key + ": need step > 0 and hi >= lo");
  return linear_grid(lo, hi, step);
}

std::string fmt(double v) {
  if (std::isinf(v)) return "inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_list(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt(v[i]);
  return s;
}

using Setter = std::function<void(RunConfig&, const std::string& key, const std::string& value)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"seed", [](RunConfig& c, auto& k, auto& v) { c.experiment.seed = to_integer<std::uint64_t>(k, v); }},
      {"workers", [](RunConfig& c, auto& k, auto& v) { c.experiment.uncertainty.workers = to_integer<int>(k, v); }},
      {"replicates", [](RunConfig& c, auto& k, auto& v) { c.experiment.replicates = to_integer<int>(k, v); }},
      {"icp.max_iterations",
       [](RunConfig& c, auto& k, auto& v) { c.experiment.uncertainty.icp.max_iterations = to_integer<int>(k, v); }},
      {"icp.translation_tol",
       [](RunConfig& c, auto& k, auto& v) { c.experiment.uncertainty.icp.translation_tol = to_double(k, v); }},
      {"icp.rotation_tol",
       [](RunConfig& c, auto& k, auto& v) { c.experiment.uncertainty.icp.rotation_tol = to_double(k, v); }},
      {"icp.max_correspondence_dist",
       [](RunConfig& c, auto& k, auto& v) { c.experiment.uncertainty.icp.max_correspondence_dist = to_double(k, v); }},
      {"icp.subsample_fraction",
       [](RunConfig& c, auto& k, auto& v) { c.experiment.uncertainty.icp.subsample_fraction = to_double(k, v); }},
      {"icp.outlier_trim_fraction",
       [](RunConfig& c, auto& k, auto& v) { c.experiment.uncertainty.icp.outlier_trim_fraction = to_double(k, v); }},
      {"sigma.rotation", [](RunConfig& c, auto& k, auto& v) { c.sigma_rotation = to_double(k, v); }},
      {"sigma.translation", [](RunConfig& c, auto& k, auto& v) { c.sigma_translation = to_double(k, v); }},
      {"overlap.distance",
       [](RunConfig& c, auto& k, auto& v) { c.experiment.uncertainty.overlap_distance = to_double(k, v); }},
      {"samples.count",
       [](RunConfig& c, auto& k, auto& v) { c.experiment.uncertainty.sample_count = to_integer<int>(k, v); }},
      {"samples.regularization",
       [](RunConfig& c, auto& k, auto& v) { c.experiment.uncertainty.regularization = to_double(k, v); }},
      {"kl.include_means",
       [](RunConfig& c, auto& k, auto& v) { c.experiment.uncertainty.kl_include_means = to_bool(k, v); }},
      {"grid.sn", [](RunConfig& c, auto& k, auto& v) { c.grid.sn_values = to_grid(k, v); }},
      {"grid.ip", [](RunConfig& c, auto& k, auto& v) { c.grid.ip_values = to_grid(k, v); }},
      {"grid.po", [](RunConfig& c, auto& k, auto& v) { c.grid.po_values = to_grid(k, v); }},
      {"grid.mode",
       [](RunConfig& c, auto&, auto& v) { c.grid_mode = grid_mode_from_string(v); }},
      {"shap.policy",
       [](RunConfig& c, auto& k, auto& v) {
         if (v == "constraint_elimination") {
           c.experiment.shap.policy = InfiniteWeightPolicy::kConstraintElimination;
         } else if (v == "large_weight") {
           c.experiment.shap.policy = InfiniteWeightPolicy::kLargeWeight;
         } else {
           throw ConfigError(k + ": expected constraint_elimination or large_weight, got '" + v + "'");
         }
       }},
      {"shap.large_weight", [](RunConfig& c, auto& k, auto& v) { c.experiment.shap.large_weight = to_double(k, v); }},
      {"sweep.setting",
       [](RunConfig& c, auto& k, auto& v) {
         const auto x = to_list(k, v);
         if (x.size() != 3) throw ConfigError(k + ": expected 3 values (sn, ip, po)");
         c.sweep_setting = {x[0], x[1], x[2]};
       }},
  };
  return table;
}

void set_bound(RunConfig& c, int j, const std::string& key, const std::string& value) {
  const auto v = to_list(key, value);
  if (v.size() != 2 || v[0] > v[1]) throw ConfigError(key + ": expected 'lo, hi' with lo <= hi");
  c.experiment.bounds.lower[j] = v[0];
  c.experiment.bounds.upper[j] = v[1];
}

}  // namespace

void RunConfig::finalize() {
  auto check = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
  };
  UncertaintyConfig& u = experiment.uncertainty;
  check(sigma_rotation > 0.0 && sigma_translation > 0.0, "sigma.rotation and sigma.translation must be > 0");
  u.base_covariance = diagonal_pose_covariance(sigma_rotation, sigma_translation);
  check(u.sample_count >= UncertaintyConfig::kMinSamples, "samples.count must be at least 7");
  check(u.workers >= 1, "workers must be at least 1");
  check(experiment.replicates >= 1, "replicates must be at least 1");
  check(u.overlap_distance > 0.0, "overlap.distance must be > 0");
  check(u.regularization >= 0.0, "samples.regularization must be >= 0");
  check(experiment.shap.large_weight > 0.0, "shap.large_weight must be > 0");
  try {
    u.icp.validate();
    grid.validate(experiment.bounds);
    experiment.bounds.check(sweep_setting);
  } catch (const PreconditionViolation& e) {
    throw ConfigError(e.what());
  }
}

KeyValues parse_key_values(const std::string& text, const std::string& origin) {
  KeyValues out;
  std::string section;
  std::stringstream in(text);
  int line_no = 0;
  for (std::string raw; std::getline(in, raw);) {
    ++line_no;
    const std::string line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    const std::string where = origin + ":" + std::to_string(line_no) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    if (key.empty()) throw ConfigError(where + "empty key");
    if (!section.empty()) key = section + "." + key;
    out[key] = value;
  }
  return out;
}

KeyValues read_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_key_values(buf.str(), path.string());
}

void apply_key_values(RunConfig& config, const KeyValues& values) {
  for (const auto& [key, value] : values) {
    if (key == "bounds.sn" || key == "bounds.ip" || key == "bounds.po") {
      set_bound(config, key == "bounds.sn" ? 0 : key == "bounds.ip" ? 1 : 2, key, value);
      continue;
    }
    const auto it = setters().find(key);
    if (it == setters().end()) throw ConfigError("unknown config key '" + key + "'");
    it->second(config, key, value);
  }
}

std::string snapshot(const RunConfig& c) {
  const ExperimentConfig& e = c.experiment;
  const UncertaintyConfig& u = e.uncertainty;
  std::ostringstream out;
  out << "seed = " << e.seed << "\n"
      << "workers = " << u.workers << "\n"
      << "replicates = " << e.replicates << "\n\n"
      << "[icp]\n"
      << "max_iterations = " << u.icp.max_iterations << "\n"
      << "translation_tol = " << fmt(u.icp.translation_tol) << "\n"
      << "rotation_tol = " << fmt(u.icp.rotation_tol) << "\n"
      << "max_correspondence_dist = " << fmt(u.icp.max_correspondence_dist) << "\n"
      << "subsample_fraction = " << fmt(u.icp.subsample_fraction) << "\n"
      << "outlier_trim_fraction = " << fmt(u.icp.outlier_trim_fraction) << "\n\n"
      << "[sigma]\n"
      << "rotation = " << fmt(c.sigma_rotation) << "\n"
      << "translation = " << fmt(c.sigma_translation) << "\n\n"
      << "[overlap]\ndistance = " << fmt(u.overlap_distance) << "\n\n"
      << "[samples]\ncount = " << u.sample_count << "\nregularization = " << fmt(u.regularization) << "\n\n"
      << "[kl]\ninclude_means = " << (u.kl_include_means ? "true" : "false") << "\n\n"
      << "[grid]\n"
      << "sn = " << fmt_list(c.grid.sn_values) << "\n"
      << "ip = " << fmt_list(c.grid.ip_values) << "\n"
      << "po = " << fmt_list(c.grid.po_values) << "\n"
      << "mode = " << to_string(c.grid_mode) << "\n\n"
      << "[shap]\n"
      << "policy = "
      << (e.shap.policy == InfiniteWeightPolicy::kConstraintElimination ? "constraint_elimination" : "large_weight")
      << "\nlarge_weight = " << fmt(e.shap.large_weight) << "\n\n"
      << "[sweep]\nsetting = " << fmt_list({c.sweep_setting.noise_sigma, c.sweep_setting.pose_scale,
                                            c.sweep_setting.overlap_reduction})
      << "\n\n[bounds]\n";
  for (int j = 0; j < 3; ++j) {
    out << kSourceNames[j] << " = " << fmt(e.bounds.lower[j]) << ", " << fmt(e.bounds.upper[j]) << "\n";
  }
  return out.str();
}

RunConfig resolve_config(const std::optional<std::filesystem::path>& explicit_path, const KeyValues& overrides) {
  RunConfig config;
  std::optional<std::filesystem::path> path = explicit_path;
  if (!path) {
    if (const char* env = std::getenv(kConfigEnvironmentVariable); env && *env) path = env;
  }
  if (path) apply_key_values(config, read_key_values(*path));
  apply_key_values(config, overrides);
  config.finalize();
  return config;
}

}  // namespace icpx
