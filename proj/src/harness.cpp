// Copyright 2026 The icpx Authors.
// SPDX-License-Identifier: Apache-2.0

#include "icpx/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <set>

#include "icpx/errors.hpp"
#include "icpx/random.hpp"

namespace icpx {

using nlohmann::ordered_json;

std::vector<double> linear_grid(double lo, double hi, double step) {
  require(step > 0.0 && hi >= lo, "linear_grid: need step > 0 and hi >= lo");
  const auto n = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
  std::vector<double> out;
  for (long i = 0; i <= n; ++i) out.push_back(std::round((lo + step * static_cast<double>(i)) * 1e9) / 1e9);
  return out;
}

PerturbationGrid PerturbationGrid::standard() {
  return {linear_grid(0.0, 0.1, 0.01), linear_grid(1.0, 2.0, 0.1), linear_grid(0.0, 0.1, 0.01)};
}

const std::vector<double>& PerturbationGrid::values(Source s) const {
  switch (s) {
    case Source::kSensorNoise: return sn_values;
    case Source::kInitialPose: return ip_values;
    case Source::kPartialOverlap: return po_values;
  }
  return sn_values;
}

void PerturbationGrid::validate(const PerturbationBounds& bounds) const {
  for (int j = 0; j < 3; ++j) {
    const auto& v = values(static_cast<Source>(j));
    const std::string name = kSourceNames[j];
    require(!v.empty(), "grid." + name + " is empty");
    require(std::is_sorted(v.begin(), v.end()), "grid." + name + " must be sorted ascending");
    require(v.front() >= bounds.lower[j] && v.back() <= bounds.upper[j],
            "grid." + name + " leaves [" + std::to_string(bounds.lower[j]) + ", " +
                std::to_string(bounds.upper[j]) + "]");
  }
}

std::string to_string(GridMode mode) { return mode == GridMode::kPerAxis ? "per_axis" : "full_product"; }

GridMode grid_mode_from_string(const std::string& name) {
  if (name == "per_axis") return GridMode::kPerAxis;
  if (name == "full_product") return GridMode::kFullProduct;
  throw ConfigError("unknown grid mode '" + name + "' (expected per_axis or full_product)");
}

std::vector<PerturbationSetting> grid_settings(const PerturbationGrid& grid, GridMode mode) {
  std::vector<PerturbationSetting> out;
  if (mode == GridMode::kPerAxis) {
    for (int j = 0; j < 3; ++j) {
      for (double v : grid.values(static_cast<Source>(j))) {
        auto x = kReferenceSetting.values();
        x[j] = v;
        out.push_back(PerturbationSetting::from_values(x));
      }
    }
    return out;
  }
  for (double sn : grid.sn_values)
    for (double ip : grid.ip_values)
      for (double po : grid.po_values) out.push_back({sn, ip, po});
  return out;
}

// ---------------------------------------------------------------------------

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) h = (h ^ c) * 0x100000001b3ULL;
  return h;
}

std::string error_kind(const std::exception& e) {
  if (dynamic_cast<const InsufficientOverlap*>(&e)) return "InsufficientOverlap";
  if (dynamic_cast<const TooFewSamples*>(&e)) return "TooFewSamples";
  if (dynamic_cast<const SingularCovariance*>(&e)) return "SingularCovariance";
  if (dynamic_cast<const SingularDesign*>(&e)) return "SingularDesign";
  if (dynamic_cast<const IoError*>(&e)) return "IoError";
  if (dynamic_cast<const ParseError*>(&e)) return "ParseError";
  if (dynamic_cast<const PreconditionViolation*>(&e)) return "PreconditionViolation";
  return "Error";
}

}  // namespace

std::uint64_t pseudo_true_seed(std::uint64_t master, const std::string& pair_id) {
  return derive_seed(master, {tag(SeedStage::kPseudoTrue), fnv1a(pair_id)});
}

PairExplainer::PairExplainer(ScanPair pair, std::string sequence, ExperimentConfig config,
                             std::optional<PseudoTrueCache> pseudo_true)
    : sequence_(std::move(sequence)), config_(std::move(config)) {
  require(config_.replicates >= 1, "PairExplainer: replicates must be >= 1");
  context_ = prepare_pair(std::move(pair), config_.uncertainty.overlap_distance);
  const std::string& id = context_->pair.id;
  const std::uint64_t seed = pseudo_true_seed(config_.seed, id);
  if (pseudo_true && pseudo_true->pair_id == id && pseudo_true->seed == seed) {
    pseudo_true_ = *pseudo_true;
    return;
  }
  const PoseSampleSet set = sample_pose_estimates({context_, kReferenceSetting, seed}, config_.uncertainty);
  pseudo_true_.pair_id = id;
  pseudo_true_.seed = seed;
  pseudo_true_.samples = static_cast<int>(set.samples.size());
  pseudo_true_.failures = set.failures;
  pseudo_true_.distribution = fit_gaussian(set, config_.uncertainty.regularization);
}

std::uint64_t PairExplainer::replicate_seed(int replicate) const {
  return derive_seed(config_.seed, {tag(SeedStage::kEvaluation), fnv1a(context_->pair.id),
                                    static_cast<std::uint64_t>(replicate)});
}

double PairExplainer::uncertainty(const PerturbationSetting& x, int replicate) {
  const auto key = std::make_pair(replicate, x.values());
  if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  const double f = estimate_uncertainty({context_, x, replicate_seed(replicate)},
                                        pseudo_true_.distribution, config_.uncertainty);
  cache_.emplace(key, f);
  return f;
}

ExplanationRecord PairExplainer::explain(const PerturbationSetting& x, int replicate) {
  config_.bounds.check(x);
  const auto start = std::chrono::steady_clock::now();
  ExplanationRecord r;
  r.sequence = sequence_;
  r.pair_id = context_->pair.id;
  r.setting = x;
  r.replicate = replicate;
  r.seed = replicate_seed(replicate);
  r.explanation = icpx::explain([&](const PerturbationSetting& s) { return uncertainty(s, replicate); }, x,
                                kReferenceSetting, config_.shap);
  r.uncertainty = r.explanation.f_full;
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

namespace {

void emit(ExperimentResult& result, const ExperimentSinks& sinks, ExplanationRecord r) {
  if (sinks.on_record) sinks.on_record(r);
  result.records.push_back(std::move(r));
}

void emit(ExperimentResult& result, const ExperimentSinks& sinks, ErrorRecord e) {
  if (sinks.on_error) sinks.on_error(e);
  result.errors.push_back(std::move(e));
}

}  // namespace

ExperimentResult run_grid_experiment(const ScanPair& pair, const std::string& sequence,
                                     const PerturbationGrid& grid, GridMode mode,
                                     const ExperimentConfig& config, const ExperimentSinks& sinks,
                                     std::optional<PseudoTrueCache> pseudo_true) {
  grid.validate(config.bounds);
  PairExplainer explainer(pair, sequence, config, std::move(pseudo_true));
  ExperimentResult result;
  result.pseudo_true.push_back(explainer.pseudo_true());
  for (const PerturbationSetting& x : grid_settings(grid, mode)) {
    for (int rep = 0; rep < config.replicates; ++rep) {
      try {
        emit(result, sinks, explainer.explain(x, rep));
      } catch (const Error& e) {
        emit(result, sinks, ErrorRecord{sequence, pair.id, x, rep, error_kind(e), e.what()});
      }
    }
  }
  result.evaluations = explainer.evaluations();
  return result;
}

// ---------------------------------------------------------------------------

SequenceManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest '" + path.string() + "'");
  ordered_json doc;
  try {
    doc = ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  SequenceManifest m;
  try {
    m.sequence = doc.at("sequence").get<std::string>();
    const auto base = path.parent_path();
    for (const auto& e : doc.at("entries")) {
      ManifestEntry entry;
      entry.cloud = e.at("cloud").get<std::string>();
      entry.pose = e.at("pose").get<std::string>();
      if (entry.cloud.is_relative()) entry.cloud = base / entry.cloud;
      if (entry.pose.is_relative()) entry.pose = base / entry.pose;
      m.entries.push_back(std::move(entry));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  if (m.entries.size() < 2) {
    throw ParseError(path.string() + ": a manifest needs at least 2 entries, found " +
                     std::to_string(m.entries.size()));
  }
  for (std::size_t i = 0; i < m.entries.size(); ++i) {
    for (const auto& file : {m.entries[i].cloud, m.entries[i].pose}) {
      if (!std::filesystem::exists(file)) {
        throw IoError(path.string() + ": entry " + std::to_string(i) + ": missing file '" + file.string() + "'");
      }
    }
  }
  return m;
}

void save_manifest(const SequenceManifest& manifest, const std::filesystem::path& path) {
  ordered_json doc;
  doc["sequence"] = manifest.sequence;
  doc["entries"] = ordered_json::array();
  for (const auto& e : manifest.entries) {
    doc["entries"].push_back({{"cloud", e.cloud.string()}, {"pose", e.pose.string()}});
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << doc.dump(2) << '\n';
}

ScanPair load_pair(const SequenceManifest& manifest, std::size_t i) {
  require(i + 1 < manifest.entries.size(), "load_pair: index out of range");
  const auto& a = manifest.entries[i];
  const auto& b = manifest.entries[i + 1];
  return {std::to_string(i) + "-" + std::to_string(i + 1),
          PointCloud(load_cloud(a.cloud).points(), Frame::kLocal),
          PointCloud(load_cloud(b.cloud).points(), Frame::kLocal), load_pose(a.pose), load_pose(b.pose)};
}

ExperimentResult run_fixed_setting_sweep(const SequenceManifest& manifest, const PerturbationSetting& x,
                                         const ExperimentConfig& config, const ExperimentSinks& sinks) {
  config.bounds.check(x);
  require(manifest.entries.size() >= 2, "run_fixed_setting_sweep: manifest needs at least 2 entries");
  ExperimentResult result;
  for (std::size_t i = 0; i + 1 < manifest.entries.size(); ++i) {
    const std::string id = std::to_string(i) + "-" + std::to_string(i + 1);
    std::optional<PairExplainer> explainer;
    try {
      explainer.emplace(load_pair(manifest, i), manifest.sequence, config);
    } catch (const Error& e) {
      emit(result, sinks, ErrorRecord{manifest.sequence, id, x, -1, error_kind(e), e.what()});
      continue;
    }
    result.pseudo_true.push_back(explainer->pseudo_true());
    for (int rep = 0; rep < config.replicates; ++rep) {
      try {
        emit(result, sinks, explainer->explain(x, rep));
      } catch (const Error& e) {
        emit(result, sinks, ErrorRecord{manifest.sequence, id, x, rep, error_kind(e), e.what()});
      }
    }
    result.evaluations += explainer->evaluations();
  }
  return result;
}

// ---------------------------------------------------------------------------

double quantile(std::vector<double> values, double q) {
  require(!values.empty(), "quantile: empty input");
  require(q >= 0.0 && q <= 1.0, "quantile: q must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

double median(std::vector<double> values) { return quantile(std::move(values), 0.5); }

OutlierSplit remove_outliers_iqr(const std::vector<double>& values) {
  require(values.size() >= 4, "remove_outliers_iqr: need at least 4 values");
  const double q1 = quantile(values, 0.25), q3 = quantile(values, 0.75);
  const double iqr = q3 - q1;
  const double lo = q1 - 1.5 * iqr, hi = q3 + 1.5 * iqr;
  OutlierSplit split;
  for (double v : values) (v < lo || v > hi ? split.outliers : split.inliers).push_back(v);
  return split;
}

std::vector<MedianRow> median_table(const std::vector<ExplanationRecord>& records) {
  if (records.empty()) throw EmptyGroup("median_table: no records");
  std::map<std::string, std::array<std::vector<double>, 3>> groups;
  for (const auto& r : records) {
    for (int j = 0; j < 3; ++j) groups[r.sequence][j].push_back(r.explanation.phi[j]);
  }
  std::vector<MedianRow> rows;
  for (const auto& [sequence, phis] : groups) {
    MedianRow row;
    row.sequence = sequence;
    row.records = phis[0].size();
    for (int j = 0; j < 3; ++j) {
      std::vector<double> kept = phis[j].size() >= 4 ? remove_outliers_iqr(phis[j]).inliers : phis[j];
      if (kept.empty()) throw EmptyGroup("median_table: no inliers for " + sequence);
      row.inliers[j] = kept.size();
      row.phi[j] = median(std::move(kept));
    }
    rows.push_back(row);
  }
  return rows;
}

std::vector<SettingMedian> median_by_setting(const std::vector<ExplanationRecord>& records) {
  std::vector<PerturbationSetting> order;
  std::map<PerturbationSetting, std::vector<const ExplanationRecord*>> groups;
  for (const auto& r : records) {
    auto& g = groups[r.setting];
    if (g.empty()) order.push_back(r.setting);
    g.push_back(&r);
  }
  std::vector<SettingMedian> out;
  for (const auto& x : order) {
    const auto& g = groups[x];
    SettingMedian row;
    row.setting = x;
    row.records = g.size();
    std::vector<double> f, f0;
    for (const auto* r : g) {
      f.push_back(r->explanation.f_full);
      f0.push_back(r->explanation.f_empty);
    }
    for (int j = 0; j < 3; ++j) {
      std::vector<double> phi;
      for (const auto* r : g) phi.push_back(r->explanation.phi[j]);
      row.phi[j] = median(std::move(phi));
    }
    row.uncertainty = median(std::move(f));
    row.f_empty = median(std::move(f0));
    out.push_back(row);
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

ordered_json setting_json(const PerturbationSetting& x) {
  return {{"sn", x.noise_sigma}, {"ip", x.pose_scale}, {"po", x.overlap_reduction}};
}

std::string format_double(double v) {
  return ordered_json(v).dump();
}

std::ofstream open_for_writing(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

}  // namespace

std::string record_to_json(const ExplanationRecord& r) {
  const ShapExplanation& e = r.explanation;
  ordered_json j;
  j["sequence"] = r.sequence;
  j["pair"] = r.pair_id;
  j["replicate"] = r.replicate;
  j["seed"] = r.seed;
  j["setting"] = setting_json(r.setting);
  j["phi"] = {{"sn", e.phi[0]}, {"ip", e.phi[1]}, {"po", e.phi[2]}};
  j["f_empty"] = e.f_empty;
  j["f_full"] = e.f_full;
  j["uncertainty"] = r.uncertainty;
  j["local_accuracy_error"] = e.local_accuracy_error();
  ordered_json coalitions = ordered_json::object();
  for (const Coalition& z : enumerate_coalitions(3)) coalitions[z.to_string()] = e.coalition_values[z.mask()];
  j["coalitions"] = coalitions;
  return j.dump();
}

std::string error_to_json(const ErrorRecord& err) {
  ordered_json j;
  j["sequence"] = err.sequence;
  j["pair"] = err.pair_id;
  j["setting"] = err.setting ? setting_json(*err.setting) : ordered_json(nullptr);
  j["replicate"] = err.replicate;
  j["kind"] = err.kind;
  j["message"] = err.message;
  return j.dump();
}

void write_median_table(const std::vector<MedianRow>& rows, const std::filesystem::path& path) {
  auto out = open_for_writing(path);
  out << "sequence,records,phi_sn,phi_ip,phi_po,inliers_sn,inliers_ip,inliers_po\n";
  for (const auto& r : rows) {
    out << r.sequence << ',' << r.records;
    for (double v : r.phi) out << ',' << format_double(v);
    for (auto n : r.inliers) out << ',' << n;
    out << '\n';
  }
}

void write_setting_medians(const std::vector<SettingMedian>& rows, const std::filesystem::path& path) {
  auto out = open_for_writing(path);
  out << "sn,ip,po,records,phi_sn,phi_ip,phi_po,uncertainty,f_empty\n";
  for (const auto& r : rows) {
    for (double v : r.setting.values()) out << format_double(v) << ',';
    out << r.records;
    for (double v : r.phi) out << ',' << format_double(v);
    out << ',' << format_double(r.uncertainty) << ',' << format_double(r.f_empty) << '\n';
  }
}

std::filesystem::path emit_plot_data(const std::vector<ExplanationRecord>& records, PlotKind kind,
                                     const std::filesystem::path& directory, const std::string& stem,
                                     const PlotOptions& options) {
  if (records.empty()) throw PreconditionViolation("emit_plot_data: no records");
  std::filesystem::create_directories(directory);
  const auto csv_path = directory / (stem + ".csv");
  auto csv = open_for_writing(csv_path);
  ordered_json meta;
  meta["records"] = records.size();

  if (kind == PlotKind::kSummary) {
    meta["kind"] = "summary";
    meta["columns"] = {"feature", "phi", "value", "normalized_value", "pair", "replicate"};
    meta["normalization"] = {{"lower", options.bounds.lower}, {"upper", options.bounds.upper}};
    csv << "feature,phi,value,normalized_value,pair,replicate\n";
    for (int j = 0; j < 3; ++j) {
      const double lo = options.bounds.lower[j], hi = options.bounds.upper[j];
      for (const auto& r : records) {
        const double v = r.setting.values()[j];
        csv << kSourceNames[j] << ',' << format_double(r.explanation.phi[j]) << ',' << format_double(v) << ','
            << format_double(hi > lo ? (v - lo) / (hi - lo) : 0.0) << ',' << r.pair_id << ',' << r.replicate
            << '\n';
      }
    }
  } else if (kind == PlotKind::kWaterfall) {
    if (records.size() != 1) {
      throw ArityMismatch("emit_plot_data: waterfall needs exactly 1 record, got " +
                          std::to_string(records.size()));
    }
    const auto& r = records.front();
    const ShapExplanation& e = r.explanation;
    std::array<int, 3> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return std::abs(e.phi[a]) > std::abs(e.phi[b]); });
    meta["kind"] = "waterfall";
    meta["columns"] = {"step", "feature", "value", "phi", "start", "end"};
    meta["pair"] = r.pair_id;
    meta["setting"] = setting_json(r.setting);
    meta["f_empty"] = e.f_empty;
    meta["f_full"] = e.f_full;
    csv << "step,feature,value,phi,start,end\n";
    double cumulative = e.f_empty;
    for (int step = 0; step < 3; ++step) {
      const int j = order[step];
      const double next = cumulative + e.phi[j];
      csv << step << ',' << kSourceNames[j] << ',' << format_double(r.setting.values()[j]) << ','
          << format_double(e.phi[j]) << ',' << format_double(cumulative) << ',' << format_double(next) << '\n';
      cumulative = next;
    }
    if (std::abs(cumulative - e.f_full) > 1e-9 * std::max(1.0, std::abs(e.f_full))) {
      throw Error("emit_plot_data: waterfall ends at " + format_double(cumulative) + ", not f_full = " +
                  format_double(e.f_full));
    }
  } else {
    const int f = static_cast<int>(options.feature);
    const int c = static_cast<int>(options.color_feature);
    meta["kind"] = "dependence";
    meta["feature"] = kSourceNames[f];
    meta["color_feature"] = kSourceNames[c];
    meta["columns"] = {"value", "phi", "color_value", "pair", "replicate"};
    csv << "value,phi,color_value,pair,replicate\n";
    for (const auto& r : records) {
      csv << format_double(r.setting.values()[f]) << ',' << format_double(r.explanation.phi[f]) << ','
          << format_double(r.setting.values()[c]) << ',' << r.pair_id << ',' << r.replicate << '\n';
    }
  }
  if (!csv) throw IoError("write failed for '" + csv_path.string() + "'");
  auto sidecar = open_for_writing(directory / (stem + ".json"));
  sidecar << meta.dump(2) << '\n';
  return csv_path;
}

}  // namespace icpx
