// Copyright 2026 The icpx Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Experiment protocols on top of the explainer: perturbation grids on one
// pair, fixed-setting sweeps over a scan sequence, IQR outlier removal,
// median tables and plot data.

#ifndef ICPX_HARNESS_HPP
#define ICPX_HARNESS_HPP

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "icpx/kernel_shap.hpp"
#include "icpx/perturbation.hpp"
#include "icpx/uncertainty.hpp"

namespace icpx {

/// Evenly spaced values lo, lo + step, ..., hi (inclusive), rounded to 1e-9
/// so 0.1 + 0.2 style drift never leaks into settings.
std::vector<double> linear_grid(double lo, double hi, double step);

struct PerturbationGrid {
  std::vector<double> sn_values;
  std::vector<double> ip_values;
  std::vector<double> po_values;

  /// sigma 0..0.1 m step 0.01, s 1..2 step 0.1, lambda 0..0.1 step 0.01.
  static PerturbationGrid standard();

  const std::vector<double>& values(Source s) const;
  /// Sorted ascending and inside `bounds`, else PreconditionViolation.
  void validate(const PerturbationBounds& bounds = {}) const;
  bool operator==(const PerturbationGrid&) const = default;
};

enum class GridMode { kPerAxis, kFullProduct };

std::string to_string(GridMode mode);
GridMode grid_mode_from_string(const std::string& name);

/// Per-axis: each axis swept with the others at reference, axis order
/// sn, ip, po (the reference setting appears once per axis). Full product:
/// lexicographic in (sn, ip, po).
std::vector<PerturbationSetting> grid_settings(const PerturbationGrid& grid, GridMode mode);

struct ExperimentConfig {
  UncertaintyConfig uncertainty;
  ShapOptions shap;
  std::uint64_t seed = 0;
  int replicates = 1;
  PerturbationBounds bounds;
};

struct ExplanationRecord {
  std::string sequence;
  std::string pair_id;
  PerturbationSetting setting;
  int replicate = 0;
  std::uint64_t seed = 0;  // evaluation stream of this replicate
  ShapExplanation explanation;
  double uncertainty = 0.0;  // f(x) = f_full
  double seconds = 0.0;      // wall time; not part of the serialized record
};

struct ErrorRecord {
  std::string sequence;
  std::string pair_id;
  std::optional<PerturbationSetting> setting;
  int replicate = -1;
  std::string kind;
  std::string message;
};

/// Explains settings on one pair. The pseudo-true distribution is computed
/// once (or taken from a cache) and every uncertainty evaluation is memoised
/// on (replicate, setting), so coalitions shared between settings cost one
/// evaluation per replicate.
///
/// All settings of one replicate share that replicate's random streams, so
/// f(x) - f(r) differences are not swamped by sampling noise.
class PairExplainer {
 public:
  PairExplainer(ScanPair pair, std::string sequence, ExperimentConfig config,
                std::optional<PseudoTrueCache> pseudo_true = std::nullopt);

  const PairContext& context() const { return *context_; }
  const std::string& sequence() const { return sequence_; }
  const PseudoTrueCache& pseudo_true() const { return pseudo_true_; }
  std::uint64_t replicate_seed(int replicate) const;

  /// KL(perturbed || pseudo-true) at x for a replicate, memoised.
  double uncertainty(const PerturbationSetting& x, int replicate);
  ExplanationRecord explain(const PerturbationSetting& x, int replicate);

  std::size_t evaluations() const { return cache_.size(); }

 private:
  std::shared_ptr<const PairContext> context_;
  std::string sequence_;
  ExperimentConfig config_;
  PseudoTrueCache pseudo_true_;
  std::map<std::pair<int, std::array<double, 3>>, double> cache_;
};

/// Seed of the pseudo-true stream for a pair.
std::uint64_t pseudo_true_seed(std::uint64_t master, const std::string& pair_id);

struct ExperimentSinks {
  std::function<void(const ExplanationRecord&)> on_record;
  std::function<void(const ErrorRecord&)> on_error;
};

struct ExperimentResult {
  std::vector<ExplanationRecord> records;
  std::vector<ErrorRecord> errors;
  std::vector<PseudoTrueCache> pseudo_true;
  std::size_t evaluations = 0;
};

/// Explains every grid setting for each replicate, in (setting, replicate)
/// order. Settings that fail (for example x_po at or above the pair's
/// overlap ratio) are logged to the error sink and skipped.
ExperimentResult run_grid_experiment(const ScanPair& pair, const std::string& sequence,
                                     const PerturbationGrid& grid, GridMode mode,
                                     const ExperimentConfig& config, const ExperimentSinks& sinks = {},
                                     std::optional<PseudoTrueCache> pseudo_true = std::nullopt);

// ---------------------------------------------------------------------------
// Sequences

struct ManifestEntry {
  std::filesystem::path cloud;
  std::filesystem::path pose;
};

/// JSON: {"sequence": name, "entries": [{"cloud": path, "pose": path}, ...]}.
/// Relative paths resolve against the manifest's directory.
struct SequenceManifest {
  std::string sequence;
  std::vector<ManifestEntry> entries;
};

/// Throws ParseError on malformed JSON or fewer than 2 entries, IoError
/// naming the entry when a file is missing.
SequenceManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const SequenceManifest& manifest, const std::filesystem::path& path);

/// Entries i (source) and i + 1 (reference), id "<i>-<i+1>".
ScanPair load_pair(const SequenceManifest& manifest, std::size_t i);

/// One explanation per contiguous pair and replicate. Pairs that fail to
/// load or explain are logged and the sweep continues.
ExperimentResult run_fixed_setting_sweep(const SequenceManifest& manifest, const PerturbationSetting& x,
                                         const ExperimentConfig& config, const ExperimentSinks& sinks = {});

// ---------------------------------------------------------------------------
// Statistics

/// Linear interpolation between order statistics at q (n - 1).
double quantile(std::vector<double> values, double q);
double median(std::vector<double> values);

struct OutlierSplit {
  std::vector<double> inliers;
  std::vector<double> outliers;
};

/// Tukey fences [Q1 - 1.5 IQR, Q3 + 1.5 IQR]; input order is kept within
/// each part. Requires at least 4 values.
OutlierSplit remove_outliers_iqr(const std::vector<double>& values);

struct MedianRow {
  std::string sequence;
  std::array<double, 3> phi{};           // sn, ip, po
  std::array<std::size_t, 3> inliers{};  // per source
  std::size_t records = 0;
};

/// Per-sequence medians of phi after per-source IQR removal (skipped for
/// groups under 4 records). Rows sorted by sequence name.
std::vector<MedianRow> median_table(const std::vector<ExplanationRecord>& records);

struct SettingMedian {
  PerturbationSetting setting;
  std::array<double, 3> phi{};  // median over records at this setting
  double uncertainty = 0.0;     // median f(x)
  double f_empty = 0.0;         // median f(r)
  std::size_t records = 0;
};

/// Medians across replicates (and pairs) per setting, in first-seen order.
std::vector<SettingMedian> median_by_setting(const std::vector<ExplanationRecord>& records);

// ---------------------------------------------------------------------------
// Serialization and plot data

/// One JSON object, no trailing newline. Keys are emitted in a fixed order
/// and doubles in shortest round-trip form, so equal records give equal
/// bytes. Wall time is left out.
std::string record_to_json(const ExplanationRecord& record);
std::string error_to_json(const ErrorRecord& error);
void write_median_table(const std::vector<MedianRow>& rows, const std::filesystem::path& path);
void write_setting_medians(const std::vector<SettingMedian>& rows, const std::filesystem::path& path);

enum class PlotKind { kSummary, kWaterfall, kDependence };

struct PlotOptions {
  Source feature = Source::kSensorNoise;        // dependence: x axis
  Source color_feature = Source::kPartialOverlap;  // dependence: colour
  PerturbationBounds bounds;                    // summary: normalisation range
};

/// Writes `<stem>.csv` and `<stem>.json` (metadata) and returns the CSV
/// path. Summary: one row per record and source with the value normalised to
/// [0, 1] over the bounds. Waterfall: exactly one record (else
/// ArityMismatch), bars by decreasing |phi| from f_empty to f_full.
/// Dependence: (feature value, phi, colour value) per record.
std::filesystem::path emit_plot_data(const std::vector<ExplanationRecord>& records, PlotKind kind,
                                     const std::filesystem::path& directory, const std::string& stem,
                                     const PlotOptions& options = {});

}  // namespace icpx

#endif  // ICPX_HARNESS_HPP
