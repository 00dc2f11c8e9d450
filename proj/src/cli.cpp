// Copyright 2026 The icpx Authors.
// SPDX-License-Identifier: Apache-2.0

#include "icpx/cli.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <ostream>

#include "icpx/config.hpp"
#include "icpx/errors.hpp"
#include "icpx/harness.hpp"
#include "icpx/random.hpp"
#include "icpx/synthetic.hpp"

namespace icpx {
namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

struct GlobalOptions {
  std::string config;
  std::uint64_t seed = 0;
  int workers = 1;
  bool kl_include_means = false;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* workers_opt = nullptr;
};

RunConfig resolve(const GlobalOptions& g, KeyValues overrides = {}) {
  if (g.seed_opt->count()) overrides["seed"] = std::to_string(g.seed);
  if (g.workers_opt->count()) overrides["workers"] = std::to_string(g.workers);
  if (g.kl_include_means) overrides["kl.include_means"] = "true";
  std::optional<fs::path> path;
  if (!g.config.empty()) path = g.config;
  return resolve_config(path, overrides);
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

// --- register ---------------------------------------------------------------

struct RegisterOptions {
  std::string source, reference, init, out;
};

int cmd_register(const RegisterOptions& o, const GlobalOptions& g, std::ostream& out) {
  const RunConfig config = resolve(g);
  const PointCloud source = load_cloud(o.source);
  const PointCloud reference = load_cloud(o.reference);
  const RigidTransformd init = o.init.empty() ? RigidTransformd::Identity() : load_pose(o.init);
  Rng rng = make_rng(derive_seed(config.experiment.seed, {tag(SeedStage::kIcp)}));
  const IcpResult r = run_icp(source, reference, init, config.experiment.uncertainty.icp, rng);
  save_pose(r.estimate, o.out);

  ordered_json j;
  j["converged"] = r.converged;
  j["iterations"] = r.iterations;
  j["final_cost"] = r.final_cost;
  j["correspondences"] = r.correspondences;
  std::vector<double> m;
  for (int row = 0; row < 4; ++row)
    for (int col = 0; col < 4; ++col) m.push_back(r.estimate.matrix()(row, col));
  j["pose"] = m;
  j["pose_file"] = o.out;
  out << j.dump() << '\n';
  return r.converged ? kExitOk : kExitNotConverged;
}

// --- explain ----------------------------------------------------------------

struct ExplainOptions {
  std::string manifest, plot_dir;
  std::size_t pair = 0;
  int replicate = 0;
  double sn = 0.0, ip = 1.0, po = 0.0;
};

int cmd_explain(const ExplainOptions& o, const GlobalOptions& g, std::ostream& out) {
  const RunConfig config = resolve(g);
  const PerturbationSetting x{o.sn, o.ip, o.po};
  config.experiment.bounds.check(x);  // before any file is read

  const SequenceManifest manifest = load_manifest(o.manifest);
  PairExplainer explainer(load_pair(manifest, o.pair), manifest.sequence, config.experiment);
  const ExplanationRecord record = explainer.explain(x, o.replicate);
  out << record_to_json(record) << '\n';
  if (!o.plot_dir.empty()) emit_plot_data({record}, PlotKind::kWaterfall, o.plot_dir, "waterfall");
  return kExitOk;
}

// --- experiment -------------------------------------------------------------

struct ExperimentOptions {
  std::string manifest, out, mode = "grid", grid_mode;
  std::size_t pair = 0;
  bool reuse_pseudo_true = false;
};

fs::path cache_path(const fs::path& out_dir, const std::string& pair_id) {
  return out_dir / "pseudo_true" / (pair_id + ".txt");
}

int cmd_experiment(const ExperimentOptions& o, const GlobalOptions& g, std::ostream& err) {
  if (o.mode != "grid" && o.mode != "sweep") throw ConfigError("--mode must be grid or sweep");
  KeyValues overrides;
  if (!o.grid_mode.empty()) overrides["grid.mode"] = o.grid_mode;
  const RunConfig config = resolve(g, overrides);
  const SequenceManifest manifest = load_manifest(o.manifest);

  const fs::path dir = o.out;
  fs::create_directories(dir / "pseudo_true");
  open_output(dir / "config.snapshot") << snapshot(config);

  auto records_out = open_output(dir / "records.jsonl");
  auto errors_out = open_output(dir / "errors.jsonl");
  std::size_t done = 0;
  ExperimentSinks sinks;
  sinks.on_record = [&](const ExplanationRecord& r) {
    records_out << record_to_json(r) << '\n' << std::flush;
    err << "[" << ++done << "] " << r.pair_id << " " << to_string(r.setting) << " rep " << r.replicate
        << "  f = " << r.uncertainty << "  phi = (" << r.explanation.phi[0] << ", " << r.explanation.phi[1] << ", "
        << r.explanation.phi[2] << ")\n";
  };
  sinks.on_error = [&](const ErrorRecord& e) {
    errors_out << error_to_json(e) << '\n' << std::flush;
    err << "skipped " << e.pair_id << ": " << e.message << '\n';
  };

  ExperimentResult result;
  if (o.mode == "grid") {
    std::optional<PseudoTrueCache> cached;
    const std::string id = std::to_string(o.pair) + "-" + std::to_string(o.pair + 1);
    if (o.reuse_pseudo_true && fs::exists(cache_path(dir, id))) cached = read_pseudo_true_cache(cache_path(dir, id));
    result = run_grid_experiment(load_pair(manifest, o.pair), manifest.sequence, config.grid, config.grid_mode,
                                 config.experiment, sinks, cached);
  } else {
    result = run_fixed_setting_sweep(manifest, config.sweep_setting, config.experiment, sinks);
  }

  for (const auto& cache : result.pseudo_true) write_pseudo_true_cache(cache, cache_path(dir, cache.pair_id));
  auto timings = open_output(dir / "timings.csv");
  timings << "pair,replicate,sn,ip,po,seconds\n";
  for (const auto& r : result.records) {
    timings << r.pair_id << ',' << r.replicate << ',' << r.setting.noise_sigma << ',' << r.setting.pose_scale << ','
            << r.setting.overlap_reduction << ',' << r.seconds << '\n';
  }
  if (result.records.empty()) {
    err << "no records produced\n";
    return kExitError;
  }
  write_median_table(median_table(result.records), dir / "medians.csv");
  write_setting_medians(median_by_setting(result.records), dir / "setting_medians.csv");
  PlotOptions plot;
  plot.bounds = config.experiment.bounds;
  emit_plot_data(result.records, PlotKind::kSummary, dir, "summary", plot);
  for (int j = 0; j < 3; ++j) {
    plot.feature = static_cast<Source>(j);
    plot.color_feature = static_cast<Source>((j + 1) % 3);
    emit_plot_data(result.records, PlotKind::kDependence, dir, std::string("dependence_") + kSourceNames[j], plot);
  }
  err << result.records.size() << " records, " << result.errors.size() << " errors, " << result.evaluations
      << " uncertainty evaluations -> " << dir.string() << '\n';
  return kExitOk;
}

// --- synth ------------------------------------------------------------------

struct SynthOptions {
  std::string out;
  Eigen::Index points = 20000;
  std::size_t scans = 2;
};

constexpr const char* kDeskPreset = R"(# Settings for the synthetic room at desk scale. A 0.2 m correspondence
# gate keeps the non-overlapping ends of the scans from dragging the
# estimate, and 12 iterations bound the cost of a 100-sample evaluation.
replicates = 5

[icp]
max_iterations = 12
max_correspondence_dist = 0.2
)";

int cmd_synth(const SynthOptions& o, const GlobalOptions& g, std::ostream& out) {
  if (o.scans < 2) throw ConfigError("--scans must be at least 2");
  if (o.points < 3) throw ConfigError("--points must be at least 3");
  RoomSceneOptions options;
  options.points_per_scan = o.points;
  // Consecutive windows keep 4.7 m of the 7 m each scan sees in common.
  options.windows.clear();
  for (std::size_t i = 0; i < o.scans; ++i) {
    const double lo = 2.3 * static_cast<double>(i % 2);
    options.windows.emplace_back(lo, lo + 7.0);
  }
  const SyntheticScene scene = make_room_scene(options, g.seed);
  const fs::path dir = o.out;
  fs::create_directories(dir);
  SequenceManifest manifest{"synthetic-room", {}};
  for (std::size_t i = 0; i < scene.scans.size(); ++i) {
    const std::string cloud = "scan_" + std::to_string(i) + ".csv";
    const std::string pose = "pose_" + std::to_string(i) + ".txt";
    save_cloud(scene.scans[i], dir / cloud);
    save_pose(scene.poses[i], dir / pose);
    manifest.entries.push_back({cloud, pose});
  }
  save_manifest(manifest, dir / "manifest.json");
  open_output(dir / "experiment.cfg") << kDeskPreset;
  out << "wrote " << scene.scans.size() << " scans to " << dir.string() << '\n';
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"ICP registration, pose uncertainty and its attribution to sensor noise, initial pose and "
               "partial overlap"};
  app.name("icpx");
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  app.add_option("--config", g.config, "Config file (default: $ICP_EXPLAIN_CONFIG)");
  g.seed_opt = app.add_option("--seed", g.seed, "Master seed");
  g.workers_opt = app.add_option("--workers", g.workers, "Worker threads")->check(CLI::PositiveNumber);
  app.add_flag("--kl-include-means", g.kl_include_means, "Add the Mahalanobis mean term to the KL divergence");

  RegisterOptions reg;
  auto* reg_cmd = app.add_subcommand("register", "Register a source cloud onto a reference cloud");
  reg_cmd->add_option("source", reg.source, "Source cloud (.csv or .ply)")->required();
  reg_cmd->add_option("reference", reg.reference, "Reference cloud (.csv or .ply)")->required();
  reg_cmd->add_option("--init", reg.init, "Initial pose file (default: identity)");
  reg_cmd->add_option("--out", reg.out, "Where to write the estimated pose")->required();

  ExplainOptions ex;
  auto* ex_cmd = app.add_subcommand("explain", "Explain the pose uncertainty of one pair at one setting");
  ex_cmd->add_option("--manifest", ex.manifest, "Sequence manifest (JSON)")->required();
  ex_cmd->add_option("--pair", ex.pair, "Pair index i: entries i and i+1");
  ex_cmd->add_option("--sn", ex.sn, "Sensor noise sigma [m]");
  ex_cmd->add_option("--ip", ex.ip, "Initial-pose covariance scale");
  ex_cmd->add_option("--po", ex.po, "Overlap reduction");
  ex_cmd->add_option("--replicate", ex.replicate, "Replicate stream")->check(CLI::NonNegativeNumber);
  ex_cmd->add_option("--plot-dir", ex.plot_dir, "Also write waterfall plot data here");

  ExperimentOptions xp;
  auto* xp_cmd = app.add_subcommand("experiment", "Run a perturbation grid or a fixed-setting sweep");
  xp_cmd->add_option("--manifest", xp.manifest, "Sequence manifest (JSON)")->required();
  xp_cmd->add_option("--out", xp.out, "Output directory")->required();
  xp_cmd->add_option("--mode", xp.mode, "grid or sweep");
  xp_cmd->add_option("--grid-mode", xp.grid_mode, "per_axis or full_product");
  xp_cmd->add_option("--pair", xp.pair, "Pair index for grid mode");
  xp_cmd->add_flag("--reuse-pseudo-true", xp.reuse_pseudo_true,
                   "Reuse a pseudo-true distribution cached in the output directory");

  SynthOptions sy;
  auto* sy_cmd = app.add_subcommand("synth", "Write a synthetic room sequence with a manifest");
  sy_cmd->add_option("--out", sy.out, "Output directory")->required();
  sy_cmd->add_option("--points", sy.points, "Points per scan");
  sy_cmd->add_option("--scans", sy.scans, "Number of scans");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "icpx: " << e.what() << '\n';
    return kExitError;
  }

  try {
    if (*reg_cmd) return cmd_register(reg, g, out);
    if (*ex_cmd) return cmd_explain(ex, g, out);
    if (*xp_cmd) return cmd_experiment(xp, g, err);
    if (*sy_cmd) return cmd_synth(sy, g, out);
  } catch (const std::exception& e) {
    err << "icpx: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}

}  // namespace icpx
