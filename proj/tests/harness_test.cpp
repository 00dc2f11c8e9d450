// Copyright 2026 The icpx Authors.
// SPDX-License-Identifier: Apache-2.0

#include "icpx/harness.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "icpx/synthetic.hpp"

namespace icpx {
namespace {

namespace fs = std::filesystem;

ExplanationRecord record(const std::string& sequence, std::array<double, 3> phi, double f_empty = 1.0,
                         PerturbationSetting x = {0.05, 1.5, 0.05}) {
  ExplanationRecord r;
  r.sequence = sequence;
  r.pair_id = "0-1";
  r.setting = x;
  r.explanation.phi = phi;
  r.explanation.f_empty = f_empty;
  r.explanation.f_full = f_empty + phi[0] + phi[1] + phi[2];
  r.uncertainty = r.explanation.f_full;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& name) {
  fs::path d = fs::temp_directory_path() / ("icpx_harness_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

TEST(Quantile, LinearInterpolation) {
  EXPECT_DOUBLE_EQ(quantile({1, 2, 3, 4, 1000}, 0.25), 2.0);
  EXPECT_DOUBLE_EQ(quantile({1, 2, 3, 4, 1000}, 0.75), 4.0);
  EXPECT_DOUBLE_EQ(quantile({4, 1, 3, 2}, 0.25), 1.75);
  EXPECT_DOUBLE_EQ(median({3, 1, 2}), 2.0);
  EXPECT_DOUBLE_EQ(median({4, 1, 3, 2}), 2.5);
  EXPECT_THROW(quantile({}, 0.5), PreconditionViolation);
}

TEST(RemoveOutliersIqr, Examples) {
  OutlierSplit a = remove_outliers_iqr({1, 2, 3, 4});
  EXPECT_EQ(a.inliers, (std::vector<double>{1, 2, 3, 4}));
  EXPECT_TRUE(a.outliers.empty());

  OutlierSplit b = remove_outliers_iqr({1, 2, 3, 4, 1000});
  EXPECT_EQ(b.inliers, (std::vector<double>{1, 2, 3, 4}));
  EXPECT_EQ(b.outliers, (std::vector<double>{1000}));

  OutlierSplit c = remove_outliers_iqr({7, 7, 7, 7, 7});
  EXPECT_EQ(c.inliers.size(), 5u);
  EXPECT_TRUE(c.outliers.empty());

  // Fence is exactly 4 + 1.5 * 2 = 7; 7 stays, 7.0001 goes.
  EXPECT_TRUE(remove_outliers_iqr({1, 2, 3, 4, 7}).outliers.empty());
  EXPECT_EQ(remove_outliers_iqr({1, 2, 3, 4, 7.0001}).outliers.size(), 1u);
  EXPECT_THROW(remove_outliers_iqr({1, 2, 3}), PreconditionViolation);
}

TEST(MedianTable, SingleRecord) {
  auto rows = median_table({record("office", {1, 2, 3})});
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].phi, (std::array<double, 3>{1, 2, 3}));
}

TEST(MedianTable, GroupsAndDropsOutliers) {
  std::vector<ExplanationRecord> records;
  for (double v : {1.0, 2.0, 3.0, 4.0, 1000.0}) records.push_back(record("b", {v, -v, 0.5}));
  records.push_back(record("a", {10, 20, 30}));
  records.push_back(record("a", {12, 22, 32}));
  auto rows = median_table(records);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].sequence, "a");
  EXPECT_EQ(rows[0].phi, (std::array<double, 3>{11, 21, 31}));
  EXPECT_EQ(rows[1].sequence, "b");
  EXPECT_DOUBLE_EQ(rows[1].phi[0], 2.5);
  EXPECT_DOUBLE_EQ(rows[1].phi[1], -2.5);
  EXPECT_DOUBLE_EQ(rows[1].phi[2], 0.5);
  EXPECT_EQ(rows[1].inliers, (std::array<std::size_t, 3>{4, 4, 5}));
  EXPECT_EQ(rows[1].records, 5u);
  EXPECT_THROW(median_table({}), EmptyGroup);
}

TEST(MedianBySetting, FirstSeenOrder) {
  PerturbationSetting x1{0.01, 1.0, 0.0}, x2{0.0, 1.5, 0.0};
  auto rows = median_by_setting({record("s", {1, 0, 0}, 1.0, x2), record("s", {3, 0, 0}, 3.0, x1),
                                 record("s", {5, 0, 0}, 2.0, x2)});
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].setting, x2);
  EXPECT_DOUBLE_EQ(rows[0].phi[0], 3.0);
  EXPECT_DOUBLE_EQ(rows[0].f_empty, 1.5);
  EXPECT_EQ(rows[0].records, 2u);
  EXPECT_EQ(rows[1].setting, x1);
}

TEST(LinearGrid, InclusiveAndRounded) {
  auto v = linear_grid(0.0, 0.1, 0.01);
  ASSERT_EQ(v.size(), 11u);
  EXPECT_EQ(v[3], 0.03);
  EXPECT_EQ(v.back(), 0.1);
  auto s = linear_grid(1.0, 2.0, 0.1);
  ASSERT_EQ(s.size(), 11u);
  EXPECT_EQ(s[7], 1.7);
  EXPECT_THROW(linear_grid(1.0, 0.0, 0.1), PreconditionViolation);
}

TEST(GridSettings, Counts) {
  PerturbationGrid g = PerturbationGrid::standard();
  auto per_axis = grid_settings(g, GridMode::kPerAxis);
  EXPECT_EQ(per_axis.size(), 33u);
  EXPECT_EQ(per_axis.front(), kReferenceSetting);
  EXPECT_EQ(per_axis[10], (PerturbationSetting{0.1, 1.0, 0.0}));
  EXPECT_EQ(per_axis[21], (PerturbationSetting{0.0, 2.0, 0.0}));
  EXPECT_EQ(per_axis.back(), (PerturbationSetting{0.0, 1.0, 0.1}));
  auto product = grid_settings(g, GridMode::kFullProduct);
  EXPECT_EQ(product.size(), 1331u);
  EXPECT_TRUE(std::is_sorted(product.begin(), product.end()));
}

TEST(GridSettings, ModeNamesAndValidation) {
  EXPECT_EQ(grid_mode_from_string("per_axis"), GridMode::kPerAxis);
  EXPECT_EQ(grid_mode_from_string(to_string(GridMode::kFullProduct)), GridMode::kFullProduct);
  EXPECT_THROW(grid_mode_from_string("diagonal"), ConfigError);
  PerturbationGrid g = PerturbationGrid::standard();
  EXPECT_NO_THROW(g.validate());
  g.sn_values.push_back(0.5);
  EXPECT_THROW(g.validate(), PreconditionViolation);
}

TEST(Bounds, RejectOutOfRange) {
  PerturbationBounds b;
  EXPECT_TRUE(b.contains({0.1, 2.0, 0.1}));
  EXPECT_FALSE(b.contains({0.5, 1.0, 0.0}));
  EXPECT_FALSE(b.contains({0.0, 0.9, 0.0}));
  EXPECT_THROW(b.check({0.0, 1.0, -0.01}), PreconditionViolation);
}

TEST(RecordJson, FixedKeyOrderWithoutTiming) {
  ExplanationRecord r = record("seq", {0.5, 0.25, 0.125});
  r.seed = 42;
  r.seconds = 12.5;
  auto j = nlohmann::ordered_json::parse(record_to_json(r));
  std::vector<std::string> keys;
  for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
  EXPECT_EQ(keys, (std::vector<std::string>{"sequence", "pair", "replicate", "seed", "setting", "phi", "f_empty",
                                            "f_full", "uncertainty", "local_accuracy_error", "coalitions"}));
  EXPECT_EQ(j["phi"]["ip"].get<double>(), 0.25);
  EXPECT_EQ(j["coalitions"].size(), 8u);
  EXPECT_TRUE(j["coalitions"].contains("101"));
  EXPECT_EQ(record_to_json(r), record_to_json(r));
  EXPECT_EQ(record_to_json(r).find("seconds"), std::string::npos);
}

TEST(ErrorJson, NullSetting) {
  auto j = nlohmann::json::parse(error_to_json({"s", "0-1", std::nullopt, -1, "IoError", "gone"}));
  EXPECT_TRUE(j["setting"].is_null());
  EXPECT_EQ(j["kind"], "IoError");
}

TEST(PlotData, WaterfallNeedsOneRecord) {
  fs::path dir = fresh_dir("waterfall_arity");
  std::vector<ExplanationRecord> two{record("s", {1, 2, 3}), record("s", {1, 2, 3})};
  EXPECT_THROW(emit_plot_data(two, PlotKind::kWaterfall, dir, "w"), ArityMismatch);
  EXPECT_THROW(emit_plot_data({}, PlotKind::kSummary, dir, "s"), PreconditionViolation);
  EXPECT_THROW(emit_plot_data({}, PlotKind::kDependence, dir, "d"), PreconditionViolation);
}

TEST(PlotData, WaterfallOrderAndEnd) {
  fs::path dir = fresh_dir("waterfall");
  ExplanationRecord r = record("s", {5.0, -0.5, 2.0}, 1.5, {0.09, 1.1, 0.09});
  fs::path csv = emit_plot_data({r}, PlotKind::kWaterfall, dir, "w");
  EXPECT_EQ(slurp(csv),
            "step,feature,value,phi,start,end\n"
            "0,sn,0.09,5.0,1.5,6.5\n"
            "1,po,0.09,2.0,6.5,8.5\n"
            "2,ip,1.1,-0.5,8.5,8.0\n");
  auto meta = nlohmann::json::parse(slurp(dir / "w.json"));
  EXPECT_EQ(meta["kind"], "waterfall");
  EXPECT_EQ(meta["f_full"].get<double>(), 8.0);
}

TEST(PlotData, WaterfallRejectsInconsistentRecord) {
  ExplanationRecord r = record("s", {1, 1, 1});
  r.explanation.f_full += 1.0;
  EXPECT_THROW(emit_plot_data({r}, PlotKind::kWaterfall, fresh_dir("bad"), "w"), Error);
}

TEST(PlotData, SummaryNormalisesOverBounds) {
  fs::path dir = fresh_dir("summary");
  fs::path csv = emit_plot_data({record("s", {1, 2, 3}, 1.0, {0.05, 1.5, 0.1})}, PlotKind::kSummary, dir, "s");
  EXPECT_EQ(slurp(csv),
            "feature,phi,value,normalized_value,pair,replicate\n"
            "sn,1.0,0.05,0.5,0-1,0\n"
            "ip,2.0,1.5,0.5,0-1,0\n"
            "po,3.0,0.1,1.0,0-1,0\n");
}

TEST(PlotData, DependenceColumns) {
  fs::path dir = fresh_dir("dependence");
  PlotOptions o;
  o.feature = Source::kInitialPose;
  o.color_feature = Source::kPartialOverlap;
  fs::path csv = emit_plot_data({record("s", {1, 2, 3}, 1.0, {0.05, 1.5, 0.02})}, PlotKind::kDependence, dir, "d", o);
  EXPECT_EQ(slurp(csv), "value,phi,color_value,pair,replicate\n1.5,2.0,0.02,0-1,0\n");
}

// A tiny scene keeps the end-to-end checks fast.
class SmallScene : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    RoomSceneOptions options;
    options.points_per_scan = 1500;
    options.windows = {{0.0, 7.0}, {2.3, 9.3}, {1.0, 8.0}};
    scene_ = new SyntheticScene(make_room_scene(options, 3));
  }
  static void TearDownTestSuite() { delete scene_; }

  static ExperimentConfig config() {
    ExperimentConfig c;
    c.uncertainty.sample_count = 8;
    c.uncertainty.icp.max_iterations = 10;
    c.uncertainty.icp.max_correspondence_dist = 0.2;
    c.seed = 17;
    return c;
  }
  static SyntheticScene* scene_;
};

SyntheticScene* SmallScene::scene_ = nullptr;

TEST_F(SmallScene, ReferenceSettingGivesZeroAttribution) {
  PerturbationGrid g{{0.0}, {1.0}, {0.0}};
  ExperimentResult r = run_grid_experiment(scene_pair(*scene_, 0), "room", g, GridMode::kFullProduct, config());
  ASSERT_EQ(r.records.size(), 1u);
  EXPECT_EQ(r.records[0].explanation.phi, (std::array<double, 3>{0, 0, 0}));
  EXPECT_EQ(r.evaluations, 1u);
}

TEST_F(SmallScene, RunIsDeterministicAndCachesCoalitions) {
  PerturbationGrid g{{0.0, 0.03}, {1.0, 1.5}, {0.0, 0.02}};
  ExperimentConfig c = config();
  c.replicates = 2;
  std::vector<std::string> streamed;
  ExperimentSinks sinks{[&](const ExplanationRecord& r) { streamed.push_back(record_to_json(r)); }, {}};
  ExperimentResult a = run_grid_experiment(scene_pair(*scene_, 0), "room", g, GridMode::kFullProduct, c, sinks);
  ExperimentResult b = run_grid_experiment(scene_pair(*scene_, 0), "room", g, GridMode::kFullProduct, c);
  ASSERT_EQ(a.records.size(), 16u);
  ASSERT_EQ(b.records.size(), 16u);
  ASSERT_EQ(streamed.size(), 16u);
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(record_to_json(a.records[i]), record_to_json(b.records[i]));
    EXPECT_EQ(streamed[i], record_to_json(a.records[i]));
    EXPECT_LT(a.records[i].explanation.local_accuracy_error(), 1e-9);
  }
  // 8 distinct settings per replicate, each evaluated once.
  EXPECT_EQ(a.evaluations, 16u);
  // Replicates of one setting differ; replicate streams are shared across settings.
  EXPECT_NE(a.records[14].explanation.f_full, a.records[15].explanation.f_full);
  EXPECT_EQ(a.records[0].explanation.f_empty, a.records[2].explanation.f_empty);
}

TEST_F(SmallScene, PseudoTrueCacheIsReused) {
  ExperimentConfig c = config();
  PairExplainer first(scene_pair(*scene_, 0), "room", c);
  PseudoTrueCache cache = first.pseudo_true();
  cache.distribution.covariance *= 2.0;  // distinguishable if reused
  PairExplainer reused(scene_pair(*scene_, 0), "room", c, cache);
  EXPECT_EQ(reused.pseudo_true().distribution.covariance, cache.distribution.covariance);
  c.seed += 1;
  PairExplainer other(scene_pair(*scene_, 0), "room", c, cache);
  EXPECT_NE(other.pseudo_true().distribution.covariance, cache.distribution.covariance);
}

TEST_F(SmallScene, FailingSettingBecomesErrorRecord) {
  ExperimentConfig c = config();
  c.bounds.upper[2] = 1.0;
  PerturbationGrid g{{0.0}, {1.0}, {0.0, 0.99}};
  std::vector<ErrorRecord> errors;
  ExperimentResult r = run_grid_experiment(scene_pair(*scene_, 0), "room", g, GridMode::kPerAxis, c,
                                           {{}, [&](const ErrorRecord& e) { errors.push_back(e); }});
  EXPECT_EQ(r.records.size(), 3u);  // reference on each axis
  ASSERT_EQ(r.errors.size(), 1u);
  EXPECT_EQ(errors.size(), 1u);
  EXPECT_EQ(r.errors[0].kind, "InsufficientOverlap");
}

TEST_F(SmallScene, ManifestSweep) {
  fs::path dir = fresh_dir("manifest");
  SequenceManifest m{"room", {}};
  for (std::size_t i = 0; i < scene_->scans.size(); ++i) {
    std::string n = std::to_string(i);
    save_cloud(scene_->scans[i], dir / ("scan_" + n + ".csv"));
    save_pose(scene_->poses[i], dir / ("pose_" + n + ".txt"));
    m.entries.push_back({"scan_" + n + ".csv", "pose_" + n + ".txt"});
  }
  save_manifest(m, dir / "manifest.json");
  SequenceManifest loaded = load_manifest(dir / "manifest.json");
  ASSERT_EQ(loaded.entries.size(), 3u);
  EXPECT_EQ(loaded.entries[1].cloud, dir / "scan_1.csv");
  EXPECT_EQ(load_pair(loaded, 1).id, "1-2");

  ExperimentResult r = run_fixed_setting_sweep(loaded, {0.02, 1.2, 0.02}, config());
  EXPECT_EQ(r.records.size(), 2u);
  EXPECT_EQ(r.records[0].pair_id, "0-1");
  EXPECT_EQ(r.records[1].pair_id, "1-2");

  loaded.entries.resize(2);
  EXPECT_EQ(run_fixed_setting_sweep(loaded, {0.02, 1.2, 0.02}, config()).records.size(), 1u);
}

TEST(Manifest, Errors) {
  fs::path dir = fresh_dir("manifest_errors");
  std::ofstream(dir / "bad.json") << "{ not json";
  EXPECT_THROW(load_manifest(dir / "bad.json"), ParseError);
  std::ofstream(dir / "one.json") << R"({"sequence": "s", "entries": [{"cloud": "a.csv", "pose": "a.txt"}]})";
  EXPECT_THROW(load_manifest(dir / "one.json"), ParseError);
  std::ofstream(dir / "missing.json")
      << R"({"sequence": "s", "entries": [{"cloud": "a.csv", "pose": "a.txt"}, {"cloud": "b.csv", "pose": "b.txt"}]})";
  try {
    load_manifest(dir / "missing.json");
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("entry 0"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("a.csv"), std::string::npos) << e.what();
  }
  EXPECT_THROW(load_manifest(dir / "absent.json"), IoError);
}

}  // namespace
}  // namespace icpx
