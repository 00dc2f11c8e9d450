// Copyright 2026 The icpx Authors.
// SPDX-License-Identifier: Apache-2.0

#include "icpx/cli.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

namespace icpx {
namespace {

namespace fs = std::filesystem;

struct Invocation {
  int code;
  std::string out, err;
};

Invocation icpx(std::vector<std::string> args) {
  args.insert(args.begin(), "icpx");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    unsetenv("ICP_EXPLAIN_CONFIG");
    dir_ = fs::temp_directory_path() / "icpx_cli_test";
    fs::remove_all(dir_);
    Invocation r = icpx({"synth", "--out", (dir_ / "seq").string(), "--points", "1500", "--scans", "3"});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    std::ofstream(dir_ / "fast.cfg") << "[samples]\ncount = 7\n[icp]\nmax_iterations = 8\n"
                                        "max_correspondence_dist = 0.2\n";
  }
  static void TearDownTestSuite() { fs::remove_all(dir_); }

  static fs::path dir_;
};

fs::path Cli::dir_;

TEST_F(Cli, SynthWritesManifestAndPreset) {
  EXPECT_TRUE(fs::exists(dir_ / "seq" / "manifest.json"));
  EXPECT_TRUE(fs::exists(dir_ / "seq" / "scan_2.csv"));
  EXPECT_TRUE(fs::exists(dir_ / "seq" / "pose_0.txt"));
  EXPECT_TRUE(fs::exists(dir_ / "seq" / "experiment.cfg"));
}

TEST_F(Cli, RegisterIdenticalClouds) {
  fs::path scan = dir_ / "seq" / "scan_0.csv";
  Invocation r = icpx({"register", scan.string(), scan.string(), "--out", (dir_ / "pose.txt").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  auto j = nlohmann::json::parse(r.out);
  EXPECT_TRUE(j["converged"].get<bool>());
  std::vector<double> pose = j["pose"];
  for (int i = 0; i < 16; ++i) EXPECT_NEAR(pose[i], i % 5 == 0 ? 1.0 : 0.0, 1e-12);
  EXPECT_TRUE(fs::exists(dir_ / "pose.txt"));
}

TEST_F(Cli, RegisterMissingFileNamesPath) {
  fs::path missing = dir_ / "no_such_cloud.csv";
  Invocation r = icpx({"register", missing.string(), (dir_ / "seq" / "scan_0.csv").string(), "--out",
                (dir_ / "p.txt").string()});
  EXPECT_EQ(r.code, kExitError);
  EXPECT_NE(r.err.find(missing.string()), std::string::npos) << r.err;
}

TEST_F(Cli, RegisterOneIterationDoesNotConverge) {
  std::ofstream(dir_ / "one.cfg") << "[icp]\nmax_iterations = 1\n";
  Invocation r = icpx({"--config", (dir_ / "one.cfg").string(), "register", (dir_ / "seq" / "scan_0.csv").string(),
                (dir_ / "seq" / "scan_1.csv").string(), "--out", (dir_ / "p1.txt").string()});
  EXPECT_EQ(r.code, kExitNotConverged) << r.err;
}

TEST_F(Cli, ExplainReferenceSettingIsZero) {
  Invocation r = icpx({"--config", (dir_ / "fast.cfg").string(), "explain", "--manifest",
                (dir_ / "seq" / "manifest.json").string(), "--sn", "0", "--ip", "1", "--po", "0"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  auto j = nlohmann::json::parse(r.out);
  for (const char* k : {"sn", "ip", "po"}) EXPECT_EQ(j["phi"][k].get<double>(), 0.0);
}

TEST_F(Cli, ExplainWritesWaterfall) {
  fs::path plots = dir_ / "plots";
  Invocation r = icpx({"--config", (dir_ / "fast.cfg").string(), "explain", "--manifest",
                (dir_ / "seq" / "manifest.json").string(), "--sn", "0.09", "--ip", "1.1", "--po", "0.09",
                "--plot-dir", plots.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  auto j = nlohmann::json::parse(r.out);
  EXPECT_LT(j["local_accuracy_error"].get<double>(), 1e-9);
  EXPECT_EQ(lines(plots / "waterfall.csv").size(), 4u);
}

TEST_F(Cli, ExplainOutOfRangeSetting) {
  Invocation r = icpx({"explain", "--manifest", (dir_ / "seq" / "manifest.json").string(), "--sn", "0.5"});
  EXPECT_EQ(r.code, kExitError);
  EXPECT_NE(r.err.find("0.5"), std::string::npos) << r.err;
}

TEST_F(Cli, ExperimentEmptyManifest) {
  std::ofstream(dir_ / "empty.json") << R"({"sequence": "none", "entries": []})";
  Invocation r = icpx({"experiment", "--manifest", (dir_ / "empty.json").string(), "--out", (dir_ / "x").string()});
  EXPECT_EQ(r.code, kExitError);
}

TEST_F(Cli, ExperimentPerAxisGridOnOnePair) {
  fs::path out = dir_ / "grid";
  Invocation r = icpx({"--config", (dir_ / "fast.cfg").string(), "experiment", "--manifest",
                (dir_ / "seq" / "manifest.json").string(), "--out", out.string(), "--pair", "1"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  auto records = lines(out / "records.jsonl");
  ASSERT_EQ(records.size(), 33u);
  for (const auto& line : records) {
    auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j["pair"], "1-2");
    EXPECT_LT(j["local_accuracy_error"].get<double>(), 1e-9);
  }
  for (const char* f : {"config.snapshot", "errors.jsonl", "pseudo_true/1-2.txt", "timings.csv", "medians.csv",
                        "setting_medians.csv", "summary.csv", "summary.json", "dependence_sn.csv",
                        "dependence_ip.json", "dependence_po.csv"}) {
    EXPECT_TRUE(fs::exists(out / f)) << f;
  }
  EXPECT_TRUE(lines(out / "errors.jsonl").empty());
}

TEST_F(Cli, ExperimentSweepIsReproducible) {
  auto sweep = [&](const std::string& name) {
    fs::path out = dir_ / name;
    Invocation r = icpx({"--config", (dir_ / "fast.cfg").string(), "--seed", "11", "experiment", "--manifest",
                  (dir_ / "seq" / "manifest.json").string(), "--out", out.string(), "--mode", "sweep"});
    EXPECT_EQ(r.code, kExitOk) << r.err;
    return lines(out / "records.jsonl");
  };
  auto a = sweep("sweep_a");
  auto b = sweep("sweep_b");
  ASSERT_EQ(a.size(), 2u);
  EXPECT_EQ(a, b);
  auto j = nlohmann::json::parse(a[0]);
  EXPECT_EQ(j["setting"]["sn"].get<double>(), 0.05);
  EXPECT_EQ(j["setting"]["ip"].get<double>(), 1.5);
}

TEST_F(Cli, UnknownSubcommandAndHelp) {
  EXPECT_EQ(icpx({"frobnicate"}).code, kExitError);
  EXPECT_EQ(icpx({"--help"}).code, kExitOk);
  EXPECT_EQ(icpx({}).code, kExitError);
}

}  // namespace
}  // namespace icpx
