// Copyright 2026 The icpx Authors.
// SPDX-License-Identifier: Apache-2.0

#include "icpx/uncertainty.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>

#include "icpx/parallel.hpp"
#include "icpx/random.hpp"

namespace icpx {

std::shared_ptr<const PairContext> prepare_pair(ScanPair pair, double overlap_distance) {
  require(!pair.source.empty() && !pair.reference.empty(), "prepare_pair: empty cloud");
  auto ctx = std::make_shared<PairContext>();
  ctx->ground_truth = pair.ground_truth();
  const PointCloud p1_world = transform_cloud(pair.source, pair.source_pose);
  const PointCloud p2_world = transform_cloud(pair.reference, pair.reference_pose);
  ctx->overlap = overlap_ratio(p1_world, p2_world, overlap_distance);
  ctx->reference_index = std::make_shared<const SpatialIndex>(pair.reference);
  ctx->pair = std::move(pair);
  return ctx;
}

PerturbedInputs apply_perturbations(const Scenario& scenario, std::uint64_t sample_index,
                                    const UncertaintyConfig& config) {
  require(scenario.pair != nullptr, "apply_perturbations: scenario has no pair");
  const PairContext& ctx = *scenario.pair;
  const PerturbationSetting& x = scenario.setting;
  require(x.noise_sigma >= 0.0 && x.pose_scale > 0.0 && x.overlap_reduction >= 0.0,
          "apply_perturbations: invalid setting " + to_string(x));
  auto stream = [&](SeedStage stage) {
    return make_rng(derive_seed(scenario.seed, {sample_index, tag(stage)}));
  };

  PerturbedInputs out;
  out.reference = ctx.pair.reference;
  if (x.overlap_reduction > 0.0) {
    Rng rng = stream(SeedStage::kOverlapRemoval);
    out.reference = out.reference.remove(select_overlap_removal(ctx.overlap, x.overlap_reduction, rng));
  }
  {
    Rng src_rng = stream(SeedStage::kSourceNoise);
    Rng ref_rng = stream(SeedStage::kReferenceNoise);
    out.source = add_sensor_noise(ctx.pair.source, x.noise_sigma, src_rng);
    out.reference = add_sensor_noise(out.reference, x.noise_sigma, ref_rng);
  }
  out.reference_unchanged = x.noise_sigma == 0.0 && x.overlap_reduction == 0.0;

  Rng init_rng = stream(SeedStage::kInitPose);
  const PoseCovarianced factor = covariance_factor(config.base_covariance);
  out.init = ctx.ground_truth * exp_se3(sample_tangent(factor, x.pose_scale, init_rng));
  return out;
}

PoseSampleSet sample_pose_estimates(const Scenario& scenario, const UncertaintyConfig& config) {
  require(config.sample_count >= UncertaintyConfig::kMinSamples,
          "sample_pose_estimates: sample count must be at least 7");
  require(scenario.pair != nullptr, "sample_pose_estimates: scenario has no pair");
  if (scenario.setting.overlap_reduction > 0.0 &&
      scenario.pair->overlap.ratio <= scenario.setting.overlap_reduction) {
    throw InsufficientOverlap("pair " + scenario.pair->pair.id + ": overlap ratio " +
                              std::to_string(scenario.pair->overlap.ratio) +
                              " does not exceed x_po = " +
                              std::to_string(scenario.setting.overlap_reduction));
  }

  const auto count = static_cast<std::size_t>(config.sample_count);
  std::vector<std::optional<RigidTransformd>> estimates(count);
  parallel_for(count, config.workers, [&](std::size_t k) {
    PerturbedInputs in = apply_perturbations(scenario, k, config);
    Rng icp_rng = make_rng(derive_seed(scenario.seed, {k, tag(SeedStage::kIcp)}));
    try {
      IcpResult r = in.reference_unchanged
                        ? run_icp(in.source, *scenario.pair->reference_index, in.init, config.icp, icp_rng)
                        : run_icp(in.source, SpatialIndex(in.reference), in.init, config.icp, icp_rng);
      estimates[k] = r.estimate;
    } catch (const NoCorrespondences&) {
    } catch (const DegenerateConfiguration&) {
    }
  });

  PoseSampleSet set;
  set.ground_truth = scenario.pair->ground_truth;
  const RigidTransformd gt_inv = set.ground_truth.inverse();
  for (const auto& e : estimates) {
    if (!e) {
      ++set.failures;
      continue;
    }
    try {
      set.tangent_errors.push_back(log_se3(gt_inv * *e));
      set.samples.push_back(*e);
    } catch (const AngleNearPi&) {
      ++set.failures;
    }
  }
  if (static_cast<int>(set.samples.size()) < UncertaintyConfig::kMinSamples) {
    throw TooFewSamples("pair " + scenario.pair->pair.id + ": only " +
                        std::to_string(set.samples.size()) + " successful ICP runs at " +
                        to_string(scenario.setting));
  }
  return set;
}

GaussianPoseDistribution fit_gaussian(std::span<const Tangentd> errors, double regularization) {
  require(errors.size() >= static_cast<std::size_t>(UncertaintyConfig::kMinSamples),
          "fit_gaussian: need at least 7 samples");
  GaussianPoseDistribution g;
  g.mean.setZero();
  for (const auto& e : errors) g.mean += e;
  g.mean /= static_cast<double>(errors.size());
  g.covariance.setZero();
  for (const auto& e : errors) {
    const Tangentd c = e - g.mean;
    g.covariance.noalias() += c * c.transpose();
  }
  g.covariance /= static_cast<double>(errors.size() - 1);
  g.covariance = (0.5 * (g.covariance + g.covariance.transpose())).eval();
  g.covariance.diagonal().array() += regularization;
  return g;
}

GaussianPoseDistribution fit_gaussian(const PoseSampleSet& set, double regularization) {
  require(set.samples.size() == set.tangent_errors.size(), "fit_gaussian: inconsistent sample set");
  return fit_gaussian(std::span<const Tangentd>(set.tangent_errors), regularization);
}

namespace {

// Cholesky that also rejects matrices whose condition number exceeds ~1e16.
Eigen::LLT<PoseCovarianced> checked_cholesky(const PoseCovarianced& cov, const char* which) {
  Eigen::LLT<PoseCovarianced> llt(cov);
  if (llt.info() != Eigen::Success) {
    throw SingularCovariance(std::string("kl_divergence: Cholesky of ") + which + " failed");
  }
  const Tangentd d = PoseCovarianced(llt.matrixL()).diagonal();
  if (!(d.minCoeff() > 1e-8 * d.maxCoeff())) {
    throw SingularCovariance(std::string("kl_divergence: ") + which + " is numerically singular");
  }
  return llt;
}

double log_det(const Eigen::LLT<PoseCovarianced>& llt) {
  return 2.0 * PoseCovarianced(llt.matrixL()).diagonal().array().log().sum();
}

}  // namespace

double kl_divergence(const GaussianPoseDistribution& p, const GaussianPoseDistribution& q,
                     bool include_means) {
  if (p.covariance == q.covariance && (!include_means || p.mean == q.mean)) {
    checked_cholesky(q.covariance, "q covariance");
    return 0.0;
  }
  const auto q_llt = checked_cholesky(q.covariance, "q covariance");
  const auto p_llt = checked_cholesky(p.covariance, "p covariance");
  const double trace = q_llt.solve(p.covariance).trace();
  double mahalanobis = 0.0;
  if (include_means) {
    const Tangentd diff = q.mean - p.mean;
    mahalanobis = diff.dot(q_llt.solve(diff));
  }
  const double kl = 0.5 * (trace + mahalanobis + log_det(q_llt) - log_det(p_llt) - 6.0);
  return std::max(kl, 0.0);
}

GaussianPoseDistribution pseudo_true_distribution(const std::shared_ptr<const PairContext>& pair,
                                                  const UncertaintyConfig& config,
                                                  std::uint64_t seed) {
  Scenario s{pair, kReferenceSetting, seed};
  return fit_gaussian(sample_pose_estimates(s, config), config.regularization);
}

double estimate_uncertainty(const Scenario& scenario, const GaussianPoseDistribution& pseudo_true,
                            const UncertaintyConfig& config) {
  const auto perturbed = fit_gaussian(sample_pose_estimates(scenario, config), config.regularization);
  return kl_divergence(perturbed, pseudo_true, config.kl_include_means);
}

// ---------------------------------------------------------------------------
// Pseudo-true cache

void write_pseudo_true_cache(const PseudoTrueCache& cache, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  char buf[32];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  out << "icpx-pseudo-true 1\n";
  out << "pair " << cache.pair_id << "\n";
  out << "seed " << cache.seed << "\n";
  out << "samples " << cache.samples << " failures " << cache.failures << "\n";
  out << "mean";
  for (int i = 0; i < 6; ++i) out << ' ' << num(cache.distribution.mean(i));
  out << "\ncovariance\n";
  for (int r = 0; r < 6; ++r) {
    for (int c = 0; c < 6; ++c) out << num(cache.distribution.covariance(r, c)) << (c == 5 ? '\n' : ' ');
  }
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

PseudoTrueCache read_pseudo_true_cache(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  auto fail = [&](const std::string& what) {
    return ParseError(path.string() + ": " + what);
  };
  PseudoTrueCache cache;
  std::string word;
  int version = 0;
  if (!(in >> word >> version) || word != "icpx-pseudo-true") throw fail("missing magic line");
  if (version != 1) throw fail("unsupported version " + std::to_string(version));
  std::string failures_word;
  if (!(in >> word) || word != "pair" || !(in >> cache.pair_id)) throw fail("missing pair");
  if (!(in >> word) || word != "seed" || !(in >> cache.seed)) throw fail("missing seed");
  if (!(in >> word) || word != "samples" || !(in >> cache.samples >> failures_word >> cache.failures) ||
      failures_word != "failures") {
    throw fail("missing sample counts");
  }
  if (!(in >> word) || word != "mean") throw fail("missing mean");
  for (int i = 0; i < 6; ++i) {
    if (!(in >> cache.distribution.mean(i))) throw fail("truncated mean");
  }
  if (!(in >> word) || word != "covariance") throw fail("missing covariance");
  for (int r = 0; r < 6; ++r) {
    for (int c = 0; c < 6; ++c) {
      if (!(in >> cache.distribution.covariance(r, c))) throw fail("truncated covariance");
    }
  }
  return cache;
}

}  // namespace icpx
