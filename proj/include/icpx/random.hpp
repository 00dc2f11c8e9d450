// Copyright 2026 The icpx Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef ICPX_RANDOM_HPP
#define ICPX_RANDOM_HPP

#include <cstdint>
#include <initializer_list>
#include <random>

namespace icpx {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; a bijection on 64-bit words with good avalanche.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Counter-based seed derivation: the child seed depends only on the parent
/// and the path of counters, never on call order. Every stochastic stage
/// (pseudo-true sampling, per-sample noise, init draws, ...) gets its own
/// path, so a parallel schedule reproduces the serial one bit for bit.
constexpr std::uint64_t derive_seed(std::uint64_t parent,
                                    std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = mix64(parent);
  for (std::uint64_t c : path) s = mix64(s ^ mix64(c + 0x632be59bd9b4e019ULL));
  return s;
}

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

/// Stage tags used in seed paths.
enum class SeedStage : std::uint64_t {
  kPseudoTrue = 1,
  kEvaluation = 2,
  kSourceNoise = 11,
  kReferenceNoise = 12,
  kOverlapRemoval = 13,
  kInitPose = 14,
  kIcp = 15,
};

constexpr std::uint64_t tag(SeedStage s) { return static_cast<std::uint64_t>(s); }

}  // namespace icpx

#endif  // ICPX_RANDOM_HPP
