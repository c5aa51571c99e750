// Copyright 2026 The distill-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string_view>

namespace dlab {

/// Named random streams. Each consumer of randomness draws from its own
/// stream so that disabling one noise source never shifts another.
enum class Stream : std::uint64_t {
  DataShuffle = 1,
  Dropout = 2,
  GaussianNoise = 3,
  McLabels = 4,
  PgdInit = 5,
  WeightInit = 6,
  DataGen = 7,
  LabelCorruption = 8,
  Corruption = 9,
};

std::string_view stream_name(Stream s);

/// Counter-based generator: output i is a pure function of
/// (seed, stream id, i), so copies replay identically and distinct stream ids
/// never share state.
class Rng {
 public:
  Rng(std::uint64_t seed, Stream stream)
      : Rng(seed, static_cast<std::uint64_t>(stream)) {}
  Rng(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_int(std::uint64_t n);
  /// Standard normal via Box-Muller; consumes exactly two outputs.
  double normal();
  bool bernoulli(double p) { return uniform() < p; }

  /// Independent child stream keyed by `key` (e.g. a sample index). Does not
  /// advance this generator.
  Rng fork(std::uint64_t key) const;

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// SplitMix64 finalizer; also used for stable hashing of small keys.
std::uint64_t mix64(std::uint64_t x);

}  // namespace dlab
