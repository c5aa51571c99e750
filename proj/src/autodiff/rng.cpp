// Copyright 2026 The distill-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "dlab/autodiff/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace dlab {

namespace {
constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ULL;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBULL;
  x ^= x >> 31;
  return x;
}

std::string_view stream_name(Stream s) {
  switch (s) {
    case Stream::DataShuffle: return "data-shuffle";
    case Stream::Dropout: return "dropout";
    case Stream::GaussianNoise: return "gaussian-noise";
    case Stream::McLabels: return "mc-labels";
    case Stream::PgdInit: return "pgd-init";
    case Stream::WeightInit: return "weight-init";
    case Stream::DataGen: return "data-gen";
    case Stream::LabelCorruption: return "label-corruption";
    case Stream::Corruption: return "corruption";
  }
  return "unknown";
}

Rng::Rng(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed),
      stream_(stream_id),
      key_(mix64(mix64(seed + kGamma) ^ (stream_id * 0xD1B54A32D192ED03ULL))) {}

std::uint64_t Rng::next_u64() {
  ++counter_;
  return mix64(key_ + counter_ * kGamma);
}

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

__extension__ typedef unsigned __int128 u128;

std::uint64_t Rng::uniform_int(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("uniform_int: empty range");
  // Lemire's nearly-divisionless method.
  std::uint64_t x = next_u64();
  u128 m = static_cast<u128>(x) * n;
  auto low = static_cast<std::uint64_t>(m);
  if (low < n) {
    const std::uint64_t threshold = (0 - n) % n;
    while (low < threshold) {
      x = next_u64();
      m = static_cast<u128>(x) * n;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

double Rng::normal() {
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Rng Rng::fork(std::uint64_t key) const {
  return Rng(seed_, mix64(stream_ ^ mix64(key + 0x632BE59BD9B4E019ULL)));
}

}  // namespace dlab
