#pragma once

#include <cstdint>
#include <random>

#include "dplds/core.hpp"

namespace dplds {

/// SplitMix64 finalizer; decorrelates consecutive stream indices so each
/// (seed, stream) pair yields an independent generator.
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Counter-derived substream: results depend only on (seed, stream), so work
/// split across workers by stream index reproduces the single-worker output.
inline std::mt19937_64 substream(std::uint64_t seed, std::uint64_t stream) {
  return std::mt19937_64(mix_seed(seed, stream));
}

template <typename Scalar>
VectorX<Scalar> standard_normal_vector(Index n, std::mt19937_64& gen) {
  std::normal_distribution<Scalar> normal(Scalar(0), Scalar(1));
  VectorX<Scalar> z(n);
  for (Index i = 0; i < n; ++i) z[i] = normal(gen);
  return z;
}

}  // namespace dplds
