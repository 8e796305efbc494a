// SPDX-License-Identifier: Apache-2.0

#ifndef ATLAS_RANDOM_HPP
#define ATLAS_RANDOM_HPP

#include <cstddef>
#include <cstdint>
#include <random>

#include "atlas/numerics.hpp"

namespace atlas {

/// splitmix64 finalizer; used to derive independent streams from one seed.
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream) {
  return std::mt19937_64(mix_seed(seed, stream));
}

inline Vector gaussian_vector(std::mt19937_64& rng, std::size_t n, double stddev = 1.0) {
  std::normal_distribution<double> dist(0.0, stddev);
  Vector v(n);
  for (double& x : v) x = dist(rng);
  return v;
}

// Stream ids, kept in one place so distinct uses never collide.
namespace rng_stream {
inline constexpr std::uint64_t kEncoder = 1;
inline constexpr std::uint64_t kPromptInit = 2;
inline constexpr std::uint64_t kShuffle = 3;
inline constexpr std::uint64_t kTask = 4;
inline constexpr std::uint64_t kBetaProbe = 5;
}  // namespace rng_stream

}  // namespace atlas

#endif  // ATLAS_RANDOM_HPP
