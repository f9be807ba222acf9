#pragma once

#include <cstdint>
#include <random>

namespace qhdboot {

using Rng = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed-splitting rule: child = splitmix64(splitmix64(seed) ^ splitmix64(stream)).
/// Every random stream in the library is derived from a top-level seed this way,
/// so replicate i of any loop is reproducible regardless of scheduling.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
  return splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632BE59BD9B4E019ULL));
}

inline Rng make_rng(std::uint64_t seed) { return Rng(splitmix64(seed)); }

}  // namespace qhdboot
