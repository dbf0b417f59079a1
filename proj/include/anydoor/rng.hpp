#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace anydoor {

/// The single random source type threaded through the pipeline.
using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Child seed for a (parent, key...) tuple; stable across runs and platforms.
inline std::uint64_t derive_seed(std::uint64_t parent, std::initializer_list<std::uint64_t> keys) {
  std::uint64_t s = splitmix64(parent);
  for (auto k : keys) s = splitmix64(s ^ splitmix64(k));
  return s;
}

inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

/// Uniform integer in [lo, hi).
inline long uniform_index(Rng& rng, long lo, long hi) {
  return std::uniform_int_distribution<long>(lo, hi - 1)(rng);
}

}  // namespace anydoor
