#pragma once

// Deterministic, splittable random streams. Every stochastic experiment
// derives one independent stream per (seed, index) pair, so results do not
// depend on evaluation order and a given seed reproduces byte-identical
// output. Uniform doubles are built from raw engine words instead of
// std::uniform_real_distribution, whose output is implementation-defined.

#include <cmath>
#include <cstdint>
#include <random>

namespace relfdiv {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t state = seed;
  std::uint64_t a = splitmix64(state);
  state = index ^ 0x632be59bd9b4e019ull;
  std::uint64_t b = splitmix64(state);
  state = a ^ (b + 0x9e3779b97f4a7c15ull + (a << 6) + (a >> 2));
  return splitmix64(state);
}

inline std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t index = 0) {
  return std::mt19937_64(mix_seed(seed, index));
}

// Uniform in [0, 1) with 53 random bits.
inline double unit_uniform(std::mt19937_64& g) {
  return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

inline double uniform(std::mt19937_64& g, double lo, double hi) {
  return lo + (hi - lo) * unit_uniform(g);
}

// Standard exponential via inversion; log1p keeps u near 1 accurate.
inline double exponential(std::mt19937_64& g) {
  return -std::log1p(-unit_uniform(g));
}

}  // namespace relfdiv
