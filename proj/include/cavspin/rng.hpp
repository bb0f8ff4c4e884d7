#pragma once

// Deterministic sampling helpers. Draws are built from raw engine output with
// explicit arithmetic (no std::*_distribution) so that a given seed produces
// the same stream on every platform and standard library.

#include <cmath>
#include <cstdint>
#include <random>

namespace cavspin {

// Uniform on (0, 1]: the shift keeps all 53 mantissa bits and excludes 0,
// so log(u) below is always finite.
inline double uniform_draw(std::mt19937_64& g) {
  return 1.0 - double(g() >> 11) * 0x1.0p-53;
}

inline double normal_draw(std::mt19937_64& g) {
  const double u1 = uniform_draw(g);
  const double u2 = double(g() >> 11) * 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

// Sub-stream seed for shot (a, b) of a scan: splitmix64-style finalizer over
// the base seed and the two indices. Also recorded as the shot's stream_id.
inline std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = seed;
  z += 0x9E3779B97F4A7C15ull * (a + 1);
  z += 0xBF58476D1CE4E5B9ull * (b + 1);
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ull;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBull;
  z ^= z >> 31;
  return z;
}

}  // namespace cavspin
