#pragma once

#include <cmath>
#include <cstdint>

#include "evlab/common.hpp"

namespace evlab {

// SplitMix64 finalizer (Steele/Lea/Flood; Vigna's fixed-increment variant).
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// xoshiro256++ engine (Blackman & Vigna), seeded through SplitMix64.
class Stream {
 public:
  explicit Stream(std::uint64_t seed) {
    for (auto& w : s_) w = splitmix64_next(seed);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform double in (0, 1]; safe as a log argument.
  double uniform_pos() { return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53; }

  /// Standard complex Gaussian: E z = 0, E|z|^2 = 1, E z^2 = 0.
  Complex normal_complex() {
    const double r = std::sqrt(-std::log(uniform_pos()));
    const double phi = 2.0 * kPi * uniform();
    return {r * std::cos(phi), r * std::sin(phi)};
  }

  /// Standard real Gaussian.
  double normal_real() {
    const double r = std::sqrt(-2.0 * std::log(uniform_pos()));
    return r * std::cos(2.0 * kPi * uniform());
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  std::uint64_t s_[4];
};

/// Counter-based stream splitting: a pure function of (master_seed, sample_index),
/// so parallel sweeps produce identical output regardless of thread schedule.
inline Stream derive_stream(std::uint64_t master_seed, std::uint64_t sample_index) {
  std::uint64_t s = master_seed;
  const std::uint64_t a = splitmix64_next(s);
  std::uint64_t key = a ^ (sample_index * 0xbf58476d1ce4e5b9ULL + 0x94d049bb133111ebULL);
  const std::uint64_t seed = splitmix64_next(key);
  return Stream(seed);
}

}  // namespace evlab
