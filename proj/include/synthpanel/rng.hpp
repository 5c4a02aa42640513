#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace synthpanel {

// Fixed, portable generators so fixtures and bootstrap draws reproduce
// bit-identically across platforms and language ports. splitmix64 seeds
// streams; xoshiro256++ produces the draws. Both are the published
// Blackman/Vigna algorithms.

inline std::uint64_t splitmix64_step(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Independent stream seed for (base seed, stream index); used for
/// per-replicate bootstrap generators so parallel order cannot matter.
inline std::uint64_t derive_stream_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t s = seed + (stream + 1) * 0x9E3779B97F4A7C15ull;
  return splitmix64_step(s);
}

class Xoshiro256pp {
 public:
  explicit Xoshiro256pp(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& word : state_) word = splitmix64_step(sm);
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform double in [0, 1) from the top 53 bits.
  double next_double() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Standard normal via Box-Muller (two uniforms per draw, no rejection).
  double next_normal() {
    double u1 = next_double();
    double u2 = next_double();
    return std::sqrt(-2.0 * std::log1p(-u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Uniform index in [0, n).
  std::size_t next_index(std::size_t n) {
    std::size_t idx = static_cast<std::size_t>(next_double() * static_cast<double>(n));
    return idx < n ? idx : n - 1;
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::uint64_t state_[4];
};

}  // namespace synthpanel
