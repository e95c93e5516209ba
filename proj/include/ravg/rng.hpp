// Copyright (c) 2026 the ravg authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>

namespace ravg::rng {

// Counter-based generator: every draw is a pure function of an integer key,
// so parallel evaluation order never changes results.

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint64_t hash2(std::uint64_t a, std::uint64_t b) {
  return splitmix64(splitmix64(a) ^ b);
}

inline std::uint64_t hash3(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  return splitmix64(hash2(a, b) ^ c);
}

inline std::uint64_t hash4(std::uint64_t a, std::uint64_t b, std::uint64_t c,
                           std::uint64_t d) {
  return splitmix64(hash3(a, b, c) ^ d);
}

// Uniform in [0,1), 53 mantissa bits.
inline double uniform01(std::uint64_t h) {
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

// Standard normal via Box-Muller; consumes two hashes.
inline double normal(std::uint64_t h0, std::uint64_t h1) {
  double u1 = uniform01(h0);
  double u2 = uniform01(h1);
  if (u1 < 1e-300) u1 = 1e-300;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

// Small stateful stream for places where a sequence is more natural than a
// counter (index sampling in the trainer). Still a pure function of (seed, n).
class Stream {
 public:
  explicit Stream(std::uint64_t seed) : state_(splitmix64(seed ^ 0x517cc1b727220a95ull)) {}

  std::uint64_t next_u64() {
    state_ = splitmix64(state_);
    return state_;
  }

  double next_uniform() { return uniform01(next_u64()); }

  // Uniform integer in [0, n).
  std::uint64_t next_below(std::uint64_t n) {
    return static_cast<std::uint64_t>(next_uniform() * static_cast<double>(n)) % n;
  }

 private:
  std::uint64_t state_;
};

}  // namespace ravg::rng
