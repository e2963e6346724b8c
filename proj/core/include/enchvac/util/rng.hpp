// Copyright 2026 The enchvac Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <string_view>

namespace enchvac::util {

inline uint64_t splitmix64(uint64_t& s) {
  s += 0x9e3779b97f4a7c15ULL;
  uint64_t z = s;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline uint64_t fnv1a64(const void* data, size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  uint64_t h = 0xcbf29ce484222325ULL;
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline uint64_t fnv1a64(std::string_view s) { return fnv1a64(s.data(), s.size()); }

// Deterministic PRNG with cheap label-derived substreams. Substreams are
// independent of the order in which the parent stream is consumed, which keeps
// multi-stage pipelines byte-reproducible when stages are added or reordered.
class Rng {
 public:
  explicit Rng(uint64_t seed) : s_(seed * 0x9e3779b97f4a7c15ULL + 0x243f6a8885a308d3ULL) {}

  Rng derive(std::string_view label) const {
    uint64_t t = s_ ^ (fnv1a64(label) * 0xff51afd7ed558ccdULL);
    (void)splitmix64(t);
    return Rng(Raw{}, t);
  }
  Rng derive(std::string_view label, uint64_t n) const {
    uint64_t t = s_ ^ (fnv1a64(label) * 0xff51afd7ed558ccdULL) ^ (n * 0xc2b2ae3d27d4eb4fULL);
    (void)splitmix64(t);
    return Rng(Raw{}, t);
  }

  uint64_t next_u64() { return splitmix64(s_); }

  // Uniform in [0, 1) with 53-bit resolution.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Unbiased uniform integer in [0, bound) via rejection.
  uint64_t next_below(uint64_t bound) {
    const uint64_t threshold = -bound % bound;  // 2^64 mod bound
    for (;;) {
      uint64_t r = next_u64();
      if (r >= threshold) return r % bound;
    }
  }

  // Standard normal via Box-Muller; one spare is cached per stream.
  double next_gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 1.0 - next_double();  // (0, 1]
    double u2 = next_double();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  // Uniform over {-1, 0, 1}.
  int next_ternary() { return static_cast<int>(next_below(3)) - 1; }

  // Centered binomial with variance k/2; integer-only, 1 <= k <= 32.
  int next_cbd(int k) {
    uint64_t bits = next_u64();
    uint64_t mask = (k >= 64) ? ~0ULL : ((1ULL << k) - 1);
    int a = __builtin_popcountll(bits & mask);
    int b = __builtin_popcountll((bits >> 32) & mask);
    return a - b;
  }

 private:
  struct Raw {};
  Rng(Raw, uint64_t state) : s_(state) {}
  uint64_t s_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace enchvac::util
