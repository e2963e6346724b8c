// Copyright 2026 The enchvac Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace enchvac::he::detail {

using u128 = unsigned __int128;

inline uint64_t addmod(uint64_t a, uint64_t b, uint64_t p) {
  uint64_t r = a + b;
  return r >= p ? r - p : r;
}

inline uint64_t submod(uint64_t a, uint64_t b, uint64_t p) { return a >= b ? a - b : a + p - b; }

inline uint64_t mulmod(uint64_t a, uint64_t b, uint64_t p) {
  return static_cast<uint64_t>(static_cast<u128>(a) * b % p);
}

inline uint64_t powmod(uint64_t a, uint64_t e, uint64_t p) {
  uint64_t r = 1;
  a %= p;
  while (e > 0) {
    if (e & 1) r = mulmod(r, a, p);
    a = mulmod(a, a, p);
    e >>= 1;
  }
  return r;
}

// p prime.
inline uint64_t invmod(uint64_t a, uint64_t p) { return powmod(a % p, p - 2, p); }

// Shoup precomputation: returns floor(w * 2^64 / p). Requires p < 2^63.
inline uint64_t shoup(uint64_t w, uint64_t p) {
  return static_cast<uint64_t>((static_cast<u128>(w) << 64) / p);
}

// Product a*w mod p using the Shoup constant wp for w; requires a < p < 2^63.
inline uint64_t mulmod_shoup(uint64_t a, uint64_t w, uint64_t wp, uint64_t p) {
  uint64_t q = static_cast<uint64_t>((static_cast<u128>(a) * wp) >> 64);
  uint64_t r = a * w - q * p;
  return r >= p ? r - p : r;
}

// Deterministic Miller-Rabin for 64-bit inputs.
inline bool is_prime_u64(uint64_t n) {
  if (n < 2) return false;
  for (uint64_t p : {2ULL, 3ULL, 5ULL, 7ULL, 11ULL, 13ULL, 17ULL, 19ULL, 23ULL, 29ULL, 31ULL, 37ULL}) {
    if (n % p == 0) return n == p;
  }
  uint64_t d = n - 1;
  int s = 0;
  while ((d & 1) == 0) {
    d >>= 1;
    ++s;
  }
  for (uint64_t a : {2ULL, 3ULL, 5ULL, 7ULL, 11ULL, 13ULL, 17ULL, 19ULL, 23ULL, 29ULL, 31ULL, 37ULL}) {
    uint64_t x = powmod(a, d, n);
    if (x == 1 || x == n - 1) continue;
    bool composite = true;
    for (int i = 1; i < s; ++i) {
      x = mulmod(x, x, n);
      if (x == n - 1) {
        composite = false;
        break;
      }
    }
    if (composite) return false;
  }
  return true;
}

// NTT-friendly primes p = 2^bits + k*two_n + 1, scanning k upward and skipping
// any prime already in `taken`. Keeps p within [2^bits, 2^(bits+1)).
inline uint64_t next_ntt_prime(int bits, uint64_t two_n, std::vector<uint64_t>& taken) {
  if (bits < 5 || bits > 61) throw std::invalid_argument("modulus bits out of range [5,61]");
  uint64_t base = 1ULL << bits;
  for (uint64_t k = 1;; ++k) {
    uint64_t cand = base + k * two_n + 1;
    if (cand >= (base << 1)) throw std::runtime_error("no NTT prime found for requested bit size");
    if (!is_prime_u64(cand)) continue;
    bool dup = false;
    for (uint64_t t : taken)
      if (t == cand) dup = true;
    if (dup) continue;
    taken.push_back(cand);
    return cand;
  }
}

// Smallest primitive 2n-th root of unity modulo p (p = 1 mod 2n).
inline uint64_t find_primitive_root(uint64_t p, uint64_t two_n) {
  uint64_t cofactor = (p - 1) / two_n;
  for (uint64_t x = 2;; ++x) {
    uint64_t cand = powmod(x, cofactor, p);
    // order divides 2n; primitive iff cand^n == -1
    if (powmod(cand, two_n / 2, p) == p - 1) return cand;
    if (x > 1000) throw std::runtime_error("no primitive root found");
  }
}

}  // namespace enchvac::he::detail
