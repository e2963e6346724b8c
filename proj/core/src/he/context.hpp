// Copyright 2026 The enchvac Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <map>
#include <vector>

#include "enchvac/he/he.hpp"
#include "enchvac/he/params.hpp"
#include "embed.hpp"
#include "ntt.hpp"
#include "rns.hpp"

namespace enchvac::he::detail {

// Operation tallies, used by tests to pin rotation/multiplication counts and
// by the benchmark harness. Atomic so concurrent circuit evaluation stays
// within the documented concurrency model.
struct OpCounters {
  mutable std::atomic<uint64_t> rotations{0};
  mutable std::atomic<uint64_t> ct_muls{0};
  mutable std::atomic<uint64_t> plain_muls{0};
  mutable std::atomic<uint64_t> rescales{0};

  void reset() const {
    rotations = 0;
    ct_muls = 0;
    plain_muls = 0;
    rescales = 0;
  }
};

struct Context {
  HeParams params;
  BackendKind kind = BackendKind::rlwe;
  uint32_t n = 0;
  uint32_t slots = 0;
  uint64_t two_n = 0;

  // Fractional bits used when a scalar factor is folded into a ciphertext
  // without a rescale. Bounded by the base prime's headroom above the scale:
  // a level-0 coefficient must still fit under primes[0].
  int dyadic_bits = 0;

  PrimeChain chain;
  std::vector<NttTables> ntt;  // one table per chain prime
  EmbedTables embed;
  OpCounters counters;

  double scale_for(int level) const { return chain.scale_at[level]; }
};

struct CtBody {
  ContextPtr ctx;
  int level = 0;
  double scale = 0.0;
  uint32_t logical_len = 0;
  uint64_t key_tag = 0;  // in-memory provenance; zero after deserialization

  std::array<RnsPoly, 2> c;  // rlwe: NTT domain, limbs 0..level
  std::vector<double> ref;   // reference: the logical values
};

struct PtBody {
  ContextPtr ctx;
  int level = 0;
  double scale = 0.0;
  uint32_t logical_len = 0;

  RnsPoly m;                // rlwe: NTT domain, limbs 0..level
  std::vector<double> ref;  // reference: the logical values
};

// One hybrid key-switching key: per data-prime digit j, a pair (b_j, a_j)
// over all chain primes with b_j = -a_j*s + e_j + ks_factor_j * target.
struct SwitchKey {
  std::vector<std::array<RnsPoly, 2>> digit;
};

struct KeyBody {
  ContextPtr ctx;
  uint64_t seed = 0;
  uint64_t tag = 0;

  std::vector<int64_t> s_coeff;  // ternary secret, coefficient domain
  RnsPoly s_ntt;                 // all chain primes
  std::array<RnsPoly, 2> pk;     // data primes, NTT domain
  SwitchKey relin;               // target s^2
  std::map<uint32_t, SwitchKey> galois;  // slot step -> key with target s(X^(5^step))
  std::vector<int32_t> steps;    // declared rotation steps, sorted
};

// Deterministic fingerprint binding a key set to its seed and context shape.
// Never zero, so zero can mean "provenance unknown" on deserialized data.
uint64_t key_fingerprint(const Context& cx, uint64_t seed);

}  // namespace enchvac::he::detail
