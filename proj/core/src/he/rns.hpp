// Copyright 2026 The enchvac Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "enchvac/he/errors.hpp"
#include "modmath.hpp"

namespace enchvac::he::detail {

// Little-endian multiprecision accumulator wide enough for 8 x 61-bit primes.
using U512 = std::array<uint64_t, 9>;

inline U512 u512_zero() { return U512{}; }

inline U512 u512_from(uint64_t x) {
  U512 r{};
  r[0] = x;
  return r;
}

inline int u512_cmp(const U512& a, const U512& b) {
  for (int i = 8; i >= 0; --i) {
    if (a[i] != b[i]) return a[i] < b[i] ? -1 : 1;
  }
  return 0;
}

inline void u512_add(U512& a, const U512& b) {
  u128 carry = 0;
  for (int i = 0; i < 9; ++i) {
    u128 s = static_cast<u128>(a[i]) + b[i] + carry;
    a[i] = static_cast<uint64_t>(s);
    carry = s >> 64;
  }
}

// pre: a >= b
inline void u512_sub(U512& a, const U512& b) {
  uint64_t borrow = 0;
  for (int i = 0; i < 9; ++i) {
    u128 d = static_cast<u128>(a[i]) - b[i] - borrow;
    a[i] = static_cast<uint64_t>(d);
    borrow = (d >> 64) ? 1 : 0;
  }
}

inline U512 u512_mul_u64(const U512& a, uint64_t m) {
  U512 r{};
  u128 carry = 0;
  for (int i = 0; i < 9; ++i) {
    u128 s = static_cast<u128>(a[i]) * m + carry;
    r[i] = static_cast<uint64_t>(s);
    carry = s >> 64;
  }
  return r;
}

inline void u512_shr1(U512& a) {
  for (int i = 0; i < 8; ++i) a[i] = (a[i] >> 1) | (a[i + 1] << 63);
  a[8] >>= 1;
}

inline double u512_to_double(const U512& a) {
  double r = 0.0;
  for (int i = 8; i >= 0; --i) r = r * 18446744073709551616.0 + static_cast<double>(a[i]);
  return r;
}

// RNS residue polynomial. limb[i] lives over chain prime i; ciphertext polys
// carry limbs 0..level, key polys carry all primes including the special one.
struct RnsPoly {
  std::vector<std::vector<uint64_t>> limb;

  int limb_count() const { return static_cast<int>(limb.size()); }
};

// Modulus chain with the canonical scale ladder and the constants needed for
// rescaling, hybrid key switching, and CRT decoding.
//
// Prime roles: index 0 is the decryption base (never dropped), indices
// 1..num_data-1 are the rescaling primes, the last index is the key-switching
// special prime (never present in ciphertexts). Level L means primes 0..L.
struct PrimeChain {
  std::vector<uint64_t> primes;
  int num_data = 0;
  int top_level = 0;
  uint64_t special = 0;

  // scale_at[L]: the canonical ciphertext scale at level L. The ladder is
  // pinned by rescaling arithmetic: scale_at[L-1] = scale_at[L]^2 / primes[L].
  std::vector<double> scale_at;

  // inv_q[L][i] = primes[L]^-1 mod primes[i] (with Shoup companion), i < L.
  std::vector<std::vector<uint64_t>> inv_q, inv_q_sh;
  std::vector<uint64_t> inv_sp, inv_sp_sh;  // special^-1 mod primes[i]

  // ks_factor[j][t] = (special * F_j) mod primes[t] where F_j is the CRT
  // idempotent of data prime j over the full data modulus; F_j stays an
  // idempotent at every level, which is what makes one key serve all levels.
  std::vector<std::vector<uint64_t>> ks_factor;

  // Per-level CRT decode tables: Q = prod primes[0..L], qhat[j] = Q/primes[j],
  // tq[j] = qhat[j]^-1 mod primes[j].
  struct DecodeTables {
    U512 q, q_half;
    std::vector<U512> qhat;
    std::vector<uint64_t> tq;
  };
  std::vector<DecodeTables> decode;

  // drop_w[L] = round(scale_at[L]): the multiplier used when descending from
  // level L so the canonical ladder is preserved.
  std::vector<uint64_t> drop_w;

  // log2 of the ciphertext modulus at each level, for headroom checks.
  std::vector<double> log2_q_at;

  void build(const std::vector<int>& modulus_bits, int scale_bits, uint64_t two_n) {
    int k = static_cast<int>(modulus_bits.size());
    num_data = k - 1;
    top_level = num_data - 1;
    std::vector<uint64_t> taken;
    primes.clear();
    for (int i = 0; i < k; ++i) primes.push_back(next_ntt_prime(modulus_bits[i], two_n, taken));
    special = primes[k - 1];

    scale_at.assign(num_data, 0.0);
    scale_at[top_level] = std::ldexp(1.0, scale_bits);
    for (int l = top_level; l >= 1; --l)
      scale_at[l - 1] = scale_at[l] * scale_at[l] / static_cast<double>(primes[l]);

    inv_q.assign(num_data, {});
    inv_q_sh.assign(num_data, {});
    for (int l = 1; l < num_data; ++l) {
      inv_q[l].resize(l);
      inv_q_sh[l].resize(l);
      for (int i = 0; i < l; ++i) {
        inv_q[l][i] = invmod(primes[l] % primes[i], primes[i]);
        inv_q_sh[l][i] = shoup(inv_q[l][i], primes[i]);
      }
    }
    inv_sp.resize(num_data);
    inv_sp_sh.resize(num_data);
    for (int i = 0; i < num_data; ++i) {
      inv_sp[i] = invmod(special % primes[i], primes[i]);
      inv_sp_sh[i] = shoup(inv_sp[i], primes[i]);
    }

    ks_factor.assign(num_data, std::vector<uint64_t>(k, 0));
    for (int j = 0; j < num_data; ++j) {
      uint64_t mu = 1;  // (Q_data/q_j)^-1 mod q_j
      for (int i = 0; i < num_data; ++i)
        if (i != j) mu = mulmod(mu, primes[i] % primes[j], primes[j]);
      mu = invmod(mu, primes[j]);
      for (int t = 0; t < k; ++t) {
        uint64_t qhat_t = 1;
        for (int i = 0; i < num_data; ++i)
          if (i != j) qhat_t = mulmod(qhat_t, primes[i] % primes[t], primes[t]);
        uint64_t f = mulmod(qhat_t, mu % primes[t], primes[t]);
        ks_factor[j][t] = mulmod(f, special % primes[t], primes[t]);
      }
    }

    decode.resize(num_data);
    for (int l = 0; l < num_data; ++l) {
      auto& d = decode[l];
      d.q = u512_from(1);
      for (int i = 0; i <= l; ++i) d.q = u512_mul_u64(d.q, primes[i]);
      d.q_half = d.q;
      u512_shr1(d.q_half);
      d.qhat.resize(l + 1);
      d.tq.resize(l + 1);
      for (int j = 0; j <= l; ++j) {
        d.qhat[j] = u512_from(1);
        uint64_t t = 1;
        for (int i = 0; i <= l; ++i) {
          if (i == j) continue;
          d.qhat[j] = u512_mul_u64(d.qhat[j], primes[i]);
          t = mulmod(t, primes[i] % primes[j], primes[j]);
        }
        d.tq[j] = invmod(t, primes[j]);
      }
    }

    drop_w.assign(num_data, 0);
    for (int l = 1; l < num_data; ++l) drop_w[l] = static_cast<uint64_t>(std::llround(scale_at[l]));

    log2_q_at.assign(num_data, 0.0);
    double acc = 0.0;
    for (int l = 0; l < num_data; ++l) {
      acc += std::log2(static_cast<double>(primes[l]));
      log2_q_at[l] = acc;
    }
  }

  // Centered CRT reconstruction of coefficient idx of a level-L polynomial,
  // returned as a double. Callers guarantee the true value is small enough
  // for double precision (enforced upstream by encode range checks).
  double decode_coeff(const RnsPoly& poly, uint32_t idx, int level) const {
    const auto& d = decode[level];
    U512 acc{};
    for (int j = 0; j <= level; ++j) {
      uint64_t y = mulmod(poly.limb[j][idx], d.tq[j], primes[j]);
      U512 term = u512_mul_u64(d.qhat[j], y);
      u512_add(acc, term);
    }
    while (u512_cmp(acc, d.q) >= 0) u512_sub(acc, d.q);
    if (u512_cmp(acc, d.q_half) > 0) {
      U512 neg = d.q;
      u512_sub(neg, acc);
      return -u512_to_double(neg);
    }
    return u512_to_double(acc);
  }
};

}  // namespace enchvac::he::detail
