// Copyright 2026 The enchvac Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "modmath.hpp"

namespace enchvac::he::detail {

// Negacyclic number-theoretic transform over Z_p[X]/(X^N + 1).
//
// Forward maps coefficient order to bit-reversed evaluation order; the inverse
// undoes it. All pointwise operations on transformed polynomials are agnostic
// to that ordering, so it is never exposed.
struct NttTables {
  uint64_t p = 0;
  uint32_t n = 0;
  std::vector<uint64_t> psi;        // psi^brv(i), i in [0, n)
  std::vector<uint64_t> psi_sh;     // Shoup companions
  std::vector<uint64_t> ipsi;       // psi^-brv(i)
  std::vector<uint64_t> ipsi_sh;
  uint64_t n_inv = 0;
  uint64_t n_inv_sh = 0;

  NttTables() = default;

  NttTables(uint64_t prime, uint32_t degree) : p(prime), n(degree) {
    uint32_t logn = 0;
    while ((1u << logn) < n) ++logn;
    uint64_t root = find_primitive_root(p, 2ULL * n);
    uint64_t iroot = invmod(root, p);
    psi.resize(n);
    psi_sh.resize(n);
    ipsi.resize(n);
    ipsi_sh.resize(n);
    for (uint32_t i = 0; i < n; ++i) {
      uint32_t r = 0;
      for (uint32_t b = 0; b < logn; ++b) r |= ((i >> b) & 1u) << (logn - 1 - b);
      psi[r] = powmod(root, i, p);
      ipsi[r] = powmod(iroot, i, p);
    }
    for (uint32_t i = 0; i < n; ++i) {
      psi_sh[i] = shoup(psi[i], p);
      ipsi_sh[i] = shoup(ipsi[i], p);
    }
    n_inv = invmod(n, p);
    n_inv_sh = shoup(n_inv, p);
  }

  void forward(uint64_t* a) const {
    uint32_t t = n;
    for (uint32_t m = 1; m < n; m <<= 1) {
      t >>= 1;
      for (uint32_t i = 0; i < m; ++i) {
        uint64_t w = psi[m + i];
        uint64_t wsh = psi_sh[m + i];
        uint64_t* x = a + 2 * i * t;
        uint64_t* y = x + t;
        for (uint32_t j = 0; j < t; ++j) {
          uint64_t u = x[j];
          uint64_t v = mulmod_shoup(y[j], w, wsh, p);
          x[j] = addmod(u, v, p);
          y[j] = submod(u, v, p);
        }
      }
    }
  }

  void inverse(uint64_t* a) const {
    uint32_t t = 1;
    for (uint32_t m = n; m > 1; m >>= 1) {
      uint32_t h = m >> 1;
      uint64_t* x = a;
      for (uint32_t i = 0; i < h; ++i) {
        uint64_t w = ipsi[h + i];
        uint64_t wsh = ipsi_sh[h + i];
        uint64_t* y = x + t;
        for (uint32_t j = 0; j < t; ++j) {
          uint64_t u = x[j];
          uint64_t v = y[j];
          x[j] = addmod(u, v, p);
          y[j] = mulmod_shoup(submod(u, v, p), w, wsh, p);
        }
        x += 2 * t;
      }
      t <<= 1;
    }
    for (uint32_t j = 0; j < n; ++j) a[j] = mulmod_shoup(a[j], n_inv, n_inv_sh, p);
  }
};

}  // namespace enchvac::he::detail
