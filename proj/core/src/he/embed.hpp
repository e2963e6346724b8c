// Copyright 2026 The enchvac Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <vector>

namespace enchvac::he::detail {

// Canonical embedding between real slot vectors and negacyclic polynomial
// coefficients. Slot i corresponds to evaluation at zeta^(5^i mod 2N) with
// zeta = exp(i*pi/N); the 5^i ordering is what turns the Galois map
// X -> X^(5^r) into a cyclic slot rotation by r.
struct EmbedTables {
  uint32_t n = 0;
  uint32_t slots = 0;
  uint32_t logn = 0;
  std::vector<uint32_t> bitrev;
  std::vector<std::complex<double>> tw_fwd;   // exp(+2*pi*i*t/n), t < n/2
  std::vector<std::complex<double>> tw_inv;   // exp(-2*pi*i*t/n)
  std::vector<std::complex<double>> zeta;     // exp(+i*pi*k/n), k < n
  std::vector<std::complex<double>> zeta_inv; // exp(-i*pi*k/n)
  std::vector<uint32_t> slot_pos;             // (5^i mod 2n - 1) / 2

  EmbedTables() = default;

  explicit EmbedTables(uint32_t degree) : n(degree), slots(degree / 2) {
    while ((1u << logn) < n) ++logn;
    bitrev.resize(n);
    for (uint32_t i = 0; i < n; ++i) {
      uint32_t r = 0;
      for (uint32_t b = 0; b < logn; ++b) r |= ((i >> b) & 1u) << (logn - 1 - b);
      bitrev[i] = r;
    }
    tw_fwd.resize(n / 2);
    tw_inv.resize(n / 2);
    const double pi = std::numbers::pi;
    for (uint32_t t = 0; t < n / 2; ++t) {
      double ang = 2.0 * pi * t / n;
      tw_fwd[t] = {std::cos(ang), std::sin(ang)};
      tw_inv[t] = {std::cos(ang), -std::sin(ang)};
    }
    zeta.resize(n);
    zeta_inv.resize(n);
    for (uint32_t k = 0; k < n; ++k) {
      double ang = pi * k / n;
      zeta[k] = {std::cos(ang), std::sin(ang)};
      zeta_inv[k] = {std::cos(ang), -std::sin(ang)};
    }
    slot_pos.resize(slots);
    uint64_t e = 1;
    for (uint32_t i = 0; i < slots; ++i) {
      slot_pos[i] = static_cast<uint32_t>((e - 1) / 2);
      e = (e * 5) % (2ULL * n);
    }
  }

  // In-place radix-2 DFT: a[j] <- sum_k a[k] * exp(sign*2*pi*i*jk/n).
  void fft(std::complex<double>* a, int sign) const {
    for (uint32_t i = 0; i < n; ++i) {
      uint32_t r = bitrev[i];
      if (i < r) std::swap(a[i], a[r]);
    }
    const auto& tw = sign > 0 ? tw_fwd : tw_inv;
    for (uint32_t len = 2; len <= n; len <<= 1) {
      uint32_t stride = n / len;
      for (uint32_t i = 0; i < n; i += len) {
        for (uint32_t j = 0; j < len / 2; ++j) {
          std::complex<double> w = tw[j * stride];
          std::complex<double> u = a[i + j];
          std::complex<double> v = a[i + j + len / 2] * w;
          a[i + j] = u + v;
          a[i + j + len / 2] = u - v;
        }
      }
    }
  }

  // Slot values (all n/2 of them) to unscaled real coefficients.
  void slots_to_coeffs(const std::vector<double>& slot_vals, std::vector<double>& out) const {
    std::vector<std::complex<double>> f(n, {0.0, 0.0});
    for (uint32_t i = 0; i < slots; ++i) {
      f[slot_pos[i]] = {slot_vals[i], 0.0};
      f[n - 1 - slot_pos[i]] = {slot_vals[i], 0.0};
    }
    fft(f.data(), -1);
    out.resize(n);
    double inv_n = 1.0 / n;
    for (uint32_t k = 0; k < n; ++k) out[k] = (f[k] * zeta_inv[k]).real() * inv_n;
  }

  // Real coefficients to all n/2 slot values.
  void coeffs_to_slots(const std::vector<double>& coeffs, std::vector<double>& out) const {
    std::vector<std::complex<double>> g(n);
    for (uint32_t k = 0; k < n; ++k) g[k] = coeffs[k] * zeta[k];
    fft(g.data(), +1);
    out.resize(slots);
    for (uint32_t i = 0; i < slots; ++i) out[i] = g[slot_pos[i]].real();
  }
};

}  // namespace enchvac::he::detail
