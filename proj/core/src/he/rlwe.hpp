// Copyright 2026 The enchvac Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "enchvac/util/rng.hpp"
#include "context.hpp"

namespace enchvac::he::detail {

std::vector<int64_t> sample_ternary(util::Rng& rng, uint32_t n);
std::vector<int64_t> sample_cbd(util::Rng& rng, uint32_t n);
RnsPoly sample_uniform_ntt(const Context& cx, util::Rng& rng, int limbs);

// Signed coefficients to an NTT-domain RNS polynomial over the first `limbs`
// chain primes.
RnsPoly lift_to_ntt(const Context& cx, const std::vector<int64_t>& coeffs, int limbs);

void rp_add_inplace(const Context& cx, RnsPoly& a, const RnsPoly& b);
void rp_sub_inplace(const Context& cx, RnsPoly& a, const RnsPoly& b);
void rp_neg_inplace(const Context& cx, RnsPoly& a);
RnsPoly rp_mul(const Context& cx, const RnsPoly& a, const RnsPoly& b);
void rp_mul_inplace(const Context& cx, RnsPoly& a, const RnsPoly& b);
// Multiplies every limb by w (signed, reduced per prime).
void rp_scalar_inplace(const Context& cx, RnsPoly& a, int64_t w);

// Drops the top limb of p, dividing by its prime with centered rounding.
void rescale_inplace(const Context& cx, RnsPoly& p);

// Hybrid key switch: d in coefficient domain with limbs 0..L. Accumulates the
// switched pair into (out0, out1), both NTT domain with limbs 0..L.
void keyswitch(const Context& cx, const RnsPoly& d_coeff, const SwitchKey& key, RnsPoly& out0,
               RnsPoly& out1);

// X -> X^g on one coefficient-domain limb over prime q.
void automorph_perm(const Context& cx, const uint64_t* in, uint64_t* out, uint64_t g, uint64_t q);

// X -> X^g on an NTT-domain polynomial (round-trips through coefficients).
RnsPoly automorph(const Context& cx, const RnsPoly& poly, uint64_t g);

uint64_t galois_exponent(const Context& cx, uint32_t step);

std::shared_ptr<KeyBody> rl_keygen(const ContextPtr& cx, uint64_t seed);

// m: rounded scaled message coefficients. Fills the rlwe fields of `out`
// (level/scale/logical_len are the facade's responsibility).
void rl_encrypt(const KeyBody& keys, const std::vector<int64_t>& m, CtBody& out);
// Returns the raw (still scaled) message coefficients.
std::vector<double> rl_decrypt_coeffs(const KeyBody& keys, const CtBody& ct);

}  // namespace enchvac::he::detail
