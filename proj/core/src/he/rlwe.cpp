// Copyright 2026 The enchvac Authors.
// SPDX-License-Identifier: Apache-2.0
#include "rlwe.hpp"

#include <algorithm>
#include <cassert>
#include <cstring>

#include "enchvac/he/errors.hpp"

namespace enchvac::he::detail {

namespace {

// Error width: CBD(4), variance 2. Narrow enough that a fresh public-key
// encryption at scale 2^26 and N = 8192 keeps per-slot error a few times
// 1e-4, which the documented 1e-3 roundtrip budget needs; the modulus
// budgets used here sit far below the lattice-security ceiling for this
// ring size, so the narrower error keeps ample security margin.
constexpr int kCbdWidth = 4;

inline uint64_t reduce_signed(int64_t x, uint64_t q) {
  int64_t r = x % static_cast<int64_t>(q);
  if (r < 0) r += static_cast<int64_t>(q);
  return static_cast<uint64_t>(r);
}

inline int64_t center(uint64_t x, uint64_t q) {
  return x > q / 2 ? static_cast<int64_t>(x) - static_cast<int64_t>(q) : static_cast<int64_t>(x);
}

}  // namespace

std::vector<int64_t> sample_ternary(util::Rng& rng, uint32_t n) {
  std::vector<int64_t> v(n);
  for (uint32_t i = 0; i < n; ++i) v[i] = rng.next_ternary();
  return v;
}

std::vector<int64_t> sample_cbd(util::Rng& rng, uint32_t n) {
  std::vector<int64_t> v(n);
  for (uint32_t i = 0; i < n; ++i) v[i] = rng.next_cbd(kCbdWidth);
  return v;
}

RnsPoly sample_uniform_ntt(const Context& cx, util::Rng& rng, int limbs) {
  RnsPoly p;
  p.limb.resize(limbs);
  for (int i = 0; i < limbs; ++i) {
    p.limb[i].resize(cx.n);
    for (uint32_t k = 0; k < cx.n; ++k) p.limb[i][k] = rng.next_below(cx.chain.primes[i]);
  }
  return p;
}

RnsPoly lift_to_ntt(const Context& cx, const std::vector<int64_t>& coeffs, int limbs) {
  RnsPoly p;
  p.limb.resize(limbs);
  for (int i = 0; i < limbs; ++i) {
    uint64_t q = cx.chain.primes[i];
    p.limb[i].resize(cx.n);
    for (uint32_t k = 0; k < cx.n; ++k) p.limb[i][k] = reduce_signed(coeffs[k], q);
    cx.ntt[i].forward(p.limb[i].data());
  }
  return p;
}

void rp_add_inplace(const Context& cx, RnsPoly& a, const RnsPoly& b) {
  for (int i = 0; i < a.limb_count(); ++i) {
    uint64_t q = cx.chain.primes[i];
    const uint64_t* bi = b.limb[i].data();
    uint64_t* ai = a.limb[i].data();
    for (uint32_t k = 0; k < cx.n; ++k) ai[k] = addmod(ai[k], bi[k], q);
  }
}

void rp_sub_inplace(const Context& cx, RnsPoly& a, const RnsPoly& b) {
  for (int i = 0; i < a.limb_count(); ++i) {
    uint64_t q = cx.chain.primes[i];
    const uint64_t* bi = b.limb[i].data();
    uint64_t* ai = a.limb[i].data();
    for (uint32_t k = 0; k < cx.n; ++k) ai[k] = submod(ai[k], bi[k], q);
  }
}

void rp_neg_inplace(const Context& cx, RnsPoly& a) {
  for (int i = 0; i < a.limb_count(); ++i) {
    uint64_t q = cx.chain.primes[i];
    uint64_t* ai = a.limb[i].data();
    for (uint32_t k = 0; k < cx.n; ++k) ai[k] = ai[k] == 0 ? 0 : q - ai[k];
  }
}

RnsPoly rp_mul(const Context& cx, const RnsPoly& a, const RnsPoly& b) {
  RnsPoly r = a;
  rp_mul_inplace(cx, r, b);
  return r;
}

void rp_mul_inplace(const Context& cx, RnsPoly& a, const RnsPoly& b) {
  for (int i = 0; i < a.limb_count(); ++i) {
    uint64_t q = cx.chain.primes[i];
    const uint64_t* bi = b.limb[i].data();
    uint64_t* ai = a.limb[i].data();
    for (uint32_t k = 0; k < cx.n; ++k) ai[k] = mulmod(ai[k], bi[k], q);
  }
}

void rp_scalar_inplace(const Context& cx, RnsPoly& a, int64_t w) {
  for (int i = 0; i < a.limb_count(); ++i) {
    uint64_t q = cx.chain.primes[i];
    uint64_t wq = reduce_signed(w, q);
    uint64_t wsh = shoup(wq, q);
    uint64_t* ai = a.limb[i].data();
    for (uint32_t k = 0; k < cx.n; ++k) ai[k] = mulmod_shoup(ai[k], wq, wsh, q);
  }
}

void rescale_inplace(const Context& cx, RnsPoly& p) {
  int top = p.limb_count() - 1;
  assert(top >= 1);
  uint64_t q_top = cx.chain.primes[top];
  std::vector<uint64_t> last = p.limb[top];
  cx.ntt[top].inverse(last.data());
  std::vector<uint64_t> tmp(cx.n);
  for (int i = 0; i < top; ++i) {
    uint64_t q = cx.chain.primes[i];
    uint64_t inv = cx.chain.inv_q[top][i];
    uint64_t inv_sh = cx.chain.inv_q_sh[top][i];
    for (uint32_t k = 0; k < cx.n; ++k) tmp[k] = reduce_signed(center(last[k], q_top), q);
    cx.ntt[i].forward(tmp.data());
    uint64_t* pi = p.limb[i].data();
    for (uint32_t k = 0; k < cx.n; ++k)
      pi[k] = mulmod_shoup(submod(pi[k], tmp[k], q), inv, inv_sh, q);
  }
  p.limb.pop_back();
  cx.counters.rescales.fetch_add(1, std::memory_order_relaxed);
}

void keyswitch(const Context& cx, const RnsPoly& d_coeff, const SwitchKey& key, RnsPoly& out0,
               RnsPoly& out1) {
  int level = d_coeff.limb_count() - 1;
  int sp = cx.chain.num_data;  // special prime chain index
  uint64_t p_sp = cx.chain.primes[sp];

  // Accumulators over primes 0..level plus the special prime (kept last).
  auto make_acc = [&] {
    std::vector<std::vector<uint64_t>> acc(level + 2);
    for (auto& limb : acc) limb.assign(cx.n, 0);
    return acc;
  };
  auto acc0 = make_acc();
  auto acc1 = make_acc();

  std::vector<int64_t> digit(cx.n);
  std::vector<uint64_t> tmp(cx.n);
  for (int j = 0; j <= level; ++j) {
    uint64_t q_j = cx.chain.primes[j];
    for (uint32_t k = 0; k < cx.n; ++k) digit[k] = center(d_coeff.limb[j][k], q_j);
    for (int ti = 0; ti <= level + 1; ++ti) {
      int t = ti <= level ? ti : sp;
      uint64_t q_t = cx.chain.primes[t];
      for (uint32_t k = 0; k < cx.n; ++k) tmp[k] = reduce_signed(digit[k], q_t);
      cx.ntt[t].forward(tmp.data());
      const uint64_t* kb = key.digit[j][0].limb[t].data();
      const uint64_t* ka = key.digit[j][1].limb[t].data();
      uint64_t* a0 = acc0[ti].data();
      uint64_t* a1 = acc1[ti].data();
      for (uint32_t k = 0; k < cx.n; ++k) {
        a0[k] = addmod(a0[k], mulmod(tmp[k], kb[k], q_t), q_t);
        a1[k] = addmod(a1[k], mulmod(tmp[k], ka[k], q_t), q_t);
      }
    }
  }

  // Exact division by the special prime with centered rounding.
  auto divide_by_sp = [&](std::vector<std::vector<uint64_t>>& acc, RnsPoly& out) {
    std::vector<uint64_t> spec = acc[level + 1];
    cx.ntt[sp].inverse(spec.data());
    out.limb.resize(level + 1);
    for (int i = 0; i <= level; ++i) {
      uint64_t q = cx.chain.primes[i];
      uint64_t inv = cx.chain.inv_sp[i];
      uint64_t inv_sh = cx.chain.inv_sp_sh[i];
      for (uint32_t k = 0; k < cx.n; ++k) tmp[k] = reduce_signed(center(spec[k], p_sp), q);
      cx.ntt[i].forward(tmp.data());
      out.limb[i].resize(cx.n);
      const uint64_t* ac = acc[i].data();
      for (uint32_t k = 0; k < cx.n; ++k)
        out.limb[i][k] = mulmod_shoup(submod(ac[k], tmp[k], q), inv, inv_sh, q);
    }
  };
  divide_by_sp(acc0, out0);
  divide_by_sp(acc1, out1);
}

void automorph_perm(const Context& cx, const uint64_t* in, uint64_t* out, uint64_t g, uint64_t q) {
  for (uint32_t k = 0; k < cx.n; ++k) {
    uint64_t t = (static_cast<u128>(k) * g) % cx.two_n;
    uint64_t v = in[k];
    if (t < cx.n) {
      out[t] = v;
    } else {
      out[t - cx.n] = v == 0 ? 0 : q - v;
    }
  }
}

RnsPoly automorph(const Context& cx, const RnsPoly& poly, uint64_t g) {
  RnsPoly out;
  out.limb.resize(poly.limb_count());
  std::vector<uint64_t> coeff(cx.n);
  for (int i = 0; i < poly.limb_count(); ++i) {
    uint64_t q = cx.chain.primes[i];
    coeff = poly.limb[i];
    cx.ntt[i].inverse(coeff.data());
    out.limb[i].assign(cx.n, 0);
    automorph_perm(cx, coeff.data(), out.limb[i].data(), g, q);
    cx.ntt[i].forward(out.limb[i].data());
  }
  return out;
}

uint64_t galois_exponent(const Context& cx, uint32_t step) {
  uint64_t g = 1;
  for (uint32_t i = 0; i < step; ++i) g = (g * 5) % cx.two_n;
  return g;
}

namespace {

// Switch key encrypting `target` (NTT, all primes) under s.
SwitchKey make_switch_key(const Context& cx, util::Rng rng, const RnsPoly& s_ntt,
                          const RnsPoly& target) {
  int k = static_cast<int>(cx.chain.primes.size());
  SwitchKey key;
  key.digit.resize(cx.chain.num_data);
  for (int j = 0; j < cx.chain.num_data; ++j) {
    RnsPoly a = sample_uniform_ntt(cx, rng, k);
    RnsPoly b = lift_to_ntt(cx, sample_cbd(rng, cx.n), k);
    RnsPoly as = rp_mul(cx, a, s_ntt);
    rp_sub_inplace(cx, b, as);
    for (int t = 0; t < k; ++t) {
      uint64_t q = cx.chain.primes[t];
      uint64_t f = cx.chain.ks_factor[j][t];
      uint64_t fsh = shoup(f, q);
      const uint64_t* tg = target.limb[t].data();
      uint64_t* bt = b.limb[t].data();
      for (uint32_t c = 0; c < cx.n; ++c)
        bt[c] = addmod(bt[c], mulmod_shoup(tg[c], f, fsh, q), q);
    }
    key.digit[j] = {std::move(b), std::move(a)};
  }
  return key;
}

}  // namespace

std::shared_ptr<KeyBody> rl_keygen(const ContextPtr& cx, uint64_t seed) {
  const Context& c = *cx;
  auto kb = std::make_shared<KeyBody>();
  kb->ctx = cx;
  kb->seed = seed;

  int k = static_cast<int>(c.chain.primes.size());
  util::Rng root(seed);

  auto srng = root.derive("secret");
  kb->s_coeff = sample_ternary(srng, c.n);
  kb->s_ntt = lift_to_ntt(c, kb->s_coeff, k);

  auto prng = root.derive("public");
  RnsPoly a = sample_uniform_ntt(c, prng, c.chain.num_data);
  RnsPoly e = lift_to_ntt(c, sample_cbd(prng, c.n), c.chain.num_data);
  RnsPoly s_data;
  s_data.limb.assign(kb->s_ntt.limb.begin(), kb->s_ntt.limb.begin() + c.chain.num_data);
  RnsPoly as = rp_mul(c, a, s_data);
  rp_sub_inplace(c, e, as);
  kb->pk = {std::move(e), std::move(a)};

  RnsPoly s2 = rp_mul(c, kb->s_ntt, kb->s_ntt);
  kb->relin = make_switch_key(c, root.derive("relin"), kb->s_ntt, s2);

  for (int32_t step : c.params.rotation_steps) {
    uint32_t norm = static_cast<uint32_t>(((step % static_cast<int64_t>(c.slots)) +
                                           static_cast<int64_t>(c.slots)) %
                                          static_cast<int64_t>(c.slots));
    if (norm == 0 || kb->galois.count(norm)) continue;
    uint64_t g = galois_exponent(c, norm);
    std::vector<int64_t> sg(c.n, 0);
    for (uint32_t i = 0; i < c.n; ++i) {
      uint64_t t = (static_cast<u128>(i) * g) % c.two_n;
      if (t < c.n) {
        sg[t] = kb->s_coeff[i];
      } else {
        sg[t - c.n] = -kb->s_coeff[i];
      }
    }
    RnsPoly target = lift_to_ntt(c, sg, k);
    kb->galois.emplace(norm, make_switch_key(c, root.derive("galois", norm), kb->s_ntt, target));
    kb->steps.push_back(static_cast<int32_t>(norm));
  }
  std::sort(kb->steps.begin(), kb->steps.end());
  return kb;
}

void rl_encrypt(const KeyBody& keys, const std::vector<int64_t>& m, CtBody& out) {
  const Context& c = *keys.ctx;
  int limbs = out.level + 1;

  uint64_t payload = util::fnv1a64(m.data(), m.size() * sizeof(int64_t));
  util::Rng root(keys.seed);
  auto rng = root.derive("encrypt", payload);

  RnsPoly u = lift_to_ntt(c, sample_ternary(rng, c.n), limbs);
  RnsPoly e0 = lift_to_ntt(c, sample_cbd(rng, c.n), limbs);
  RnsPoly e1 = lift_to_ntt(c, sample_cbd(rng, c.n), limbs);
  RnsPoly msg = lift_to_ntt(c, m, limbs);

  RnsPoly pk0;
  pk0.limb.assign(keys.pk[0].limb.begin(), keys.pk[0].limb.begin() + limbs);
  RnsPoly pk1;
  pk1.limb.assign(keys.pk[1].limb.begin(), keys.pk[1].limb.begin() + limbs);

  rp_mul_inplace(c, pk0, u);
  rp_add_inplace(c, pk0, e0);
  rp_add_inplace(c, pk0, msg);
  rp_mul_inplace(c, pk1, u);
  rp_add_inplace(c, pk1, e1);
  out.c = {std::move(pk0), std::move(pk1)};
}

std::vector<double> rl_decrypt_coeffs(const KeyBody& keys, const CtBody& ct) {
  const Context& c = *keys.ctx;
  int limbs = ct.level + 1;
  RnsPoly s;
  s.limb.assign(keys.s_ntt.limb.begin(), keys.s_ntt.limb.begin() + limbs);
  RnsPoly m = rp_mul(c, ct.c[1], s);
  rp_add_inplace(c, m, ct.c[0]);
  for (int i = 0; i < limbs; ++i) c.ntt[i].inverse(m.limb[i].data());
  std::vector<double> coeffs(c.n);
  for (uint32_t k = 0; k < c.n; ++k) coeffs[k] = c.chain.decode_coeff(m, k, ct.level);
  return coeffs;
}

}  // namespace enchvac::he::detail
