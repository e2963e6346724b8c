// Copyright 2026 The enchvac Authors.
// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <memory>

#include "enchvac/he/he.hpp"
#include "enchvac/util/rng.hpp"
#include "context.hpp"
#include "rlwe.hpp"

namespace enchvac::he {

using detail::Context;
using detail::CtBody;
using detail::KeyBody;
using detail::PtBody;
using detail::RnsPoly;

int Ciphertext::level() const { return body_->level; }
double Ciphertext::scale() const { return body_->scale; }
uint32_t Ciphertext::logical_len() const { return body_->logical_len; }
uint32_t Ciphertext::slot_count() const { return body_->ctx->slots; }
BackendKind Ciphertext::kind() const { return body_->ctx->kind; }
const ContextPtr& Ciphertext::context() const { return body_->ctx; }

int Plaintext::level() const { return body_->level; }
double Plaintext::scale() const { return body_->scale; }
uint32_t Plaintext::logical_len() const { return body_->logical_len; }

uint64_t KeySet::seed() const { return body_->seed; }
const ContextPtr& KeySet::context() const { return body_->ctx; }

namespace detail {

uint64_t key_fingerprint(const Context& cx, uint64_t seed) {
  uint64_t h = util::fnv1a64(&seed, sizeof(seed));
  uint32_t n = cx.n;
  h ^= util::fnv1a64(&n, sizeof(n));
  for (int b : cx.params.modulus_bits) h = h * 1099511628211ULL ^ static_cast<uint64_t>(b);
  h ^= static_cast<uint64_t>(cx.kind);
  return h == 0 ? 1 : h;
}

}  // namespace detail

namespace {

void require_same_context(const ContextPtr& a, const ContextPtr& b) {
  if (a.get() != b.get()) throw InvalidParams("operands belong to different contexts");
}

// Dyadic exponent of `scale` relative to the canonical scale at `level`.
int dyadic_exp(const Context& cx, int level, double scale) {
  double ratio = scale / cx.chain.scale_at[level];
  int k = static_cast<int>(std::lround(std::log2(ratio)));
  if (k < 0 || k > 255 || std::abs(ratio - std::ldexp(1.0, k)) > 1e-6 * std::ldexp(1.0, k))
    throw InvalidParams("scale is off the canonical ladder for this level");
  return k;
}

// Tiles v (zero-extended to len) periodically across all slots.
std::vector<double> tile_slots(const Context& cx, std::span<const double> v, uint32_t len) {
  std::vector<double> slots(cx.slots);
  for (uint32_t i = 0; i < cx.slots; ++i) {
    uint32_t j = i % len;
    slots[i] = j < v.size() ? v[j] : 0.0;
  }
  return slots;
}

std::vector<double> pad_logical(std::span<const double> v, uint32_t len) {
  std::vector<double> out(len, 0.0);
  std::copy(v.begin(), v.end(), out.begin());
  return out;
}

std::shared_ptr<CtBody> clone_body(const CtBody& a) { return std::make_shared<CtBody>(a); }

double encrypt_value_bound(const Context& cx) {
  return std::ldexp(1.0, cx.params.modulus_bits.front() - cx.params.scale_bits - 2);
}

// Descends one level preserving the canonical ladder: multiply by
// round(scale_at[L]) and rescale by prime L. Exact no-op on reference.
void drop_one_level(const Context& cx, CtBody& a) {
  int l = a.level;
  int j = dyadic_exp(cx, l, a.scale);
  if (cx.kind == BackendKind::rlwe) {
    int64_t w = static_cast<int64_t>(cx.chain.drop_w[l]);
    for (auto& comp : a.c) {
      detail::rp_scalar_inplace(cx, comp, w);
      detail::rescale_inplace(cx, comp);
    }
  }
  a.level = l - 1;
  a.scale = cx.chain.scale_at[l - 1] * std::ldexp(1.0, j);
}

std::shared_ptr<CtBody> drop_body(const ContextPtr& ctx, const CtBody& a, int target) {
  auto out = clone_body(a);
  while (out->level > target) drop_one_level(*ctx, *out);
  return out;
}

// Raises the dyadic exponent by `delta` (raw doubling; values unchanged).
void dyadic_boost(const Context& cx, CtBody& a, int delta) {
  if (delta == 0) return;
  if (cx.kind == BackendKind::rlwe) {
    if (delta > 62) throw InvalidParams("dyadic alignment gap too large");
    int64_t w = int64_t{1} << delta;
    for (auto& comp : a.c) detail::rp_scalar_inplace(cx, comp, w);
  }
  a.scale = a.scale * std::ldexp(1.0, delta);
}

struct AlignedPair {
  std::shared_ptr<CtBody> a, b;
};

// Level alignment by modulus switch, then dyadic scale alignment.
AlignedPair align_pair(const ContextPtr& ctx, const CtBody& a, const CtBody& b) {
  const Context& cx = *ctx;
  int target = std::min(a.level, b.level);
  AlignedPair p{drop_body(ctx, a, target), drop_body(ctx, b, target)};
  int ja = dyadic_exp(cx, target, p.a->scale);
  int jb = dyadic_exp(cx, target, p.b->scale);
  if (ja < jb) {
    dyadic_boost(cx, *p.a, jb - ja);
  } else if (jb < ja) {
    dyadic_boost(cx, *p.b, ja - jb);
  }
  return p;
}

// Shared decode path: scaled RNS coefficients (NTT domain) to slot values.
std::vector<double> decode_rns(const Context& cx, const RnsPoly& ntt_poly, int level, double scale,
                               uint32_t len, bool check_magnitude) {
  RnsPoly m = ntt_poly;
  for (int i = 0; i <= level; ++i) cx.ntt[i].inverse(m.limb[i].data());
  std::vector<double> coeffs(cx.n);
  double max_abs = 0.0;
  for (uint32_t k = 0; k < cx.n; ++k) {
    coeffs[k] = cx.chain.decode_coeff(m, k, level);
    max_abs = std::max(max_abs, std::abs(coeffs[k]));
  }
  // Honest payloads stay two bits under the modulus (encode enforces it);
  // wrong-key decryptions look uniform, with top coefficients near q/2.
  if (check_magnitude && max_abs > 0.0 &&
      std::log2(max_abs) > cx.chain.log2_q_at[level] - 1.5) {
    throw KeyError("decryption produced out-of-range coefficients (mismatched key?)");
  }
  for (auto& c : coeffs) c /= scale;
  std::vector<double> slots;
  cx.embed.coeffs_to_slots(coeffs, slots);
  slots.resize(len);
  return slots;
}

}  // namespace

// --- Key generation ----------------------------------------------------------

KeySet keygen(const ContextPtr& ctx, uint64_t seed) {
  std::shared_ptr<KeyBody> kb;
  if (ctx->kind == BackendKind::rlwe) {
    kb = detail::rl_keygen(ctx, seed);
  } else {
    kb = std::make_shared<KeyBody>();
    kb->ctx = ctx;
    kb->seed = seed;
    for (int step : ctx->params.rotation_steps) {
      int64_t s = static_cast<int64_t>(ctx->slots);
      auto norm = static_cast<int32_t>(((step % s) + s) % s);
      if (norm != 0) kb->steps.push_back(norm);
    }
    std::sort(kb->steps.begin(), kb->steps.end());
    kb->steps.erase(std::unique(kb->steps.begin(), kb->steps.end()), kb->steps.end());
  }
  kb->tag = detail::key_fingerprint(*ctx, seed);
  return KeySet(std::move(kb));
}

// --- Encoding / encryption ----------------------------------------------------

Plaintext encode(const ContextPtr& ctx, std::span<const double> v, uint32_t logical_len,
                 int level, double scale) {
  const Context& cx = *ctx;
  if (logical_len < 1 || logical_len > cx.slots)
    throw SlotMismatch("logical length must lie in [1, slot_count]");
  if (v.size() > logical_len) throw SlotMismatch("vector longer than its logical length");
  if (level < 0 || level > cx.chain.top_level) throw InvalidParams("level outside modulus chain");
  dyadic_exp(cx, level, scale);

  auto pt = std::make_shared<PtBody>();
  pt->ctx = ctx;
  pt->level = level;
  pt->scale = scale;
  pt->logical_len = logical_len;
  if (cx.kind == BackendKind::reference) {
    pt->ref = pad_logical(v, logical_len);
    return Plaintext(std::move(pt));
  }

  std::vector<double> slots = tile_slots(cx, v, logical_len);
  std::vector<double> coeffs;
  cx.embed.slots_to_coeffs(slots, coeffs);
  double max_abs = 0.0;
  for (double c : coeffs) max_abs = std::max(max_abs, std::abs(c * scale));
  if (max_abs >= std::ldexp(1.0, 62) ||
      (max_abs > 0.0 && std::log2(max_abs) > cx.chain.log2_q_at[level] - 2.0))
    throw InvalidParams("encoded coefficients exceed the modulus capacity at this level");
  std::vector<int64_t> m(cx.n);
  for (uint32_t k = 0; k < cx.n; ++k) m[k] = std::llround(coeffs[k] * scale);
  pt->m = detail::lift_to_ntt(cx, m, level + 1);
  return Plaintext(std::move(pt));
}

std::vector<double> decode(const Plaintext& p) {
  const PtBody& b = p.body();
  const Context& cx = *b.ctx;
  if (cx.kind == BackendKind::reference) return b.ref;
  return decode_rns(cx, b.m, b.level, b.scale, b.logical_len, false);
}

Ciphertext encrypt(std::span<const double> v, const KeySet& keys) {
  return encrypt(v, static_cast<uint32_t>(v.size()), keys);
}

Ciphertext encrypt(std::span<const double> v, uint32_t logical_len, const KeySet& keys) {
  const KeyBody& kb = keys.body();
  const Context& cx = *kb.ctx;
  if (v.empty()) throw SlotMismatch("cannot encrypt an empty vector");
  if (logical_len < v.size() || logical_len > cx.slots)
    throw SlotMismatch("logical length must lie in [len(v), slot_count]");
  double bound = encrypt_value_bound(cx);
  for (double x : v)
    if (std::abs(x) > bound) throw InvalidParams("plaintext value exceeds the range bound");

  auto ct = std::make_shared<CtBody>();
  ct->ctx = kb.ctx;
  ct->level = cx.chain.top_level;
  ct->scale = cx.chain.scale_at[ct->level];
  ct->logical_len = logical_len;
  ct->key_tag = kb.tag;

  if (cx.kind == BackendKind::reference) {
    ct->ref = pad_logical(v, logical_len);
    uint64_t payload = util::fnv1a64(ct->ref.data(), ct->ref.size() * sizeof(double));
    util::Rng root(kb.seed);
    auto rng = root.derive("encrypt", payload);
    // Injected noise keeps the reference backend honest about approximation.
    for (auto& x : ct->ref) x += (rng.next_double() - 0.5) * 2e-10;
    return Ciphertext(std::move(ct));
  }

  std::vector<double> slots = tile_slots(cx, v, logical_len);
  std::vector<double> coeffs;
  cx.embed.slots_to_coeffs(slots, coeffs);
  std::vector<int64_t> m(cx.n);
  for (uint32_t k = 0; k < cx.n; ++k) m[k] = std::llround(coeffs[k] * ct->scale);
  detail::rl_encrypt(kb, m, *ct);
  return Ciphertext(std::move(ct));
}

std::vector<double> decrypt(const Ciphertext& ct, const KeySet& keys) {
  const CtBody& b = ct.body();
  const KeyBody& kb = keys.body();
  require_same_context(b.ctx, kb.ctx);
  if (b.key_tag != 0 && b.key_tag != kb.tag)
    throw KeyError("ciphertext was not produced under this key set");
  const Context& cx = *b.ctx;
  if (cx.kind == BackendKind::reference) return b.ref;

  RnsPoly m = detail::rp_mul(cx, b.c[1], [&] {
    RnsPoly s;
    s.limb.assign(kb.s_ntt.limb.begin(), kb.s_ntt.limb.begin() + b.level + 1);
    return s;
  }());
  detail::rp_add_inplace(cx, m, b.c[0]);
  return decode_rns(cx, m, b.level, b.scale, b.logical_len, true);
}

// --- Arithmetic ---------------------------------------------------------------

Ciphertext add(const Ciphertext& a, const Ciphertext& b) {
  const CtBody& A = a.body();
  const CtBody& B = b.body();
  require_same_context(A.ctx, B.ctx);
  if (A.logical_len != B.logical_len) throw SlotMismatch("added ciphertexts differ in length");
  const Context& cx = *A.ctx;
  auto [pa, pb] = align_pair(A.ctx, A, B);
  auto out = pa;
  out->key_tag = A.key_tag != 0 ? A.key_tag : B.key_tag;
  if (cx.kind == BackendKind::reference) {
    for (size_t i = 0; i < out->ref.size(); ++i) out->ref[i] += pb->ref[i];
  } else {
    for (int c = 0; c < 2; ++c) detail::rp_add_inplace(cx, out->c[c], pb->c[c]);
  }
  return Ciphertext(std::move(out));
}

Ciphertext sub(const Ciphertext& a, const Ciphertext& b) {
  const CtBody& A = a.body();
  const CtBody& B = b.body();
  require_same_context(A.ctx, B.ctx);
  if (A.logical_len != B.logical_len) throw SlotMismatch("subtracted ciphertexts differ in length");
  const Context& cx = *A.ctx;
  auto [pa, pb] = align_pair(A.ctx, A, B);
  auto out = pa;
  out->key_tag = A.key_tag != 0 ? A.key_tag : B.key_tag;
  if (cx.kind == BackendKind::reference) {
    for (size_t i = 0; i < out->ref.size(); ++i) out->ref[i] -= pb->ref[i];
  } else {
    for (int c = 0; c < 2; ++c) detail::rp_sub_inplace(cx, out->c[c], pb->c[c]);
  }
  return Ciphertext(std::move(out));
}

Ciphertext negate(const Ciphertext& a) {
  const Context& cx = *a.body().ctx;
  auto out = clone_body(a.body());
  if (cx.kind == BackendKind::reference) {
    for (auto& x : out->ref) x = -x;
  } else {
    for (auto& comp : out->c) detail::rp_neg_inplace(cx, comp);
  }
  return Ciphertext(std::move(out));
}

Ciphertext add_plain(const Ciphertext& a, const Plaintext& p) {
  const CtBody& A = a.body();
  const PtBody& P = p.body();
  require_same_context(A.ctx, P.ctx);
  if (A.logical_len != P.logical_len) throw SlotMismatch("plaintext length mismatch in add_plain");
  if (P.level > A.level) throw InvalidParams("plaintext encoded above the ciphertext level");
  const Context& cx = *A.ctx;
  auto out = drop_body(A.ctx, A, P.level);
  if (std::abs(out->scale - P.scale) > 1e-6 * out->scale)
    throw InvalidParams("plaintext scale does not match the ciphertext scale");
  if (cx.kind == BackendKind::reference) {
    for (size_t i = 0; i < out->ref.size(); ++i) out->ref[i] += P.ref[i];
  } else {
    detail::rp_add_inplace(cx, out->c[0], P.m);
  }
  return Ciphertext(std::move(out));
}

Ciphertext add_plain(const Ciphertext& a, std::span<const double> v) {
  const CtBody& A = a.body();
  return add_plain(a, encode(A.ctx, v, A.logical_len, A.level, A.scale));
}

Ciphertext add_plain_scalar(const Ciphertext& a, double c) {
  std::vector<double> v(a.logical_len(), c);
  return add_plain(a, v);
}

Ciphertext mul(const Ciphertext& a, const Ciphertext& b, const KeySet& keys) {
  const CtBody& A = a.body();
  const CtBody& B = b.body();
  require_same_context(A.ctx, B.ctx);
  require_same_context(A.ctx, keys.context());
  if (A.logical_len != B.logical_len) throw SlotMismatch("multiplied ciphertexts differ in length");
  if (A.level < 1 || B.level < 1)
    throw DepthExhausted("mul requires both operands at level >= 1");
  const Context& cx = *A.ctx;
  // Levels must match but scales need not: the product's scale is their
  // product, so no dyadic boost happens here. Boosting would double the
  // dyadic exponent and burn modulus headroom for nothing.
  int target = std::min(A.level, B.level);
  auto pa = drop_body(A.ctx, A, target);
  auto pb = drop_body(A.ctx, B, target);
  int l = target;

  auto out = std::make_shared<CtBody>();
  out->ctx = A.ctx;
  out->level = l - 1;
  out->logical_len = A.logical_len;
  out->key_tag = A.key_tag != 0 ? A.key_tag : B.key_tag;
  int ja = dyadic_exp(cx, l, pa->scale);
  int jb = dyadic_exp(cx, l, pb->scale);
  out->scale = cx.chain.scale_at[l - 1] * std::ldexp(1.0, ja + jb);

  if (cx.kind == BackendKind::reference) {
    out->ref.resize(pa->ref.size());
    for (size_t i = 0; i < out->ref.size(); ++i) out->ref[i] = pa->ref[i] * pb->ref[i];
  } else {
    RnsPoly t0 = detail::rp_mul(cx, pa->c[0], pb->c[0]);
    RnsPoly t1 = detail::rp_mul(cx, pa->c[0], pb->c[1]);
    {
      RnsPoly t1b = detail::rp_mul(cx, pa->c[1], pb->c[0]);
      detail::rp_add_inplace(cx, t1, t1b);
    }
    RnsPoly t2 = detail::rp_mul(cx, pa->c[1], pb->c[1]);
    for (int i = 0; i <= l; ++i) cx.ntt[i].inverse(t2.limb[i].data());
    RnsPoly r0, r1;
    detail::keyswitch(cx, t2, keys.body().relin, r0, r1);
    detail::rp_add_inplace(cx, t0, r0);
    detail::rp_add_inplace(cx, t1, r1);
    detail::rescale_inplace(cx, t0);
    detail::rescale_inplace(cx, t1);
    out->c = {std::move(t0), std::move(t1)};
  }
  cx.counters.ct_muls.fetch_add(1, std::memory_order_relaxed);
  return Ciphertext(std::move(out));
}

Ciphertext mul_plain(const Ciphertext& a, const Plaintext& p, const KeySet& keys) {
  const CtBody& A = a.body();
  const PtBody& P = p.body();
  require_same_context(A.ctx, P.ctx);
  require_same_context(A.ctx, keys.context());
  if (A.logical_len != P.logical_len) throw SlotMismatch("plaintext length mismatch in mul_plain");
  if (P.level > A.level) throw InvalidParams("plaintext encoded above the ciphertext level");
  if (A.level < 1 || P.level < 1) throw DepthExhausted("mul_plain requires level >= 1");
  const Context& cx = *A.ctx;
  auto aligned = drop_body(A.ctx, A, P.level);
  int l = aligned->level;

  auto out = std::make_shared<CtBody>();
  out->ctx = A.ctx;
  out->level = l - 1;
  out->logical_len = A.logical_len;
  out->key_tag = A.key_tag;
  int ja = dyadic_exp(cx, l, aligned->scale);
  int jp = dyadic_exp(cx, l, P.scale);
  out->scale = cx.chain.scale_at[l - 1] * std::ldexp(1.0, ja + jp);

  if (cx.kind == BackendKind::reference) {
    out->ref.resize(aligned->ref.size());
    for (size_t i = 0; i < out->ref.size(); ++i) out->ref[i] = aligned->ref[i] * P.ref[i];
  } else {
    RnsPoly c0 = detail::rp_mul(cx, aligned->c[0], P.m);
    RnsPoly c1 = detail::rp_mul(cx, aligned->c[1], P.m);
    detail::rescale_inplace(cx, c0);
    detail::rescale_inplace(cx, c1);
    out->c = {std::move(c0), std::move(c1)};
  }
  cx.counters.plain_muls.fetch_add(1, std::memory_order_relaxed);
  return Ciphertext(std::move(out));
}

Ciphertext mul_plain(const Ciphertext& a, std::span<const double> v, const KeySet& keys) {
  const CtBody& A = a.body();
  // Canonical (dyadic-free) encoding keeps the product on the ladder.
  Plaintext p = encode(A.ctx, v, A.logical_len, A.level, A.ctx->chain.scale_at[A.level]);
  return mul_plain(a, p, keys);
}

Ciphertext scalar_mul(const Ciphertext& a, double c) {
  const CtBody& A = a.body();
  const Context& cx = *A.ctx;
  int t = cx.dyadic_bits;
  double scaled = c * std::ldexp(1.0, t);
  if (std::abs(scaled) >= std::ldexp(1.0, 62))
    throw InvalidParams("scalar constant too large for dyadic quantization");
  int64_t w = std::llround(scaled);
  auto out = clone_body(A);
  out->scale = A.scale * std::ldexp(1.0, t);
  if (cx.kind == BackendKind::reference) {
    double cq = static_cast<double>(w) * std::ldexp(1.0, -t);
    for (auto& x : out->ref) x *= cq;
  } else {
    for (auto& comp : out->c) detail::rp_scalar_inplace(cx, comp, w);
  }
  return Ciphertext(std::move(out));
}

Ciphertext rotate(const Ciphertext& a, int j, const KeySet& keys) {
  const CtBody& A = a.body();
  require_same_context(A.ctx, keys.context());
  const Context& cx = *A.ctx;
  const KeyBody& kb = keys.body();
  int64_t len = A.logical_len;
  auto step = static_cast<uint32_t>(((j % len) + len) % len);
  cx.counters.rotations.fetch_add(1, std::memory_order_relaxed);
  if (step == 0) return a;

  if (cx.kind == BackendKind::reference) {
    if (!std::binary_search(kb.steps.begin(), kb.steps.end(), static_cast<int32_t>(step)))
      throw KeyError("missing galois key for rotation step " + std::to_string(step));
    auto out = clone_body(A);
    std::rotate(out->ref.begin(), out->ref.begin() + step, out->ref.end());
    return Ciphertext(std::move(out));
  }

  auto it = kb.galois.find(step);
  if (it == kb.galois.end())
    throw KeyError("missing galois key for rotation step " + std::to_string(step));
  uint64_t g = detail::galois_exponent(cx, step);

  auto out = std::make_shared<CtBody>();
  out->ctx = A.ctx;
  out->level = A.level;
  out->scale = A.scale;
  out->logical_len = A.logical_len;
  out->key_tag = A.key_tag;

  RnsPoly c0p = detail::automorph(cx, A.c[0], g);
  RnsPoly c1_coeff;
  c1_coeff.limb.resize(A.level + 1);
  std::vector<uint64_t> tmp(cx.n);
  for (int i = 0; i <= A.level; ++i) {
    tmp = A.c[1].limb[i];
    cx.ntt[i].inverse(tmp.data());
    c1_coeff.limb[i].assign(cx.n, 0);
    detail::automorph_perm(cx, tmp.data(), c1_coeff.limb[i].data(), g, cx.chain.primes[i]);
  }
  RnsPoly k0, k1;
  detail::keyswitch(cx, c1_coeff, it->second, k0, k1);
  detail::rp_add_inplace(cx, k0, c0p);
  out->c = {std::move(k0), std::move(k1)};
  return Ciphertext(std::move(out));
}

Ciphertext drop_to_level(const Ciphertext& a, int level) {
  const CtBody& A = a.body();
  if (level < 0) throw InvalidParams("cannot drop below level 0");
  if (level > A.level) throw InvalidParams("drop_to_level cannot raise the level");
  if (level == A.level) return a;
  return Ciphertext(drop_body(A.ctx, A, level));
}

// --- Diagnostics --------------------------------------------------------------

double measure_eps_enc(const KeySet& keys, uint32_t len, double range, int trials,
                       uint64_t seed) {
  util::Rng rng(seed);
  double worst = 0.0;
  std::vector<double> v(len);
  for (int t = 0; t < trials; ++t) {
    for (auto& x : v) x = (rng.next_double() * 2.0 - 1.0) * range;
    auto back = decrypt(encrypt(v, keys), keys);
    for (uint32_t i = 0; i < len; ++i) worst = std::max(worst, std::abs(back[i] - v[i]));
  }
  return worst;
}

OpCounts op_counts(const ContextPtr& ctx) {
  const auto& c = ctx->counters;
  return OpCounts{c.rotations.load(), c.ct_muls.load(), c.plain_muls.load(), c.rescales.load()};
}

void reset_op_counts(const ContextPtr& ctx) { ctx->counters.reset(); }

}  // namespace enchvac::he
