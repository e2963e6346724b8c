// Copyright 2026 The enchvac Authors.
// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>

#include "enchvac/he/he.hpp"
#include "context.hpp"
#include "rlwe.hpp"

namespace enchvac::he {

using detail::Context;
using detail::CtBody;
using detail::KeyBody;
using detail::RnsPoly;
using detail::SwitchKey;

namespace {

constexpr uint16_t kVersion = 1;
constexpr size_t kHeaderSize = 17;

enum class Role : uint8_t { secret = 0, public_key = 1, relin = 2, galois = 3 };

struct Writer {
  std::vector<uint8_t> buf;

  void u8(uint8_t x) { buf.push_back(x); }
  void u16(uint16_t x) {
    for (int i = 0; i < 2; ++i) buf.push_back(static_cast<uint8_t>(x >> (8 * i)));
  }
  void u32(uint32_t x) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<uint8_t>(x >> (8 * i)));
  }
  void u64(uint64_t x) {
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<uint8_t>(x >> (8 * i)));
  }
  void f64(double x) { u64(std::bit_cast<uint64_t>(x)); }
};

struct Reader {
  std::span<const uint8_t> buf;
  size_t pos = 0;

  void need(size_t n) const {
    if (pos + n > buf.size()) throw SerializationError("truncated stream");
  }
  uint8_t u8() {
    need(1);
    return buf[pos++];
  }
  uint16_t u16() {
    need(2);
    uint16_t x = 0;
    for (int i = 0; i < 2; ++i) x |= static_cast<uint16_t>(buf[pos++]) << (8 * i);
    return x;
  }
  uint32_t u32() {
    need(4);
    uint32_t x = 0;
    for (int i = 0; i < 4; ++i) x |= static_cast<uint32_t>(buf[pos++]) << (8 * i);
    return x;
  }
  uint64_t u64() {
    need(8);
    uint64_t x = 0;
    for (int i = 0; i < 8; ++i) x |= static_cast<uint64_t>(buf[pos++]) << (8 * i);
    return x;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  bool done() const { return pos == buf.size(); }
};

void write_header(Writer& w, const Context& cx, uint8_t level, uint32_t logical_len,
                  uint8_t scale_adj) {
  w.u8('E');
  w.u8('N');
  w.u8('C');
  w.u8('1');
  w.u16(kVersion);
  w.u32(cx.n);
  w.u8(level);
  w.u8(static_cast<uint8_t>(cx.params.scale_bits));
  w.u32(logical_len);
  w.u8(scale_adj);
}

struct Header {
  uint32_t ring_degree = 0;
  uint8_t level = 0;
  uint8_t scale_bits = 0;
  uint32_t logical_len = 0;
  uint8_t scale_adj = 0;
};

Header read_header(Reader& r, const Context& cx) {
  char magic[4];
  for (char& m : magic) m = static_cast<char>(r.u8());
  if (std::memcmp(magic, "ENC1", 4) != 0) throw SerializationError("bad magic");
  if (r.u16() != kVersion) throw SerializationError("unsupported version");
  Header h;
  h.ring_degree = r.u32();
  h.level = r.u8();
  h.scale_bits = r.u8();
  h.logical_len = r.u32();
  h.scale_adj = r.u8();
  if (h.ring_degree != cx.n) throw SerializationError("ring degree does not match the context");
  if (h.scale_bits != static_cast<uint8_t>(cx.params.scale_bits))
    throw SerializationError("scale_bits does not match the context");
  return h;
}

int dyadic_adj(const Context& cx, int level, double scale) {
  double ratio = scale / cx.chain.scale_at[level];
  auto k = static_cast<int>(std::lround(std::log2(ratio)));
  if (k < 0 || k > 255) throw SerializationError("scale adjustment outside the wire range");
  return k;
}

void write_poly(Writer& w, const RnsPoly& p) {
  for (const auto& limb : p.limb)
    for (uint64_t x : limb) w.u64(x);
}

RnsPoly read_poly(Reader& r, uint32_t n, int limbs) {
  RnsPoly p;
  p.limb.resize(limbs);
  for (int i = 0; i < limbs; ++i) {
    p.limb[i].resize(n);
    for (uint32_t k = 0; k < n; ++k) p.limb[i][k] = r.u64();
  }
  return p;
}

void write_switch_key(Writer& w, const SwitchKey& key) {
  w.u8(static_cast<uint8_t>(key.digit.size()));
  for (const auto& d : key.digit) {
    write_poly(w, d[0]);
    write_poly(w, d[1]);
  }
}

SwitchKey read_switch_key(Reader& r, uint32_t n, int limbs) {
  SwitchKey key;
  int digits = r.u8();
  key.digit.resize(digits);
  for (auto& d : key.digit) {
    d[0] = read_poly(r, n, limbs);
    d[1] = read_poly(r, n, limbs);
  }
  return key;
}

}  // namespace

std::vector<uint8_t> serialize(const Ciphertext& ct) {
  const CtBody& b = ct.body();
  const Context& cx = *b.ctx;
  Writer w;
  w.buf.reserve(byte_size(ct));
  write_header(w, cx, static_cast<uint8_t>(b.level), b.logical_len,
               static_cast<uint8_t>(dyadic_adj(cx, b.level, b.scale)));
  if (cx.kind == BackendKind::reference) {
    if (b.ref.size() != b.logical_len) throw SerializationError("reference body out of shape");
    for (double x : b.ref) w.f64(x);
  } else {
    write_poly(w, b.c[0]);
    write_poly(w, b.c[1]);
  }
  return std::move(w.buf);
}

Ciphertext deserialize(const ContextPtr& ctx, std::span<const uint8_t> bytes) {
  const Context& cx = *ctx;
  Reader r{bytes};
  Header h = read_header(r, cx);
  if (h.level > cx.chain.top_level) throw SerializationError("level outside the modulus chain");
  if (h.logical_len < 1 || h.logical_len > cx.slots)
    throw SerializationError("logical length outside [1, slot_count]");

  auto body = std::make_shared<CtBody>();
  body->ctx = ctx;
  body->level = h.level;
  body->scale = cx.chain.scale_at[h.level] * std::ldexp(1.0, h.scale_adj);
  body->logical_len = h.logical_len;
  body->key_tag = 0;
  if (cx.kind == BackendKind::reference) {
    body->ref.resize(h.logical_len);
    for (auto& x : body->ref) x = r.f64();
  } else {
    body->c[0] = read_poly(r, cx.n, h.level + 1);
    body->c[1] = read_poly(r, cx.n, h.level + 1);
  }
  if (!r.done()) throw SerializationError("trailing bytes after ciphertext payload");
  return Ciphertext(std::move(body));
}

size_t byte_size(const Ciphertext& ct) {
  const CtBody& b = ct.body();
  if (b.ctx->kind == BackendKind::reference) return kHeaderSize + 8ULL * b.logical_len;
  return kHeaderSize + 16ULL * (b.level + 1) * b.ctx->n;
}

std::vector<uint8_t> serialize_keys(const KeySet& keys) {
  const KeyBody& kb = keys.body();
  const Context& cx = *kb.ctx;
  Writer w;

  write_header(w, cx, 0, 0, 0);
  w.u8(static_cast<uint8_t>(Role::secret));
  w.u64(kb.seed);
  if (cx.kind == BackendKind::rlwe) {
    for (int64_t s : kb.s_coeff) w.u8(static_cast<uint8_t>(static_cast<int8_t>(s)));
  }

  if (cx.kind == BackendKind::rlwe) {
    write_header(w, cx, static_cast<uint8_t>(cx.chain.top_level), 0, 0);
    w.u8(static_cast<uint8_t>(Role::public_key));
    write_poly(w, kb.pk[0]);
    write_poly(w, kb.pk[1]);

    write_header(w, cx, 0, 0, 0);
    w.u8(static_cast<uint8_t>(Role::relin));
    write_switch_key(w, kb.relin);
  }

  write_header(w, cx, 0, 0, 0);
  w.u8(static_cast<uint8_t>(Role::galois));
  if (cx.kind == BackendKind::rlwe) {
    w.u16(static_cast<uint16_t>(kb.galois.size()));
    for (const auto& [step, key] : kb.galois) {
      w.u32(step);
      write_switch_key(w, key);
    }
  } else {
    w.u16(static_cast<uint16_t>(kb.steps.size()));
    for (int32_t s : kb.steps) w.u32(static_cast<uint32_t>(s));
  }
  return std::move(w.buf);
}

KeySet deserialize_keys(const ContextPtr& ctx, std::span<const uint8_t> bytes) {
  const Context& cx = *ctx;
  int k = static_cast<int>(cx.chain.primes.size());
  Reader r{bytes};

  auto kb = std::make_shared<KeyBody>();
  kb->ctx = ctx;

  read_header(r, cx);
  if (r.u8() != static_cast<uint8_t>(Role::secret))
    throw SerializationError("expected secret key section");
  kb->seed = r.u64();
  if (cx.kind == BackendKind::rlwe) {
    kb->s_coeff.resize(cx.n);
    for (auto& s : kb->s_coeff) s = static_cast<int8_t>(r.u8());
    kb->s_ntt = detail::lift_to_ntt(cx, kb->s_coeff, k);

    read_header(r, cx);
    if (r.u8() != static_cast<uint8_t>(Role::public_key))
      throw SerializationError("expected public key section");
    kb->pk[0] = read_poly(r, cx.n, cx.chain.num_data);
    kb->pk[1] = read_poly(r, cx.n, cx.chain.num_data);

    read_header(r, cx);
    if (r.u8() != static_cast<uint8_t>(Role::relin))
      throw SerializationError("expected relinearization key section");
    kb->relin = read_switch_key(r, cx.n, k);
  }

  read_header(r, cx);
  if (r.u8() != static_cast<uint8_t>(Role::galois))
    throw SerializationError("expected galois key section");
  int count = r.u16();
  for (int i = 0; i < count; ++i) {
    uint32_t step = r.u32();
    if (cx.kind == BackendKind::rlwe) {
      kb->galois.emplace(step, read_switch_key(r, cx.n, k));
    }
    kb->steps.push_back(static_cast<int32_t>(step));
  }
  std::sort(kb->steps.begin(), kb->steps.end());
  if (!r.done()) throw SerializationError("trailing bytes after key payload");

  kb->tag = detail::key_fingerprint(cx, kb->seed);
  return KeySet(std::move(kb));
}

}  // namespace enchvac::he
