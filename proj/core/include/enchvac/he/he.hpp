// Copyright 2026 The enchvac Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "enchvac/he/errors.hpp"
#include "enchvac/he/params.hpp"

namespace enchvac::he {

namespace detail {
struct Context;
struct CtBody;
struct PtBody;
struct KeyBody;
}  // namespace detail

// Immutable evaluation context: parameter set, backend kind, derived prime
// chain, NTT/embedding tables and the per-level scale ladder. Ciphertexts,
// plaintexts and keys all hold a shared pointer to the context they belong to.
using ContextPtr = std::shared_ptr<const detail::Context>;

ContextPtr make_context(const HeParams& params, BackendKind kind);

const HeParams& context_params(const ContextPtr& ctx);
BackendKind context_kind(const ContextPtr& ctx);
// Canonical scale of a ciphertext at `level` before any scalar adjustments.
double context_scale_at(const ContextPtr& ctx, int level);

class Ciphertext {
 public:
  Ciphertext() = default;
  explicit Ciphertext(std::shared_ptr<const detail::CtBody> body) : body_(std::move(body)) {}

  bool valid() const { return body_ != nullptr; }
  int level() const;
  double scale() const;
  uint32_t logical_len() const;  // packed vector length; rotation modulus
  uint32_t slot_count() const;
  BackendKind kind() const;
  const ContextPtr& context() const;

  const detail::CtBody& body() const { return *body_; }

 private:
  std::shared_ptr<const detail::CtBody> body_;
};

class Plaintext {
 public:
  Plaintext() = default;
  explicit Plaintext(std::shared_ptr<const detail::PtBody> body) : body_(std::move(body)) {}

  bool valid() const { return body_ != nullptr; }
  int level() const;
  double scale() const;
  uint32_t logical_len() const;
  const detail::PtBody& body() const { return *body_; }

 private:
  std::shared_ptr<const detail::PtBody> body_;
};

class KeySet {
 public:
  KeySet() = default;
  explicit KeySet(std::shared_ptr<const detail::KeyBody> body) : body_(std::move(body)) {}

  bool valid() const { return body_ != nullptr; }
  uint64_t seed() const;
  const ContextPtr& context() const;
  const detail::KeyBody& body() const { return *body_; }

 private:
  std::shared_ptr<const detail::KeyBody> body_;
};

// --- Key generation ---------------------------------------------------------

// Deterministic: a fixed (params, kind, seed) triple yields byte-identical
// keys. Galois keys are generated for every step in params.rotation_steps.
KeySet keygen(const ContextPtr& ctx, uint64_t seed);

// --- Encoding / encryption --------------------------------------------------

// Packs v into a plaintext at the given level and scale. The vector is tiled
// periodically across all slots with period logical_len (v is zero-extended
// to logical_len when shorter), which is what makes slot rotation act as a
// cyclic rotation of the logical vector.
Plaintext encode(const ContextPtr& ctx, std::span<const double> v, uint32_t logical_len,
                 int level, double scale);

std::vector<double> decode(const Plaintext& p);

// Encrypts v with logical length v.size() at the top level.
Ciphertext encrypt(std::span<const double> v, const KeySet& keys);
// Encrypts v zero-extended to logical_len (v.size() <= logical_len).
Ciphertext encrypt(std::span<const double> v, uint32_t logical_len, const KeySet& keys);

// Returns the first logical_len slots.
std::vector<double> decrypt(const Ciphertext& ct, const KeySet& keys);

// --- Arithmetic -------------------------------------------------------------
// Binary operations align operand levels internally (modulus switch of the
// higher-level operand); mismatched logical lengths raise SlotMismatch.

Ciphertext add(const Ciphertext& a, const Ciphertext& b);
Ciphertext sub(const Ciphertext& a, const Ciphertext& b);
Ciphertext negate(const Ciphertext& a);

// Adds an encoded plaintext. The plaintext level must not exceed a's; scales
// must match after a is dropped to the plaintext level.
Ciphertext add_plain(const Ciphertext& a, const Plaintext& p);
// Convenience: encodes v at a's level/scale first.
Ciphertext add_plain(const Ciphertext& a, std::span<const double> v);
Ciphertext add_plain_scalar(const Ciphertext& a, double c);

// Relinearized and rescaled product; both operands need level >= 1.
Ciphertext mul(const Ciphertext& a, const Ciphertext& b, const KeySet& keys);

// Slotwise product with an encoded plaintext; consumes 1 level.
Ciphertext mul_plain(const Ciphertext& a, const Plaintext& p, const KeySet& keys);
// Convenience: encodes v at a's level/scale, then mul_plain.
Ciphertext mul_plain(const Ciphertext& a, std::span<const double> v, const KeySet& keys);

// Multiplies every slot by a scalar constant without consuming a level. The
// constant is quantized to round(c * 2^t) / 2^t with t the context's dyadic
// budget (base_bits - scale_bits - 14, clamped to [6, 20]) and the ciphertext
// scale adjusted by 2^t, so the scale ledger stays exact. Both backends apply
// the same quantization. Caller contract: |slot value| * scale * 2^t must
// stay under half the level's modulus, which binds at level 0.
Ciphertext scalar_mul(const Ciphertext& a, double c);

// Cyclic rotation of the logical vector by j slots upward (x[i] <- x[i+j]).
// Negative j rotates downward. Level and scale are unchanged. Requires the
// galois key for the normalized step.
Ciphertext rotate(const Ciphertext& a, int j, const KeySet& keys);

// Modulus switch to `level`. Values are unchanged (up to rescale rounding of
// order 1/scale) and the scale stays on the canonical ladder.
Ciphertext drop_to_level(const Ciphertext& a, int level);

// --- Serialization ----------------------------------------------------------

std::vector<uint8_t> serialize(const Ciphertext& ct);
Ciphertext deserialize(const ContextPtr& ctx, std::span<const uint8_t> bytes);
size_t byte_size(const Ciphertext& ct);

// Key files share the ciphertext header with a role byte per section.
std::vector<uint8_t> serialize_keys(const KeySet& keys);
KeySet deserialize_keys(const ContextPtr& ctx, std::span<const uint8_t> bytes);

// --- Diagnostics -------------------------------------------------------------

// Measured encoding/encryption roundtrip error: max_i |dec(enc(v))_i - v_i|
// over `trials` random vectors with entries in [-range, range].
double measure_eps_enc(const KeySet& keys, uint32_t len, double range, int trials,
                       uint64_t seed);

// Cumulative operation tallies for the context (rotation and multiplication
// counts are part of the kernel contracts and are pinned by tests).
struct OpCounts {
  uint64_t rotations = 0;
  uint64_t ct_muls = 0;
  uint64_t plain_muls = 0;
  uint64_t rescales = 0;
};
OpCounts op_counts(const ContextPtr& ctx);
void reset_op_counts(const ContextPtr& ctx);

}  // namespace enchvac::he
