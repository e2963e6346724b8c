// Copyright 2026 The enchvac Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace enchvac::he {

enum class BackendKind : uint8_t { rlwe = 0, reference = 1 };

const char* to_string(BackendKind k);
BackendKind backend_from_string(const std::string& s);

// Leveled-scheme parameters. modulus_bits lists the prime chain in order:
// the first prime is the decryption base and the last is the key-switching
// prime; neither is ever dropped by rescaling, so the multiplicative depth
// equals modulus_bits.size() - 2. A fresh ciphertext starts at level = depth
// and every multiplication (ct-ct or ct-plain) lowers the level by one.
struct HeParams {
  uint32_t ring_degree = 0;            // power of two, >= 8
  std::vector<int> modulus_bits;       // length >= 3 for any multiplication
  int scale_bits = 0;                  // encoding scale = 2^scale_bits
  std::vector<int> rotation_steps;     // signed; >0 rotates up (left), <0 down

  uint32_t slot_count() const { return ring_degree / 2; }
  int depth() const { return static_cast<int>(modulus_bits.size()) - 2; }

  // Throws InvalidParams if the parameter set is malformed.
  void validate() const;

  bool operator==(const HeParams&) const = default;

  // N=8192, primes [40,26,26,26,40], scale 2^26, depth 3.
  static HeParams paper2024();
  // N=8192, primes [60,26x6,60], scale 2^26, depth 6. Deep enough for the
  // two-layer forward pass (5 levels) plus one concatenation level.
  static HeParams deep6();
  // Small ring for fast tests; depth = bits.size() - 2.
  static HeParams toy(uint32_t ring_degree, std::vector<int> bits, int scale_bits);

  static HeParams preset(const std::string& name);  // "paper-2024" | "deep-6"
};

// Rotation steps required by the packed-kernel layer for vectors tiled with
// period `dim`: up-steps 1..dim-1. They cover the diagonal method directly,
// and every down-rotation on period-dim data reduces to one of them because
// rotating down by r equals rotating up by dim - r.
std::vector<int> rotation_steps_for_dim(uint32_t dim, uint32_t slot_count);

}  // namespace enchvac::he
