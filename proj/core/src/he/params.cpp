// Copyright 2026 The enchvac Authors.
// SPDX-License-Identifier: Apache-2.0
#include "enchvac/he/params.hpp"

#include <algorithm>

#include "enchvac/he/errors.hpp"

namespace enchvac::he {

const char* to_string(BackendKind kind) {
  return kind == BackendKind::rlwe ? "rlwe" : "reference";
}

BackendKind backend_from_string(const std::string& name) {
  if (name == "rlwe") return BackendKind::rlwe;
  if (name == "reference") return BackendKind::reference;
  throw InvalidParams("unknown backend '" + name + "' (expected 'rlwe' or 'reference')");
}

void HeParams::validate() const {
  if (ring_degree < 8 || (ring_degree & (ring_degree - 1)) != 0)
    throw InvalidParams("ring_degree must be a power of two and at least 8");
  if (modulus_bits.size() < 2)
    throw InvalidParams("modulus_bits needs at least 2 entries (base + special)");
  for (int b : modulus_bits)
    if (b < 5 || b > 61) throw InvalidParams("modulus bit sizes must lie in [5, 61]");
  if (scale_bits < 4 || scale_bits > modulus_bits.front() - 2)
    throw InvalidParams("scale_bits must lie in [4, base_bits - 2]");
  // Interior primes are the rescaling divisors; a scale above any of them
  // would collapse the ladder.
  for (size_t i = 1; i + 1 < modulus_bits.size(); ++i)
    if (scale_bits > modulus_bits[i])
      throw InvalidParams("scale_bits must not exceed any interior modulus size");
}

std::vector<int> rotation_steps_for_dim(uint32_t dim, uint32_t slot_count) {
  if (dim < 1 || dim > slot_count)
    throw InvalidParams("packing dimension must lie in [1, slot_count]");
  std::vector<int> steps;
  for (uint32_t j = 1; j < dim; ++j) steps.push_back(static_cast<int>(j));
  return steps;
}

HeParams HeParams::paper2024() {
  HeParams p;
  p.ring_degree = 8192;
  p.modulus_bits = {40, 26, 26, 26, 40};
  p.scale_bits = 26;
  p.rotation_steps = rotation_steps_for_dim(16, p.slot_count());
  return p;
}

HeParams HeParams::deep6() {
  HeParams p;
  p.ring_degree = 8192;
  p.modulus_bits = {60, 26, 26, 26, 26, 26, 26, 60};
  p.scale_bits = 26;
  p.rotation_steps = rotation_steps_for_dim(16, p.slot_count());
  return p;
}

HeParams HeParams::toy(uint32_t ring_degree, std::vector<int> modulus_bits, int scale_bits) {
  HeParams p;
  p.ring_degree = ring_degree;
  p.modulus_bits = std::move(modulus_bits);
  p.scale_bits = scale_bits;
  p.rotation_steps = {1, 2, 3};
  return p;
}

HeParams HeParams::preset(const std::string& name) {
  if (name == "paper-2024") return paper2024();
  if (name == "deep-6") return deep6();
  throw InvalidParams("unknown parameter preset '" + name + "'");
}

}  // namespace enchvac::he
