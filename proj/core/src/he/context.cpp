// Copyright 2026 The enchvac Authors.
// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <memory>

#include "enchvac/he/errors.hpp"
#include "enchvac/he/he.hpp"
#include "context.hpp"

namespace enchvac::he {

ContextPtr make_context(const HeParams& params, BackendKind kind) {
  params.validate();
  auto cx = std::make_shared<detail::Context>();
  cx->params = params;
  cx->kind = kind;
  cx->n = params.ring_degree;
  cx->slots = params.ring_degree / 2;
  cx->two_n = 2ULL * params.ring_degree;
  cx->chain.build(params.modulus_bits, params.scale_bits, cx->two_n);
  // Scalar folds must leave a level-0 coefficient under the base prime:
  // scale_bits + dyadic_bits + value headroom < base_bits.
  cx->dyadic_bits = std::clamp(params.modulus_bits.front() - params.scale_bits - 14, 6, 20);
  if (kind == BackendKind::rlwe) {
    cx->ntt.reserve(cx->chain.primes.size());
    for (uint64_t p : cx->chain.primes) cx->ntt.emplace_back(p, cx->n);
    cx->embed = detail::EmbedTables(cx->n);
  }
  return cx;
}

const HeParams& context_params(const ContextPtr& ctx) { return ctx->params; }

BackendKind context_kind(const ContextPtr& ctx) { return ctx->kind; }

double context_scale_at(const ContextPtr& ctx, int level) {
  if (level < 0 || level > ctx->chain.top_level)
    throw InvalidParams("level outside the modulus chain");
  return ctx->chain.scale_at[level];
}

}  // namespace enchvac::he
