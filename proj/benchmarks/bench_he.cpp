// Copyright 2026 The enchvac Authors.
// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include <vector>

#include "enchvac/he/he.hpp"
#include "enchvac/util/rng.hpp"

namespace {

using namespace enchvac;
using namespace enchvac::he;

struct Fix {
  ContextPtr ctx;
  KeySet keys;
  std::vector<double> v;

  explicit Fix(BackendKind kind) {
    ctx = make_context(HeParams::paper2024(), kind);
    keys = keygen(ctx, 1);
    util::Rng rng(2);
    v.resize(16);
    for (auto& x : v) x = rng.next_double() * 10.0 - 5.0;
  }
};

Fix& fix(BackendKind kind) {
  static Fix rlwe(BackendKind::rlwe);
  static Fix ref(BackendKind::reference);
  return kind == BackendKind::rlwe ? rlwe : ref;
}

BackendKind arg_kind(const benchmark::State& state) {
  return state.range(0) == 0 ? BackendKind::rlwe : BackendKind::reference;
}

void BM_Encrypt(benchmark::State& state) {
  auto& f = fix(arg_kind(state));
  for (auto _ : state) benchmark::DoNotOptimize(encrypt(f.v, f.keys));
}

void BM_Decrypt(benchmark::State& state) {
  auto& f = fix(arg_kind(state));
  auto ct = encrypt(f.v, f.keys);
  for (auto _ : state) benchmark::DoNotOptimize(decrypt(ct, f.keys));
}

void BM_Mul(benchmark::State& state) {
  auto& f = fix(arg_kind(state));
  auto a = encrypt(f.v, f.keys);
  auto b = encrypt(f.v, f.keys);
  for (auto _ : state) benchmark::DoNotOptimize(mul(a, b, f.keys));
}

void BM_MulPlain(benchmark::State& state) {
  auto& f = fix(arg_kind(state));
  auto a = encrypt(f.v, f.keys);
  for (auto _ : state) benchmark::DoNotOptimize(mul_plain(a, f.v, f.keys));
}

void BM_Rotate(benchmark::State& state) {
  auto& f = fix(arg_kind(state));
  auto a = encrypt(f.v, f.keys);
  for (auto _ : state) benchmark::DoNotOptimize(rotate(a, 1, f.keys));
}

void BM_Serialize(benchmark::State& state) {
  auto& f = fix(arg_kind(state));
  auto a = encrypt(f.v, f.keys);
  for (auto _ : state) benchmark::DoNotOptimize(serialize(a));
}

}  // namespace

// Arg 0: rlwe backend, arg 1: reference backend.
BENCHMARK(BM_Encrypt)->Arg(0)->Arg(1);
BENCHMARK(BM_Decrypt)->Arg(0)->Arg(1);
BENCHMARK(BM_Mul)->Arg(0)->Arg(1);
BENCHMARK(BM_MulPlain)->Arg(0)->Arg(1);
BENCHMARK(BM_Rotate)->Arg(0)->Arg(1);
BENCHMARK(BM_Serialize)->Arg(0)->Arg(1);

BENCHMARK_MAIN();
