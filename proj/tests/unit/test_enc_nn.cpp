// Copyright 2026 The enchvac Authors.
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <vector>

#include "enchvac/nn/enc_nn.hpp"
#include "enchvac/util/rng.hpp"

using namespace enchvac;
using namespace enchvac::he;
using namespace enchvac::nn;

namespace {

struct Fix {
  ContextPtr ctx;
  KeySet keys;
};

const Fix& paper_rlwe() {
  static Fix f = [] {
    auto ctx = make_context(HeParams::paper2024(), BackendKind::rlwe);
    return Fix{ctx, keygen(ctx, 42)};
  }();
  return f;
}

const Fix& paper_ref() {
  static Fix f = [] {
    auto ctx = make_context(HeParams::paper2024(), BackendKind::reference);
    return Fix{ctx, keygen(ctx, 42)};
  }();
  return f;
}

const Fix& deep_rlwe() {
  static Fix f = [] {
    auto ctx = make_context(HeParams::deep6(), BackendKind::rlwe);
    return Fix{ctx, keygen(ctx, 42)};
  }();
  return f;
}

std::vector<double> rand_vec(util::Rng& rng, size_t n, double range) {
  std::vector<double> v(n);
  for (auto& x : v) x = (rng.next_double() * 2.0 - 1.0) * range;
  return v;
}

Eigen::MatrixXd rand_mat(util::Rng& rng, int r, int c, double range) {
  Eigen::MatrixXd m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = (rng.next_double() * 2.0 - 1.0) * range;
  return m;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  REQUIRE(a.size() == b.size());
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

std::vector<double> matvec(const Eigen::MatrixXd& W, const std::vector<double>& x) {
  Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<long>(x.size()));
  Eigen::VectorXd y = W * v;
  return {y.data(), y.data() + y.size()};
}

}  // namespace

TEST_CASE("pack_diagonals matches the documented pattern") {
  Eigen::MatrixXd W(2, 2);
  W << 1, 2, 3, 4;
  auto pm = pack_diagonals(W);
  REQUIRE(pm.dim == 2);
  CHECK(pm.diagonals[0] == std::vector<double>{1, 4});
  CHECK(pm.diagonals[1] == std::vector<double>{2, 3});

  auto id = pack_diagonals(Eigen::MatrixXd::Identity(3, 3));
  CHECK(id.diagonals[0] == std::vector<double>{1, 1, 1});
  CHECK(id.diagonals[1] == std::vector<double>{0, 0, 0});
  CHECK(id.diagonals[2] == std::vector<double>{0, 0, 0});

  CHECK_THROWS_AS(pack_diagonals(Eigen::MatrixXd(0, 0)), InvalidParams);
}

TEST_CASE("pack/unpack is an exact bijection") {
  util::Rng rng(1);
  for (auto [r, c] : {std::pair{4, 4}, std::pair{16, 8}, std::pair{4, 16}, std::pair{1, 7}}) {
    auto W = rand_mat(rng, r, c, 3.0);
    auto pm = pack_diagonals(W);
    CHECK(pm.dim == static_cast<uint32_t>(std::max(r, c)));
    CHECK(unpack(pm) == W);
  }
}

TEST_CASE("diag_matvec reproduces hand examples") {
  for (const Fix& f : {paper_rlwe(), paper_ref()}) {
    Eigen::MatrixXd W(2, 2);
    W << 1, 2, 3, 4;
    auto x = encrypt(std::vector<double>{5.0, 6.0}, f.keys);
    auto y = diag_matvec(pack_diagonals(W), x, f.keys);
    CHECK(y.level() == x.level() - 1);
    CHECK(max_abs_diff(decrypt(y, f.keys), {17.0, 39.0}) <= 1e-2);

    auto xi = encrypt(std::vector<double>{7.0, 8.0, 9.0}, f.keys);
    auto yi = diag_matvec(pack_diagonals(Eigen::MatrixXd::Identity(3, 3)), xi, f.keys);
    CHECK(max_abs_diff(decrypt(yi, f.keys), {7.0, 8.0, 9.0}) <= 1e-2);
  }
}

TEST_CASE("diag_matvec matches the plaintext oracle on random matrices") {
  const auto& f = paper_rlwe();
  util::Rng rng(2);
  for (int trial = 0; trial < 5; ++trial) {
    auto W = rand_mat(rng, 8, 8, 1.0);
    auto xv = rand_vec(rng, 8, 2.0);
    auto y = diag_matvec(pack_diagonals(W), encrypt(xv, f.keys), f.keys);
    CHECK(max_abs_diff(decrypt(y, f.keys), matvec(W, xv)) <= 1e-2);
  }

  // Rectangular shapes run over the padded square; pad slots hold zeros.
  auto Wt = rand_mat(rng, 16, 8, 1.0);
  auto xv = rand_vec(rng, 8, 2.0);
  auto yt = decrypt(diag_matvec(pack_diagonals(Wt), encrypt(xv, 16, f.keys), f.keys), f.keys);
  auto xpad = xv;
  xpad.resize(16, 0.0);
  Eigen::MatrixXd Wtp = Eigen::MatrixXd::Zero(16, 16);
  Wtp.leftCols(8) = Wt;
  CHECK(max_abs_diff(yt, matvec(Wtp, xpad)) <= 1e-2);

  auto Ww = rand_mat(rng, 4, 16, 1.0);
  auto xw = rand_vec(rng, 16, 2.0);
  auto yw = decrypt(diag_matvec(pack_diagonals(Ww), encrypt(xw, f.keys), f.keys), f.keys);
  Eigen::MatrixXd Wwp = Eigen::MatrixXd::Zero(16, 16);
  Wwp.topRows(4) = Ww;
  CHECK(max_abs_diff(yw, matvec(Wwp, xw)) <= 1e-2);

  auto bad = encrypt(rand_vec(rng, 4, 1.0), f.keys);
  CHECK_THROWS_AS(diag_matvec(pack_diagonals(Wt), bad, f.keys), SlotMismatch);
}

TEST_CASE("diag_matvec performs exactly dim rotations and plaintext products") {
  const auto& f = paper_rlwe();
  util::Rng rng(3);
  auto W = rand_mat(rng, 8, 8, 1.0);
  auto x = encrypt(rand_vec(rng, 8, 1.0), f.keys);
  reset_op_counts(f.ctx);
  auto y = diag_matvec(pack_diagonals(W), x, f.keys);
  auto counts = op_counts(f.ctx);
  CHECK(counts.rotations == 8);
  CHECK(counts.plain_muls == 8);
  CHECK(counts.ct_muls == 0);
  CHECK(y.level() == x.level() - 1);
}

TEST_CASE("diag_matvec is linear") {
  const auto& f = paper_rlwe();
  util::Rng rng(4);
  auto W = rand_mat(rng, 8, 8, 1.0);
  auto pm = pack_diagonals(W);
  auto av = rand_vec(rng, 8, 2.0);
  auto bv = rand_vec(rng, 8, 2.0);
  auto a = encrypt(av, f.keys);
  auto b = encrypt(bv, f.keys);

  auto lhs = decrypt(diag_matvec(pm, add(a, b), f.keys), f.keys);
  auto ya = decrypt(diag_matvec(pm, a, f.keys), f.keys);
  auto yb = decrypt(diag_matvec(pm, b, f.keys), f.keys);
  for (int i = 0; i < 8; ++i) CHECK(lhs[i] == doctest::Approx(ya[i] + yb[i]).epsilon(2e-2));
}

TEST_CASE("concat_cts places both operands inside one period") {
  for (const Fix& f : {paper_rlwe(), paper_ref()}) {
    auto a = encrypt(std::vector<double>{1.0, 2.0}, 3, f.keys);
    auto b = encrypt(std::vector<double>{3.0}, 3, f.keys);
    auto cat = concat_cts(a, 2, b, 1, f.keys);
    CHECK(cat.level() == a.level() - 1);
    CHECK(cat.logical_len() == 3);
    CHECK(max_abs_diff(decrypt(cat, f.keys), {1.0, 2.0, 3.0}) <= 1e-2);

    // Concatenating nothing keeps the data (one level still goes to the mask).
    auto same = concat_cts(a, 2, b, 0, f.keys);
    auto vals = decrypt(same, f.keys);
    CHECK(std::abs(vals[0] - 1.0) <= 1e-2);
    CHECK(std::abs(vals[1] - 2.0) <= 1e-2);
    CHECK(std::abs(vals[2]) <= 1e-2);

    CHECK_THROWS_AS(concat_cts(a, 2, b, 2, f.keys), SlotMismatch);
    auto longer = encrypt(std::vector<double>{1.0}, 4, f.keys);
    CHECK_THROWS_AS(concat_cts(a, 2, longer, 1, f.keys), SlotMismatch);
  }
}

TEST_CASE("concat_cts matches the plaintext oracle and its op budget") {
  const auto& f = paper_rlwe();
  util::Rng rng(5);
  auto av = rand_vec(rng, 8, 3.0);
  auto bv = rand_vec(rng, 4, 3.0);
  auto a = encrypt(av, 16, f.keys);
  auto b = encrypt(bv, 16, f.keys);
  reset_op_counts(f.ctx);
  auto cat = concat_cts(a, 8, b, 4, f.keys);
  auto counts = op_counts(f.ctx);
  CHECK(counts.plain_muls == 2);
  CHECK(counts.rotations == 1);

  std::vector<double> want = av;
  want.insert(want.end(), bv.begin(), bv.end());
  want.resize(16, 0.0);
  CHECK(max_abs_diff(decrypt(cat, f.keys), want) <= 1e-2);
}

TEST_CASE("activation fitting records its error and keeps symmetry") {
  auto sig = fit_activation_coeffs(ActFn::sigmoid, -4.0, 4.0);
  CHECK(sig.fit_max_err > 0.0);
  CHECK(sig.fit_max_err <= 0.05);
  CHECK(sig.coeffs[2] == 0.0);
  CHECK(sig.coeffs[4] == 0.0);
  CHECK(sig.eval(0.0) == doctest::Approx(0.5).epsilon(1e-3));

  auto th = fit_activation_coeffs(ActFn::tanh, -4.0, 4.0);
  CHECK(th.coeffs[0] == 0.0);
  CHECK(th.coeffs[2] == 0.0);
  CHECK(th.coeffs[4] == 0.0);
  CHECK(th.eval(0.0) == 0.0);
  CHECK(th.eval(1.0) == doctest::Approx(-th.eval(-1.0)));

  // Deterministic: refitting yields identical coefficients.
  auto sig2 = fit_activation_coeffs(ActFn::sigmoid, -4.0, 4.0);
  CHECK(sig.coeffs == sig2.coeffs);

  CHECK_THROWS_AS(fit_activation_coeffs(ActFn::sigmoid, 2.0, 2.0), InvalidParams);
}

TEST_CASE("published presets evaluate to their printed values") {
  auto ps = paper_sigmoid();
  CHECK(ps.eval(0.0) == 0.5);
  CHECK(ps.eval(1.0) == doctest::Approx(0.5 - 1.53 + 2.35 - 1.35).epsilon(1e-12));

  auto pt = paper_tanh();
  CHECK(pt.eval(1.0) == doctest::Approx(0.768).epsilon(1e-12));
  CHECK(pt.eval(0.0) == 0.024);
  // The printed tanh coefficients are even-heavy; they cannot track an odd
  // function for negative inputs and the recorded deviation says so.
  CHECK(pt.fit_max_err > 1.0);

  CHECK(activation_by_name("paper-sigmoid").coeffs == ps.coeffs);
  CHECK(activation_by_name("fitted-tanh").coeffs[1] != 0.0);
  CHECK_THROWS_AS(activation_by_name("relu"), InvalidParams);
}

TEST_CASE("poly_activation consumes exactly three multiplications and levels") {
  const auto& f = paper_rlwe();
  auto x = encrypt(std::vector<double>{1.0}, f.keys);
  REQUIRE(x.level() == 3);
  reset_op_counts(f.ctx);
  auto y = poly_activation(x, paper_tanh(), f.keys);
  CHECK(op_counts(f.ctx).ct_muls == 3);
  CHECK(y.level() == 0);
  CHECK_THROWS_AS(poly_activation(y, paper_tanh(), f.keys), DepthExhausted);
}

TEST_CASE("poly_activation agrees across backends under shared quantization") {
  const auto& fr = paper_rlwe();
  const auto& fp = paper_ref();
  util::Rng rng(6);
  // Unit range: at level 0 the accumulated dyadic scale leaves |value| < 2
  // on this preset, and the printed tanh quartic blows past that for |y| > 1.2.
  auto v = rand_vec(rng, 8, 1.0);
  for (const auto& act : {paper_tanh(), fit_activation_coeffs(ActFn::sigmoid, -4.0, 4.0)}) {
    auto yr = decrypt(poly_activation(encrypt(v, fr.keys), act, fr.keys), fr.keys);
    auto yp = decrypt(poly_activation(encrypt(v, fp.keys), act, fp.keys), fp.keys);
    CHECK(max_abs_diff(yr, yp) <= 1e-2);
  }
}

TEST_CASE("poly_activation tracks the exact polynomial on the deep preset") {
  const auto& f = deep_rlwe();
  util::Rng rng(7);
  auto v = rand_vec(rng, 16, 4.0);
  for (const auto& act : {fit_activation_coeffs(ActFn::sigmoid, -4.0, 4.0),
                          fit_activation_coeffs(ActFn::tanh, -4.0, 4.0)}) {
    auto y = decrypt(poly_activation(encrypt(v, f.keys), act, f.keys), f.keys);
    std::vector<double> want(16);
    for (int i = 0; i < 16; ++i) want[i] = act.eval(v[i]);
    CHECK(max_abs_diff(y, want) <= 1e-2);
  }

  // The printed preset targets unit-range inputs; outside that its values grow
  // like y^4 and noise grows with them, so it gets its own unit-range check.
  auto vu = rand_vec(rng, 16, 1.0);
  auto yu = decrypt(poly_activation(encrypt(vu, f.keys), paper_tanh(), f.keys), f.keys);
  std::vector<double> wantu(16);
  for (int i = 0; i < 16; ++i) wantu[i] = paper_tanh().eval(vu[i]);
  CHECK(max_abs_diff(yu, wantu) <= 1e-2);
}

TEST_CASE("two-layer forward matches the plaintext oracle") {
  const auto& f = deep_rlwe();
  util::Rng rng(8);
  auto act = fit_activation_coeffs(ActFn::tanh, -4.0, 4.0);
  auto W1 = rand_mat(rng, 16, 8, 0.35);
  auto W2 = rand_mat(rng, 4, 16, 0.35);
  std::vector<double> gain{1.2, 1.2, 1.2, 1.2};
  auto xv = rand_vec(rng, 8, 1.0);

  auto x = encrypt(xv, 16, f.keys);
  REQUIRE(x.level() == 6);
  auto y = enc_two_layer_forward(pack_diagonals(W1), pack_diagonals(W2), act, x,
                                 gain, f.keys);
  CHECK(y.level() == 1);  // exactly 5 levels

  Eigen::VectorXd xe = Eigen::Map<Eigen::VectorXd>(xv.data(), 8);
  Eigen::VectorXd h = W1 * xe;
  Eigen::VectorXd a(16);
  for (int i = 0; i < 16; ++i) a(i) = act.eval(h(i));
  Eigen::VectorXd out = W2 * a;
  std::vector<double> want(16, 0.0);
  for (int i = 0; i < 4; ++i) want[i] = gain[i] * out(i);

  CHECK(max_abs_diff(decrypt(y, f.keys), want) <= 5e-2);
}

TEST_CASE("two-layer forward propagates zero through an odd activation") {
  const auto& f = deep_rlwe();
  auto act = fit_activation_coeffs(ActFn::tanh, -4.0, 4.0);
  auto id = pack_diagonals(Eigen::MatrixXd::Identity(16, 16));
  std::vector<double> gain(16, 1.0);
  auto x = encrypt(std::vector<double>(16, 0.0), f.keys);
  auto y = decrypt(enc_two_layer_forward(id, id, act, x, gain, f.keys), f.keys);
  for (double v : y) CHECK(std::abs(v) <= 1e-3);
}

TEST_CASE("two-layer forward needs depth five") {
  const auto& f = paper_rlwe();
  auto id = pack_diagonals(Eigen::MatrixXd::Identity(16, 16));
  std::vector<double> gain(16, 1.0);
  auto x = encrypt(std::vector<double>(16, 0.1), f.keys);  // level 3 < 5
  CHECK_THROWS_AS(
      enc_two_layer_forward(id, id, fit_activation_coeffs(ActFn::tanh, -4.0, 4.0), x, gain, f.keys),
      DepthExhausted);
}

TEST_CASE("fitted sigmoid stays inside the documented output corridor") {
  auto sig = fit_activation_coeffs(ActFn::sigmoid, -4.0, 4.0);
  double lo = 1e9, hi = -1e9;
  for (int i = 0; i <= 4000; ++i) {
    double y = -4.0 + 8.0 * i / 4000.0;
    double v = sig.eval(y);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  CHECK(lo >= -0.1);
  CHECK(hi <= 1.1);
}

TEST_CASE("weight files round-trip exactly") {
  util::Rng rng(9);
  auto W = rand_mat(rng, 16, 8, 2.0);
  auto path = std::filesystem::temp_directory_path() / "enchvac_test_weights.bin";
  save_matrix(path, W);
  CHECK(load_matrix(path) == W);

  // Truncated file is rejected.
  std::filesystem::resize_file(path, 4);
  CHECK_THROWS_AS(load_matrix(path), SerializationError);
  std::filesystem::remove(path);
}
