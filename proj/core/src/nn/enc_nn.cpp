// Copyright 2026 The enchvac Authors.
// SPDX-License-Identifier: Apache-2.0
#include "enchvac/nn/enc_nn.hpp"

#include <bit>
#include <cmath>
#include <fstream>

namespace enchvac::nn {

using he::Ciphertext;
using he::KeySet;

PackedMatrix pack_diagonals(const Eigen::MatrixXd& W) {
  if (W.rows() == 0 || W.cols() == 0) throw he::InvalidParams("cannot pack an empty matrix");
  auto d = static_cast<uint32_t>(W.rows());
  auto n = static_cast<uint32_t>(W.cols());
  uint32_t dim = std::max(d, n);

  PackedMatrix pm;
  pm.w = W;
  pm.dim = dim;
  pm.diagonals.assign(dim, std::vector<double>(dim, 0.0));
  for (uint32_t j = 0; j < dim; ++j)
    for (uint32_t i = 0; i < dim; ++i) {
      uint32_t c = (i + j) % dim;
      pm.diagonals[j][i] = (i < d && c < n) ? W(i, c) : 0.0;
    }
  return pm;
}

Eigen::MatrixXd unpack(const PackedMatrix& pm) {
  Eigen::MatrixXd W(pm.w.rows(), pm.w.cols());
  for (uint32_t j = 0; j < pm.dim; ++j)
    for (uint32_t i = 0; i < pm.dim; ++i) {
      uint32_t c = (i + j) % pm.dim;
      if (i < pm.rows() && c < pm.cols()) W(i, c) = pm.diagonals[j][i];
    }
  return W;
}

Ciphertext diag_matvec(const PackedMatrix& pm, const Ciphertext& x, const KeySet& keys) {
  if (x.logical_len() != pm.dim)
    throw he::SlotMismatch("ciphertext length does not match the packed dimension");
  Ciphertext acc;
  for (uint32_t j = 0; j < pm.dim; ++j) {
    auto term = mul_plain(rotate(x, static_cast<int>(j), keys), pm.diagonals[j], keys);
    acc = acc.valid() ? add(acc, term) : term;
  }
  return acc;
}

Ciphertext concat_cts(const Ciphertext& a, uint32_t n, const Ciphertext& b, uint32_t m,
                      const KeySet& keys) {
  uint32_t len = a.logical_len();
  if (b.logical_len() != len)
    throw he::SlotMismatch("concatenation operands must share one tiling period");
  if (n > len || m > len || n + m > len)
    throw he::SlotMismatch("concatenated data does not fit the tiling period");

  std::vector<double> mask(len, 0.0);
  std::fill(mask.begin(), mask.begin() + n, 1.0);
  auto head = mul_plain(a, mask, keys);
  if (m == 0) return head;

  std::fill(mask.begin(), mask.end(), 0.0);
  std::fill(mask.begin(), mask.begin() + m, 1.0);
  auto tail = rotate(mul_plain(b, mask, keys), -static_cast<int>(n), keys);
  return add(head, tail);
}

const char* to_string(ActFn fn) { return fn == ActFn::sigmoid ? "sigmoid" : "tanh"; }

double ActivationPoly::eval(double y) const {
  double acc = 0.0;
  for (int p = 5; p >= 0; --p) acc = acc * y + coeffs[p];
  return acc;
}

double ActivationPoly::deriv(double y) const {
  double acc = 0.0;
  for (int p = 5; p >= 1; --p) acc = acc * y + p * coeffs[p];
  return acc;
}

namespace {

double true_fn(ActFn fn, double y) {
  return fn == ActFn::sigmoid ? 1.0 / (1.0 + std::exp(-y)) : std::tanh(y);
}

double max_grid_error(const ActivationPoly& p, int points) {
  double worst = 0.0;
  for (int i = 0; i < points; ++i) {
    double y = p.lo + (p.hi - p.lo) * i / (points - 1);
    worst = std::max(worst, std::abs(p.eval(y) - true_fn(p.fn, y)));
  }
  return worst;
}

}  // namespace

ActivationPoly fit_activation_coeffs(ActFn fn, double lo, double hi, int degree) {
  if (!(lo < hi)) throw he::InvalidParams("activation fit interval is degenerate");
  if (degree < 1 || degree > 5) throw he::InvalidParams("activation degree must lie in [1, 5]");

  // Sigmoid is 1/2 plus an odd function, tanh is odd; both are fitted on an
  // odd power basis (sigmoid with the constant added) so the even
  // coefficients are exactly zero by construction.
  std::vector<int> powers;
  if (fn == ActFn::sigmoid) powers.push_back(0);
  for (int p = 1; p <= degree; p += 2) powers.push_back(p);

  const int grid = 2001;
  Eigen::MatrixXd A(grid, static_cast<Eigen::Index>(powers.size()));
  Eigen::VectorXd f(grid);
  for (int i = 0; i < grid; ++i) {
    double y = lo + (hi - lo) * i / (grid - 1);
    for (size_t j = 0; j < powers.size(); ++j) A(i, static_cast<Eigen::Index>(j)) = std::pow(y, powers[j]);
    f(i) = true_fn(fn, y);
  }
  Eigen::VectorXd c = A.colPivHouseholderQr().solve(f);

  ActivationPoly out;
  out.lo = lo;
  out.hi = hi;
  out.fn = fn;
  for (size_t j = 0; j < powers.size(); ++j) out.coeffs[powers[j]] = c(static_cast<Eigen::Index>(j));
  out.fit_max_err = max_grid_error(out, grid);
  return out;
}

ActivationPoly paper_sigmoid() {
  ActivationPoly p;
  p.coeffs = {0.5, -1.53, 0.0, 2.35, 0.0, -1.35};
  p.lo = -4.0;
  p.hi = 4.0;
  p.fn = ActFn::sigmoid;
  p.fit_max_err = max_grid_error(p, 2001);
  return p;
}

ActivationPoly paper_tanh() {
  ActivationPoly p;
  p.coeffs = {0.024, 0.0, -0.212, 0.0, 0.958, -0.002};
  p.lo = -4.0;
  p.hi = 4.0;
  p.fn = ActFn::tanh;
  p.fit_max_err = max_grid_error(p, 2001);
  return p;
}

ActivationPoly activation_by_name(const std::string& name) {
  if (name == "fitted-sigmoid") return fit_activation_coeffs(ActFn::sigmoid, -4.0, 4.0);
  if (name == "fitted-tanh") return fit_activation_coeffs(ActFn::tanh, -4.0, 4.0);
  if (name == "paper-sigmoid") return paper_sigmoid();
  if (name == "paper-tanh") return paper_tanh();
  throw he::InvalidParams("unknown activation '" + name + "'");
}

Ciphertext poly_activation(const Ciphertext& x, const ActivationPoly& p, const KeySet& keys) {
  if (x.level() < 3)
    throw he::DepthExhausted("degree-5 activation needs level >= 3 (uses 3 multiplications)");
  const auto& c = p.coeffs;

  auto y2 = mul(x, x, keys);
  auto y4 = mul(y2, y2, keys);

  auto combine = add(scalar_mul(y2, c[3]), scalar_mul(y4, c[5]));
  combine = add_plain_scalar(combine, c[1]);
  auto odd = mul(x, combine, keys);

  auto even = add(scalar_mul(y2, c[2]), scalar_mul(y4, c[4]));
  even = add_plain_scalar(even, c[0]);
  return add(odd, even);
}

Ciphertext enc_two_layer_forward(const PackedMatrix& W1, const PackedMatrix& W2,
                                 const ActivationPoly& act, const Ciphertext& x,
                                 std::span<const double> out_gain, const KeySet& keys) {
  if (x.level() < 5)
    throw he::DepthExhausted("two-layer forward needs level >= 5 (1 + 3 + 1)");
  if (W2.dim != W1.dim)
    throw he::SlotMismatch("layer dimensions are not chain-compatible");
  if (out_gain.size() > W2.dim) throw he::SlotMismatch("out_gain longer than the output layer");

  auto hidden = poly_activation(diag_matvec(W1, x, keys), act, keys);

  // Row scaling commutes with diagonal packing, so the gain costs no level.
  PackedMatrix scaled = W2;
  for (uint32_t j = 0; j < scaled.dim; ++j)
    for (uint32_t i = 0; i < scaled.dim; ++i)
      scaled.diagonals[j][i] *= i < out_gain.size() ? out_gain[i] : 0.0;
  return diag_matvec(scaled, hidden, keys);
}

void save_matrix(const std::filesystem::path& path, const Eigen::MatrixXd& m) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw he::SerializationError("cannot open " + path.string() + " for writing");
  auto put_u32 = [&](uint32_t x) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(x >> (8 * i));
    f.write(reinterpret_cast<const char*>(b), 4);
  };
  put_u32(static_cast<uint32_t>(m.rows()));
  put_u32(static_cast<uint32_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      uint64_t bits = std::bit_cast<uint64_t>(m(r, c));
      unsigned char b[8];
      for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
      f.write(reinterpret_cast<const char*>(b), 8);
    }
  if (!f) throw he::SerializationError("short write to " + path.string());
}

Eigen::MatrixXd load_matrix(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw he::SerializationError("cannot open " + path.string());
  auto get_u32 = [&] {
    unsigned char b[4];
    f.read(reinterpret_cast<char*>(b), 4);
    uint32_t x = 0;
    for (int i = 0; i < 4; ++i) x |= static_cast<uint32_t>(b[i]) << (8 * i);
    return x;
  };
  uint32_t rows = get_u32();
  uint32_t cols = get_u32();
  if (!f || rows == 0 || cols == 0 || rows > (1u << 20) || cols > (1u << 20))
    throw he::SerializationError("malformed matrix header in " + path.string());
  Eigen::MatrixXd m(rows, cols);
  for (uint32_t r = 0; r < rows; ++r)
    for (uint32_t c = 0; c < cols; ++c) {
      unsigned char b[8];
      f.read(reinterpret_cast<char*>(b), 8);
      uint64_t bits = 0;
      for (int i = 0; i < 8; ++i) bits |= static_cast<uint64_t>(b[i]) << (8 * i);
      m(r, c) = std::bit_cast<double>(bits);
    }
  if (!f) throw he::SerializationError("truncated matrix data in " + path.string());
  return m;
}

}  // namespace enchvac::nn
