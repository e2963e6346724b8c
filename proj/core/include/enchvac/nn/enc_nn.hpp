// Copyright 2026 The enchvac Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "enchvac/he/he.hpp"

namespace enchvac::nn {

// A d x n weight matrix packed as generalized diagonals of its zero-padded
// square form (dim = max(d, n)): diagonal j holds [w(0,j), w(1,j+1), ...,
// w(dim-1, (j+dim-1) mod dim)]. The original matrix is kept so unpacking is
// an exact bijection.
struct PackedMatrix {
  Eigen::MatrixXd w;                            // original d x n
  uint32_t dim = 0;                             // padded square size
  std::vector<std::vector<double>> diagonals;   // dim diagonals of length dim

  uint32_t rows() const { return static_cast<uint32_t>(w.rows()); }
  uint32_t cols() const { return static_cast<uint32_t>(w.cols()); }
};

PackedMatrix pack_diagonals(const Eigen::MatrixXd& W);
Eigen::MatrixXd unpack(const PackedMatrix& pm);

// Diagonal-method product W*x over a ciphertext tiled with period pm.dim:
// sum_j rot(x, j) * diag_j. Performs exactly pm.dim rotations and pm.dim
// plaintext multiplications and consumes exactly 1 level. Slots beyond the
// matrix's true column count must hold zeros (the packed layout's padding
// columns are zero, so padded results stay exact).
he::Ciphertext diag_matvec(const PackedMatrix& pm, const he::Ciphertext& x,
                           const he::KeySet& keys);

// Concatenation [a_data ; b_data] inside one shared tiling period. Both
// inputs must already live at the same logical length L; n and m give the
// used prefix widths (n + m <= L). Implemented as 0/1 mask multiplications
// plus one rotation and an add; consumes exactly 1 level below the lower
// operand. The result keeps logical length L with the b data placed at
// offset n and zeros beyond n + m.
he::Ciphertext concat_cts(const he::Ciphertext& a, uint32_t n, const he::Ciphertext& b,
                          uint32_t m, const he::KeySet& keys);

enum class ActFn : uint8_t { sigmoid = 0, tanh = 1 };

const char* to_string(ActFn fn);

// Degree <= 5 polynomial activation with its nominal input interval. coeffs
// is indexed by power. fit_max_err records the max absolute deviation from
// the true function over a dense grid on [lo, hi]; for fitted polynomials it
// is the least-squares fit residual bound, for the published presets it is
// measured at construction.
struct ActivationPoly {
  std::array<double, 6> coeffs{};
  double lo = 0.0;
  double hi = 0.0;
  ActFn fn = ActFn::sigmoid;
  double fit_max_err = 0.0;

  double eval(double y) const;
  // First derivative of the polynomial (not of the approximated function).
  double deriv(double y) const;
};

// Least-squares fit on a dense uniform grid (2001 points). Sigmoid uses
// powers {0,1,3,5}; tanh is fitted with odd symmetry enforced, powers
// {1,3,5}, so its even coefficients are exactly zero.
ActivationPoly fit_activation_coeffs(ActFn fn, double lo, double hi, int degree = 5);

// Published degree-5 coefficient presets, shipped for reproduction. Their
// deviation from the true functions is large away from 0 (see fit_max_err);
// production paths default to the fitted polynomials.
ActivationPoly paper_sigmoid();
ActivationPoly paper_tanh();

// "fitted-sigmoid" | "fitted-tanh" | "paper-sigmoid" | "paper-tanh".
ActivationPoly activation_by_name(const std::string& name);

// Elementwise polynomial evaluation using exactly 3 ciphertext-ciphertext
// multiplications in the fixed order (y2, y4, combine):
//   y2 = y*y, y4 = y2*y2,
//   odd  = y * (c1 + c3*y2 + c5*y4),
//   even = c0 + c2*y2 + c4*y4,
// returning odd + even. Consumes exactly 3 levels; requires level >= 3.
he::Ciphertext poly_activation(const he::Ciphertext& x, const ActivationPoly& p,
                               const he::KeySet& keys);

// out_gain (*) W2 * act(W1 * x): two diagonal-method layers around one
// polynomial activation. Consumes exactly 5 levels (1 + 3 + 1); requires
// x at level >= 5, which rules out preset "paper-2024" (depth 3). out_gain
// is folded into the second layer's diagonals, so it costs no level; rows
// of W2 beyond out_gain's length are zeroed.
he::Ciphertext enc_two_layer_forward(const PackedMatrix& W1, const PackedMatrix& W2,
                                     const ActivationPoly& act, const he::Ciphertext& x,
                                     std::span<const double> out_gain, const he::KeySet& keys);

// Weight files: rows u32, cols u32, then row-major IEEE f64, little-endian.
void save_matrix(const std::filesystem::path& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd load_matrix(const std::filesystem::path& path);

}  // namespace enchvac::nn
