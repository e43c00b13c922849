/*!
 * This file is part of myofit, a library for emulation-based parameter
 * inference in anisotropic hyperelastic myocardium models.
 *
 * Licensed under the Apache License Version 2.0. See LICENSE file in the
 * project root for license information.
 */
#include "myofit/design.hpp"

#include <bit>
#include <cmath>

#include "myofit/errors.hpp"

namespace myofit::design {

namespace {

// Joe-Kuo D(6) primitive polynomials and initial direction integers for
// dimensions 2..8 (dimension 1 is the van der Corput sequence).
struct JoeKuoRow {
  int degree;
  std::uint32_t poly_coeffs;  // interior coefficient bits `a`
  std::array<std::uint32_t, 5> m;
};

constexpr std::array<JoeKuoRow, 7> kJoeKuo = {{
    {1, 0, {1, 0, 0, 0, 0}},
    {2, 1, {1, 3, 0, 0, 0}},
    {3, 1, {1, 3, 1, 0, 0}},
    {3, 2, {1, 1, 1, 0, 0}},
    {4, 1, {1, 1, 3, 3, 0}},
    {4, 4, {1, 3, 5, 13, 0}},
    {5, 2, {1, 1, 5, 5, 17}},
}};

// Index (1-based) of the rightmost zero bit, as used by the Gray-code
// construction.
int rightmost_zero_bit(std::uint64_t n) { return std::countr_one(n) + 1; }

}  // namespace

SobolSequence::SobolSequence(int dimension, std::uint64_t skip) : dim_(dimension) {
  if (dimension < 1 || dimension > kMaxDimension) {
    throw DomainError("sobol: dimension must be in [1, " +
                      std::to_string(kMaxDimension) + "], got " +
                      std::to_string(dimension));
  }
  // First dimension: v_i = 2^(32-i).
  for (int i = 1; i <= kBits; ++i) {
    v_[0][i] = 1u << (kBits - i);
  }
  for (int d = 1; d < dim_; ++d) {
    const JoeKuoRow& row = kJoeKuo[static_cast<std::size_t>(d - 1)];
    const int s = row.degree;
    for (int i = 1; i <= s; ++i) {
      v_[d][i] = row.m[static_cast<std::size_t>(i - 1)] << (kBits - i);
    }
    for (int i = s + 1; i <= kBits; ++i) {
      std::uint32_t value = v_[d][i - s] ^ (v_[d][i - s] >> s);
      for (int k = 1; k <= s - 1; ++k) {
        if ((row.poly_coeffs >> (s - 1 - k)) & 1u) {
          value ^= v_[d][i - k];
        }
      }
      v_[d][i] = value;
    }
  }
  for (std::uint64_t i = 0; i < skip; ++i) {
    advance();
  }
}

void SobolSequence::advance() {
  const int c = rightmost_zero_bit(index_);
  for (int d = 0; d < dim_; ++d) {
    state_[static_cast<std::size_t>(d)] ^= v_[static_cast<std::size_t>(d)][c];
  }
  ++index_;
}

Eigen::VectorXd SobolSequence::next() {
  constexpr double scale = 1.0 / 4294967296.0;  // 2^-32
  Eigen::VectorXd point(dim_);
  for (int d = 0; d < dim_; ++d) {
    point[d] = static_cast<double>(state_[static_cast<std::size_t>(d)]) * scale;
  }
  advance();
  return point;
}

Eigen::MatrixXd SobolSequence::take(Eigen::Index n) {
  Eigen::MatrixXd points(n, dim_);
  for (Eigen::Index i = 0; i < n; ++i) {
    points.row(i) = next();
  }
  return points;
}

Eigen::MatrixXd sobol_points(int dim, Eigen::Index n, std::uint64_t skip) {
  if (n < 0) {
    throw DomainError("sobol: point count must be non-negative");
  }
  SobolSequence seq(dim, skip);
  return seq.take(n);
}

Eigen::MatrixXd scale_to_box(const Eigen::MatrixXd& unit_points, double lo, double hi) {
  if (!(hi > lo)) {
    throw DomainError("scale_to_box: requires hi > lo");
  }
  return (unit_points.array() * (hi - lo) + lo).matrix();
}

Eigen::MatrixXd extend_design(int dim, Eigen::Index existing_n, Eigen::Index additional_m,
                              std::uint64_t skip) {
  SobolSequence seq(dim, skip + static_cast<std::uint64_t>(existing_n));
  return seq.take(additional_m);
}

}  // namespace myofit::design
