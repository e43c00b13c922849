/*!
 * This file is part of myofit, a library for emulation-based parameter
 * inference in anisotropic hyperelastic myocardium models.
 *
 * Licensed under the Apache License Version 2.0. See LICENSE file in the
 * project root for license information.
 */
#pragma once

#include <array>
#include <cstdint>

#include <Eigen/Core>

namespace myofit::design {

/// Gray-code Sobol sequence with Joe-Kuo direction numbers, up to 8
/// dimensions. Deterministic: the point at a given index never depends on
/// how the stream was consumed.
class SobolSequence {
 public:
  static constexpr int kMaxDimension = 8;
  static constexpr int kBits = 32;

  /// `skip` drops the leading points of the sequence; the default drops the
  /// all-zeros origin.
  explicit SobolSequence(int dimension, std::uint64_t skip = 1);

  int dimension() const { return dim_; }

  /// Index of the next point to be emitted (skipped points count).
  std::uint64_t index() const { return index_; }

  /// Next point in [0,1)^dim.
  Eigen::VectorXd next();

  /// Next `n` points, one per row.
  Eigen::MatrixXd take(Eigen::Index n);

 private:
  void advance();

  int dim_;
  std::uint64_t index_ = 0;
  std::array<std::uint32_t, kMaxDimension> state_{};
  std::array<std::array<std::uint32_t, kBits + 1>, kMaxDimension> v_{};
};

/// First `n` points of the `dim`-dimensional sequence after dropping `skip`
/// leading points. Rows are points.
Eigen::MatrixXd sobol_points(int dim, Eigen::Index n, std::uint64_t skip = 1);

/// Affine map of unit-cube points onto [lo, hi] per coordinate.
Eigen::MatrixXd scale_to_box(const Eigen::MatrixXd& unit_points, double lo = 0.1,
                             double hi = 5.0);

/// Points skip+n .. skip+n+m-1 of the sequence: the continuation of an
/// existing n-point design, disjoint from it.
Eigen::MatrixXd extend_design(int dim, Eigen::Index existing_n, Eigen::Index additional_m,
                              std::uint64_t skip = 1);

}  // namespace myofit::design
