/*!
 * This file is part of myofit, a library for emulation-based parameter
 * inference in anisotropic hyperelastic myocardium models.
 *
 * Licensed under the Apache License Version 2.0. See LICENSE file in the
 * project root for license information.
 */
#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "myofit/material.hpp"

namespace myofit::forward {

/// Number of simulator outputs: 24 per-case scalars plus one aggregate.
inline constexpr Eigen::Index kOutputDim = 25;

/// Number of deformation cases in a protocol.
inline constexpr int kProtocolCases = 24;

/// One homogeneous deformation case of the testing protocol.
struct ProtocolCase {
  enum class Kind { shear, stretch };

  Kind kind;
  material::Axis first;   // shear: displaced axis; stretch: loading axis
  material::Axis second;  // shear only: gradient axis
  double magnitude;       // shear amount gamma, or stretch lambda

  material::DeformationGradient deformation() const;
};

/// Ordered list of exactly 24 deformation cases. The ordering is part of
/// the dataset schema.
class DeformationProtocol {
 public:
  explicit DeformationProtocol(std::vector<ProtocolCase> cases);

  /// Six simple-shear modes at gamma in {0.1, 0.2} followed by uniaxial
  /// stretches along the three material axes at lambda in
  /// {1.05, 1.10, 1.15, 1.20}.
  static const DeformationProtocol& standard();

  std::span<const ProtocolCase> cases() const { return cases_; }

 private:
  std::vector<ProtocolCase> cases_;
};

/// Paired design matrix (N x 4) and simulator outputs (N x 25).
struct TrainingSet {
  enum class Provenance { analytic, ingested };

  Eigen::MatrixXd theta;
  Eigen::MatrixXd outputs;
  Provenance provenance = Provenance::analytic;

  Eigen::Index size() const { return theta.rows(); }

  /// Checks row-count agreement, column widths and box bounds.
  void validate() const;
};

/// Analytic forward model: outputs 1..24 are the conjugate Cauchy-stress
/// components of the protocol cases (shear component for shear modes,
/// normal component for stretches); output 25 is the total strain energy
/// summed over the cases. Deterministic in theta.
Eigen::VectorXd forward_analytic(const material::ParameterVector& theta,
                                 const DeformationProtocol& protocol =
                                     DeformationProtocol::standard());

/// Row-wise forward evaluation of a design matrix (N x 4). Any failing row
/// aborts the batch, naming the row.
TrainingSet forward_batch(const Eigen::MatrixXd& thetas,
                          const DeformationProtocol& protocol =
                              DeformationProtocol::standard());

/// Reads a dataset file: header `theta1,...,theta4,y1,...,y25`, one design
/// point per row. Rejects wrong column counts and out-of-box parameters,
/// reporting line numbers.
TrainingSet load_dataset(const std::filesystem::path& path);

/// Writes a dataset file with round-trip (17 significant digit) precision.
void save_dataset(const std::filesystem::path& path, const TrainingSet& training);

}  // namespace myofit::forward
