/*!
 * This file is part of myofit, a library for emulation-based parameter
 * inference in anisotropic hyperelastic myocardium models.
 *
 * Licensed under the Apache License Version 2.0. See LICENSE file in the
 * project root for license information.
 */
#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

namespace myofit::material {

/// Admissible box for the reduced constitutive parameters.
inline constexpr double kThetaLo = 0.1;
inline constexpr double kThetaHi = 5.0;

/// Arguments of exp() beyond this limit abort with a SaturationError
/// instead of silently returning Inf.
inline constexpr double kExpGuard = 700.0;

/// The 4-dimensional reduced constitutive parameter vector. Construction
/// validates the box bounds, so a ParameterVector is always admissible.
class ParameterVector {
 public:
  ParameterVector(double t1, double t2, double t3, double t4);
  explicit ParameterVector(const Eigen::Vector4d& theta);

  const Eigen::Vector4d& values() const { return theta_; }
  double operator[](Eigen::Index i) const { return theta_[i]; }

 private:
  Eigen::Vector4d theta_;
};

/// Published reference values for the eight constitutive constants
/// (moduli in kPa, exponents dimensionless).
struct ReferenceParams {
  double a0 = 0.22;
  double b0 = 1.62;
  double a_f0 = 2.43;
  double a_s0 = 0.56;
  double b_f0 = 1.83;
  double b_s0 = 0.77;
  double a_fs0 = 0.39;
  double b_fs0 = 1.70;
};

/// The eight constitutive constants entering the strain-energy function,
/// plus the incompressibility penalty constant.
struct MaterialParams {
  double a;
  double b;
  double a_f;
  double b_f;
  double a_s;
  double b_s;
  double a_fs;
  double b_fs;
  double k_penalty = 1.0e6;

  /// Throws DomainError if any modulus or exponent is not strictly positive.
  void validate() const;
};

/// Orthonormal material axes of the canonical testing frame.
enum class Axis { fibre, sheet, normal };

Eigen::Vector3d axis_vector(Axis axis);

/// Homogeneous deformation state: deformation gradient plus the referential
/// fibre and sheet directions.
struct DeformationGradient {
  Eigen::Matrix3d F = Eigen::Matrix3d::Identity();
  Eigen::Vector3d f0 = axis_vector(Axis::fibre);
  Eigen::Vector3d s0 = axis_vector(Axis::sheet);
};

/// Kinematic invariants of the right Cauchy-Green tensor C = F^T F.
struct Invariants {
  double I1;
  double I4f;
  double I4s;
  double I8fs;
  double J;
};

/// Maps the reduced parameters onto the eight constitutive constants:
/// theta1 scales (a, b), theta2 scales (a_f, a_s), theta3 scales (b_f, b_s)
/// and theta4 scales (a_fs, b_fs).
MaterialParams expand_parameters(const ParameterVector& theta,
                                 const ReferenceParams& ref = {});

/// I1 = tr(C), I4f = f0.(C f0), I4s = s0.(C s0), I8fs = f0.(C s0), J = det F.
/// Throws KinematicsError when det F <= 0.
Invariants compute_invariants(const DeformationGradient& defgrad);

/// Strain-energy density: isotropic, fibre, sheet and fibre-sheet coupling
/// exponential terms plus the quadratic volumetric penalty.
double strain_energy(const MaterialParams& params, const Invariants& inv);

/// Cauchy stress sigma = (1/J) F S F^T with S = 2 dPsi/dC from the analytic
/// invariant derivatives. The result is symmetric.
Eigen::Matrix3d cauchy_stress(const MaterialParams& params,
                              const DeformationGradient& defgrad);

/// Isochoric uniaxial stretch along `axis`: lambda in the loading direction,
/// lambda^(-1/2) laterally, so J = 1 exactly.
DeformationGradient uniaxial_stretch(Axis axis, double stretch);

/// Simple shear F = I + gamma e_i (x) e_j for distinct axes i, j.
DeformationGradient simple_shear(Axis i, Axis j, double gamma);

enum class CurveDirection { fibre, sheet };

struct CurvePoint {
  double stretch;
  double stress;  // normal Cauchy-stress component along the loading axis
};

/// Uniaxial stretch-stress relationship along the requested direction.
/// Stretch values must be >= 1 and ascending.
std::vector<CurvePoint> stretch_stress_curve(const ParameterVector& theta,
                                             CurveDirection direction,
                                             std::span<const double> stretches,
                                             const ReferenceParams& ref = {});

/// Default evaluation grid: 31 stretches equally spaced on [1.0, 1.3].
std::vector<double> default_stretch_grid();

}  // namespace myofit::material
