/*!
 * This file is part of myofit, a library for emulation-based parameter
 * inference in anisotropic hyperelastic myocardium models.
 *
 * Licensed under the Apache License Version 2.0. See LICENSE file in the
 * project root for license information.
 */
#include "myofit/material.hpp"

#include <cmath>
#include <string>

#include <Eigen/LU>

#include "myofit/errors.hpp"

namespace myofit::material {

namespace {

void check_component(double value, int index) {
  if (!std::isfinite(value)) {
    throw DomainError("theta" + std::to_string(index) + " is not finite");
  }
  if (value < kThetaLo || value > kThetaHi) {
    throw DomainError("theta" + std::to_string(index) + " = " + std::to_string(value) +
                      " outside [" + std::to_string(kThetaLo) + ", " +
                      std::to_string(kThetaHi) + "]");
  }
}

double guarded_exp(double arg, const char* term) {
  if (!(arg <= kExpGuard)) {
    throw SaturationError(std::string("strain energy: exp argument ") +
                          std::to_string(arg) + " exceeds guard in " + term + " term");
  }
  return std::exp(arg);
}

// dPsi/dI* for the four exponential terms; shared by energy and stress.
struct EnergyDerivatives {
  double psi1;    // dPsi/dI1
  double psi4f;   // dPsi/dI4f
  double psi4s;   // dPsi/dI4s
  double psi8fs;  // dPsi/dI8fs
};

EnergyDerivatives energy_derivatives(const MaterialParams& p, const Invariants& inv) {
  EnergyDerivatives d;
  d.psi1 = 0.5 * p.a * guarded_exp(p.b * (inv.I1 - 3.0), "isotropic");
  d.psi4f = p.a_f * (inv.I4f - 1.0) *
            guarded_exp(p.b_f * (inv.I4f - 1.0) * (inv.I4f - 1.0), "fibre");
  d.psi4s = p.a_s * (inv.I4s - 1.0) *
            guarded_exp(p.b_s * (inv.I4s - 1.0) * (inv.I4s - 1.0), "sheet");
  d.psi8fs = p.a_fs * inv.I8fs * guarded_exp(p.b_fs * inv.I8fs * inv.I8fs, "shear");
  return d;
}

}  // namespace

ParameterVector::ParameterVector(double t1, double t2, double t3, double t4)
    : ParameterVector(Eigen::Vector4d(t1, t2, t3, t4)) {}

ParameterVector::ParameterVector(const Eigen::Vector4d& theta) : theta_(theta) {
  for (Eigen::Index i = 0; i < 4; ++i) {
    check_component(theta_[i], static_cast<int>(i) + 1);
  }
}

void MaterialParams::validate() const {
  const double values[] = {a, b, a_f, b_f, a_s, b_s, a_fs, b_fs};
  const char* names[] = {"a", "b", "a_f", "b_f", "a_s", "b_s", "a_fs", "b_fs"};
  for (int i = 0; i < 8; ++i) {
    if (!(values[i] > 0.0) || !std::isfinite(values[i])) {
      throw DomainError(std::string("material parameter ") + names[i] +
                        " must be strictly positive");
    }
  }
}

Eigen::Vector3d axis_vector(Axis axis) {
  switch (axis) {
    case Axis::fibre:
      return {1.0, 0.0, 0.0};
    case Axis::sheet:
      return {0.0, 1.0, 0.0};
    case Axis::normal:
      return {0.0, 0.0, 1.0};
  }
  throw DomainError("unknown material axis");
}

MaterialParams expand_parameters(const ParameterVector& theta, const ReferenceParams& ref) {
  MaterialParams p;
  p.a = theta[0] * ref.a0;
  p.b = theta[0] * ref.b0;
  p.a_f = theta[1] * ref.a_f0;
  p.a_s = theta[1] * ref.a_s0;
  p.b_f = theta[2] * ref.b_f0;
  p.b_s = theta[2] * ref.b_s0;
  p.a_fs = theta[3] * ref.a_fs0;
  p.b_fs = theta[3] * ref.b_fs0;
  p.validate();
  return p;
}

Invariants compute_invariants(const DeformationGradient& defgrad) {
  const double det = defgrad.F.determinant();
  if (!(det > 0.0)) {
    throw KinematicsError("deformation gradient has det F = " + std::to_string(det) +
                          " <= 0");
  }
  const Eigen::Matrix3d C = defgrad.F.transpose() * defgrad.F;
  Invariants inv;
  inv.I1 = C.trace();
  inv.I4f = defgrad.f0.dot(C * defgrad.f0);
  inv.I4s = defgrad.s0.dot(C * defgrad.s0);
  inv.I8fs = defgrad.f0.dot(C * defgrad.s0);
  inv.J = det;
  return inv;
}

double strain_energy(const MaterialParams& p, const Invariants& inv) {
  p.validate();
  const double iso = p.a / (2.0 * p.b) * (guarded_exp(p.b * (inv.I1 - 3.0), "isotropic") - 1.0);
  const double fibre =
      p.a_f / (2.0 * p.b_f) *
      (guarded_exp(p.b_f * (inv.I4f - 1.0) * (inv.I4f - 1.0), "fibre") - 1.0);
  const double sheet =
      p.a_s / (2.0 * p.b_s) *
      (guarded_exp(p.b_s * (inv.I4s - 1.0) * (inv.I4s - 1.0), "sheet") - 1.0);
  const double shear =
      p.a_fs / (2.0 * p.b_fs) * (guarded_exp(p.b_fs * inv.I8fs * inv.I8fs, "shear") - 1.0);
  const double penalty = 0.5 * p.k_penalty * (inv.J - 1.0) * (inv.J - 1.0);
  return iso + fibre + sheet + shear + penalty;
}

Eigen::Matrix3d cauchy_stress(const MaterialParams& p, const DeformationGradient& defgrad) {
  p.validate();
  const Invariants inv = compute_invariants(defgrad);
  const EnergyDerivatives d = energy_derivatives(p, inv);

  const Eigen::Vector3d f = defgrad.F * defgrad.f0;
  const Eigen::Vector3d s = defgrad.F * defgrad.s0;
  const Eigen::Matrix3d B = defgrad.F * defgrad.F.transpose();

  // sigma = (2/J)[psi1 B + psi4f f(x)f + psi4s s(x)s + psi8fs sym(f(x)s)]
  //         + K (J - 1) I, where the volumetric part uses dJ/dC = (J/2) C^-1.
  Eigen::Matrix3d sigma = d.psi1 * B;
  sigma += d.psi4f * (f * f.transpose());
  sigma += d.psi4s * (s * s.transpose());
  sigma += 0.5 * d.psi8fs * (f * s.transpose() + s * f.transpose());
  sigma *= 2.0 / inv.J;
  sigma += p.k_penalty * (inv.J - 1.0) * Eigen::Matrix3d::Identity();
  // Enforce exact symmetry against rounding in the rank-one updates.
  return 0.5 * (sigma + sigma.transpose());
}

DeformationGradient uniaxial_stretch(Axis axis, double stretch) {
  if (!(stretch > 0.0)) {
    throw DomainError("uniaxial stretch must be positive");
  }
  const double lateral = 1.0 / std::sqrt(stretch);
  const Eigen::Vector3d e = axis_vector(axis);
  DeformationGradient defgrad;
  defgrad.F = lateral * Eigen::Matrix3d::Identity() +
              (stretch - lateral) * (e * e.transpose());
  return defgrad;
}

DeformationGradient simple_shear(Axis i, Axis j, double gamma) {
  if (i == j) {
    throw DomainError("simple shear requires two distinct axes");
  }
  const Eigen::Vector3d ei = axis_vector(i);
  const Eigen::Vector3d ej = axis_vector(j);
  DeformationGradient defgrad;
  defgrad.F = Eigen::Matrix3d::Identity() + gamma * (ei * ej.transpose());
  return defgrad;
}

std::vector<CurvePoint> stretch_stress_curve(const ParameterVector& theta,
                                             CurveDirection direction,
                                             std::span<const double> stretches,
                                             const ReferenceParams& ref) {
  const MaterialParams params = expand_parameters(theta, ref);
  const Axis axis = direction == CurveDirection::fibre ? Axis::fibre : Axis::sheet;
  const Eigen::Vector3d e = axis_vector(axis);

  std::vector<CurvePoint> curve;
  curve.reserve(stretches.size());
  double previous = 0.0;
  for (std::size_t i = 0; i < stretches.size(); ++i) {
    const double lambda = stretches[i];
    if (!(lambda >= 1.0)) {
      throw DomainError("stretch grid value " + std::to_string(lambda) + " is below 1");
    }
    if (i > 0 && !(lambda > previous)) {
      throw DomainError("stretch grid must be strictly ascending");
    }
    previous = lambda;
    const DeformationGradient defgrad = uniaxial_stretch(axis, lambda);
    const Eigen::Matrix3d sigma = cauchy_stress(params, defgrad);
    curve.push_back({lambda, e.dot(sigma * e)});
  }
  return curve;
}

std::vector<double> default_stretch_grid() {
  std::vector<double> grid(31);
  for (int i = 0; i < 31; ++i) {
    grid[static_cast<std::size_t>(i)] = 1.0 + 0.3 * i / 30.0;
  }
  return grid;
}

}  // namespace myofit::material
