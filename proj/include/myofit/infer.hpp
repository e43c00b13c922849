/*!
 * This file is part of myofit, a library for emulation-based parameter
 * inference in anisotropic hyperelastic myocardium models.
 *
 * Licensed under the Apache License Version 2.0. See LICENSE file in the
 * project root for license information.
 */
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "myofit/material.hpp"
#include "myofit/optim.hpp"

namespace myofit::infer {

enum class Strategy { global_search, cg_multistart };

struct OptimizerConfig {
  Strategy strategy = Strategy::global_search;
  int trial_points = 2000;      // scattered candidates across both stages
  int stage_one_points = 400;   // candidates examined in stage one
  int starts = 50;              // CG starts; local-run budget for global search
  int max_local_iterations = 100;
  optim::Box bounds = optim::Box::cube(4, material::kThetaLo, material::kThetaHi);
  std::uint64_t seed = 0;
  double fd_step_rel = 1e-6;    // finite-difference step relative to box width
};

struct LocalOptimum {
  Eigen::VectorXd point;
  double value;
  int start_index;       // index of the launching candidate
  double basin_radius;   // |start - optimum|
};

struct InferenceResult {
  Eigen::VectorXd theta_hat;
  double loss = 0.0;
  std::vector<LocalOptimum> optima;   // every local optimum found
  Eigen::MatrixXd hessian;            // central-difference Hessian at theta_hat
  Eigen::MatrixXd covariance;         // PD-projected inverse of the Hessian
  long function_evaluations = 0;
  double wall_time_seconds = 0.0;     // diagnostic only; never serialized
};

using LossFn = std::function<double(const Eigen::VectorXd&)>;

/// Two-stage scatter search: Sobol trial points are scored and sorted, a
/// bounded quasi-Newton solver runs from the best candidates, and starts
/// falling inside the basin sphere of a known optimum are skipped. Stage
/// two repeats with fresh scatter points.
InferenceResult minimize_global_search(const LossFn& loss, const OptimizerConfig& config);

/// Conjugate-gradient descent with central-difference gradients from
/// `starts` Sobol starting points; box constraints by projection; the best
/// minimum is kept.
InferenceResult minimize_cg_multistart(const LossFn& loss, const OptimizerConfig& config);

/// Dispatch on config.strategy.
InferenceResult minimize(const LossFn& loss, const OptimizerConfig& config);

/// Central second differences, symmetrized. `step_rel` scales the per-
/// coordinate step by the box width; stencil centers shift inward (with a
/// warning) when theta sits within a step of the boundary.
Eigen::MatrixXd hessian_at(const LossFn& loss, const Eigen::VectorXd& theta,
                           const optim::Box& bounds, double step_rel = 1e-3);

/// PD-projected inverse of a Hessian: eigenvalues are clipped from below at
/// 1e-6 * trace (with a warning) before inversion.
Eigen::MatrixXd hessian_inverse_pd(const Eigen::MatrixXd& hessian);

struct UqSamples {
  Eigen::MatrixXd draws;   // n x dim, clipped to the box
  int clipped_count = 0;   // draws that needed clipping
};

/// Draws from MVN(theta_hat, H^-1) with box clipping. Deterministic under
/// the seed.
UqSamples uq_sample(const Eigen::VectorXd& theta_hat, const Eigen::MatrixXd& hessian,
                    int n_samples, const optim::Box& bounds, std::uint64_t seed = 0);

struct CurveBand {
  double stretch;
  double mean;   // stress of the point estimate
  double lower;  // empirical quantile of the pushed-through samples
  double upper;
};

/// Pushes MVN(theta_hat, H^-1) samples through the stretch-stress curve and
/// reports per-stretch empirical quantiles at the requested level.
std::vector<CurveBand> curve_confidence_bands(
    const Eigen::VectorXd& theta_hat, const Eigen::MatrixXd& hessian,
    material::CurveDirection direction, std::span<const double> stretches,
    int n_samples = 1000, double level = 0.95, std::uint64_t seed = 0);

/// Type-7 (linear interpolation) quantile of a sample; `probability` in [0,1].
double quantile_type7(std::vector<double> values, double probability);

}  // namespace myofit::infer
