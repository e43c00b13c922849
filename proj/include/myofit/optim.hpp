/*!
 * This file is part of myofit, a library for emulation-based parameter
 * inference in anisotropic hyperelastic myocardium models.
 *
 * Licensed under the Apache License Version 2.0. See LICENSE file in the
 * project root for license information.
 */
#pragma once

#include <functional>
#include <limits>

#include <Eigen/Core>

namespace myofit::optim {

/// Axis-aligned box constraint.
struct Box {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;

  static Box cube(Eigen::Index dim, double lo, double hi);

  Eigen::VectorXd project(const Eigen::VectorXd& x) const;
  bool contains(const Eigen::VectorXd& x, double tol = 0.0) const;
  Eigen::VectorXd widths() const { return hi - lo; }
};

/// Objective with optional gradient output (gradient skipped when null).
using ValueGradFn = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd*)>;
using ValueFn = std::function<double(const Eigen::VectorXd&)>;

struct SolverOptions {
  int max_iterations = 100;
  double grad_tolerance = 1e-6;    // sup norm of the projected gradient step
  double grad_tolerance_rel = 0.0; // additional tolerance scaled by |f|
  double f_tolerance = 1e-12;      // relative decrease per iteration
  int history = 8;                 // L-BFGS memory
  int max_line_search = 14;
};

struct SolverResult {
  Eigen::VectorXd x;
  double f = std::numeric_limits<double>::infinity();
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
};

/// Projected-gradient L-BFGS with Armijo backtracking. With bounds == nullptr
/// this is plain L-BFGS; with bounds, iterates stay inside the box.
SolverResult minimize_lbfgs(const ValueGradFn& objective, Eigen::VectorXd x0,
                            const Box* bounds = nullptr, const SolverOptions& options = {});

/// Polak-Ribiere nonlinear conjugate gradient with box projection and
/// Armijo backtracking line search.
SolverResult minimize_cg(const ValueGradFn& objective, Eigen::VectorXd x0,
                         const Box* bounds = nullptr, const SolverOptions& options = {});

/// Wraps a plain objective with central-difference gradients (per-coordinate
/// steps). Each gradient costs 2*dim extra evaluations.
ValueGradFn with_central_differences(ValueFn objective, const Eigen::VectorXd& steps);

}  // namespace myofit::optim
