/*!
 * This file is part of myofit, a library for emulation-based parameter
 * inference in anisotropic hyperelastic myocardium models.
 *
 * Licensed under the Apache License Version 2.0. See LICENSE file in the
 * project root for license information.
 */
#include "myofit/optim.hpp"

#include <cmath>
#include <deque>
#include <utility>
#include <vector>

#include "myofit/errors.hpp"

namespace myofit::optim {

Box Box::cube(Eigen::Index dim, double lo, double hi) {
  Box box;
  box.lo = Eigen::VectorXd::Constant(dim, lo);
  box.hi = Eigen::VectorXd::Constant(dim, hi);
  return box;
}

Eigen::VectorXd Box::project(const Eigen::VectorXd& x) const {
  return x.cwiseMax(lo).cwiseMin(hi);
}

bool Box::contains(const Eigen::VectorXd& x, double tol) const {
  return ((x.array() >= lo.array() - tol) && (x.array() <= hi.array() + tol)).all();
}

namespace {

Eigen::VectorXd maybe_project(const Box* bounds, const Eigen::VectorXd& x) {
  return bounds ? bounds->project(x) : x;
}

// Sup norm of the projected-gradient step; reduces to |g|_inf without bounds.
double stationarity(const Box* bounds, const Eigen::VectorXd& x, const Eigen::VectorXd& g) {
  const Eigen::VectorXd step = maybe_project(bounds, x - g) - x;
  return step.lpNorm<Eigen::Infinity>();
}

struct LineSearchOutcome {
  Eigen::VectorXd x;
  double f;
  double alpha = 0.0;
  bool success = false;
};

// Backtracking Armijo search along a direction, projecting each trial
// point. Backtracking uses quadratic interpolation of the 1-D section,
// clamped to [0.1, 0.5] of the previous step.
LineSearchOutcome armijo_search(const ValueGradFn& objective, const Box* bounds,
                                const Eigen::VectorXd& x, double fx,
                                const Eigen::VectorXd& grad, const Eigen::VectorXd& direction,
                                int max_backtracks, int& evaluations,
                                double initial_alpha = 1.0) {
  constexpr double c1 = 1e-4;
  double alpha = initial_alpha;
  const double slope = grad.dot(direction);
  LineSearchOutcome best;
  for (int bt = 0; bt < max_backtracks; ++bt) {
    Eigen::VectorXd trial = maybe_project(bounds, x + alpha * direction);
    const Eigen::VectorXd step = trial - x;
    if (step.lpNorm<Eigen::Infinity>() == 0.0) {
      break;  // direction leaves the box immediately
    }
    const double ft = objective(trial, nullptr);
    ++evaluations;
    if (std::isfinite(ft) && ft <= fx + c1 * grad.dot(step)) {
      best.x = std::move(trial);
      best.f = ft;
      best.alpha = alpha;
      best.success = true;
      return best;
    }
    double next = 0.5 * alpha;
    if (std::isfinite(ft) && slope < 0.0) {
      const double denom = ft - fx - alpha * slope;
      if (denom > 0.0) {
        next = std::clamp(-0.5 * slope * alpha * alpha / denom, 0.1 * alpha, 0.5 * alpha);
      }
    }
    alpha = next;
  }
  return best;
}

}  // namespace

SolverResult minimize_lbfgs(const ValueGradFn& objective, Eigen::VectorXd x0,
                            const Box* bounds, const SolverOptions& options) {
  SolverResult result;
  Eigen::VectorXd x = maybe_project(bounds, std::move(x0));
  const Eigen::Index dim = x.size();

  Eigen::VectorXd grad(dim);
  double fx = objective(x, &grad);
  ++result.evaluations;
  if (!std::isfinite(fx)) {
    throw NumericError("lbfgs: objective not finite at the starting point");
  }

  std::deque<std::pair<Eigen::VectorXd, Eigen::VectorXd>> memory;  // (s, y)

  for (int iter = 0; iter < options.max_iterations; ++iter) {
    if (stationarity(bounds, x, grad) <
        options.grad_tolerance + options.grad_tolerance_rel * std::abs(fx)) {
      result.converged = true;
      break;
    }

    // Two-loop recursion.
    Eigen::VectorXd q = grad;
    std::vector<double> alpha_coeffs(memory.size());
    for (std::size_t i = memory.size(); i-- > 0;) {
      const auto& [s, y] = memory[i];
      const double rho = 1.0 / y.dot(s);
      alpha_coeffs[i] = rho * s.dot(q);
      q -= alpha_coeffs[i] * y;
    }
    if (!memory.empty()) {
      const auto& [s, y] = memory.back();
      q *= s.dot(y) / y.squaredNorm();
    }
    for (std::size_t i = 0; i < memory.size(); ++i) {
      const auto& [s, y] = memory[i];
      const double rho = 1.0 / y.dot(s);
      const double beta = rho * y.dot(q);
      q += (alpha_coeffs[i] - beta) * s;
    }
    Eigen::VectorXd direction = -q;
    if (direction.dot(grad) >= 0.0) {
      direction = -grad;  // fall back to steepest descent
      memory.clear();
    }

    // The unit step is right once curvature information exists; before
    // that, scale the raw gradient step to unit length.
    const double alpha0 =
        memory.empty() ? std::min(1.0, 1.0 / std::max(direction.norm(), 1e-12)) : 1.0;
    auto outcome = armijo_search(objective, bounds, x, fx, grad, direction,
                                 options.max_line_search, result.evaluations, alpha0);
    if (!outcome.success) {
      // Retry once along the raw gradient before giving up.
      direction = -grad;
      outcome = armijo_search(objective, bounds, x, fx, grad, direction,
                              options.max_line_search, result.evaluations,
                              std::min(1.0, 1.0 / std::max(direction.norm(), 1e-12)));
      if (!outcome.success) {
        // No descent along the gradient at any step length: the decrease
        // has fallen below floating-point resolution of f.
        result.converged = true;
        break;
      }
      memory.clear();
    }

    Eigen::VectorXd new_grad(dim);
    const double f_new = objective(outcome.x, &new_grad);
    ++result.evaluations;

    const Eigen::VectorXd s = outcome.x - x;
    const Eigen::VectorXd y = new_grad - grad;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      memory.emplace_back(s, y);
      if (static_cast<int>(memory.size()) > options.history) {
        memory.pop_front();
      }
    }

    const double decrease = fx - f_new;
    x = outcome.x;
    fx = f_new;
    grad = new_grad;
    ++result.iterations;

    if (decrease >= 0.0 && decrease <= options.f_tolerance * (std::abs(fx) + 1e-30)) {
      result.converged = true;
      break;
    }
  }

  result.x = std::move(x);
  result.f = fx;
  return result;
}

SolverResult minimize_cg(const ValueGradFn& objective, Eigen::VectorXd x0, const Box* bounds,
                         const SolverOptions& options) {
  SolverResult result;
  Eigen::VectorXd x = maybe_project(bounds, std::move(x0));
  const Eigen::Index dim = x.size();

  Eigen::VectorXd grad(dim);
  double fx = objective(x, &grad);
  ++result.evaluations;
  if (!std::isfinite(fx)) {
    throw NumericError("cg: objective not finite at the starting point");
  }

  Eigen::VectorXd direction = -grad;
  Eigen::VectorXd prev_grad = grad;
  double alpha_guess = std::min(1.0, 1.0 / std::max(grad.norm(), 1e-12));

  for (int iter = 0; iter < options.max_iterations; ++iter) {
    if (stationarity(bounds, x, grad) <
        options.grad_tolerance + options.grad_tolerance_rel * std::abs(fx)) {
      result.converged = true;
      break;
    }
    if (direction.dot(grad) >= 0.0) {
      direction = -grad;
    }

    auto outcome = armijo_search(objective, bounds, x, fx, grad, direction,
                                 options.max_line_search, result.evaluations, alpha_guess);
    if (!outcome.success) {
      if (direction == -grad) {
        break;
      }
      direction = -grad;
      outcome = armijo_search(objective, bounds, x, fx, grad, direction,
                              options.max_line_search, result.evaluations,
                              std::min(1.0, 1.0 / std::max(grad.norm(), 1e-12)));
      if (!outcome.success) {
        result.converged = true;
        break;
      }
    }
    alpha_guess = std::min(1.0, 2.0 * outcome.alpha);

    Eigen::VectorXd new_grad(dim);
    const double f_new = objective(outcome.x, &new_grad);
    ++result.evaluations;

    // Polak-Ribiere with non-negativity restart; periodic steepest reset.
    double beta = new_grad.dot(new_grad - prev_grad) / prev_grad.squaredNorm();
    if (!std::isfinite(beta) || beta < 0.0 || (iter + 1) % (2 * dim) == 0) {
      beta = 0.0;
    }
    direction = -new_grad + beta * direction;

    const double decrease = fx - f_new;
    prev_grad = new_grad;
    grad = new_grad;
    x = outcome.x;
    fx = f_new;
    ++result.iterations;

    if (decrease >= 0.0 && decrease <= options.f_tolerance * (std::abs(fx) + 1e-30)) {
      result.converged = true;
      break;
    }
  }

  result.x = std::move(x);
  result.f = fx;
  return result;
}

ValueGradFn with_central_differences(ValueFn objective, const Eigen::VectorXd& steps) {
  return [objective = std::move(objective), steps](const Eigen::VectorXd& x,
                                                   Eigen::VectorXd* grad) -> double {
    const double fx = objective(x);
    if (grad) {
      grad->resize(x.size());
      Eigen::VectorXd probe = x;
      for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double h = steps[i];
        probe[i] = x[i] + h;
        const double fp = objective(probe);
        probe[i] = x[i] - h;
        const double fm = objective(probe);
        probe[i] = x[i];
        (*grad)[i] = (fp - fm) / (2.0 * h);
      }
    }
    return fx;
  };
}

}  // namespace myofit::optim
