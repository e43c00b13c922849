/*!
 * This file is part of myofit, a library for emulation-based parameter
 * inference in anisotropic hyperelastic myocardium models.
 *
 * Licensed under the Apache License Version 2.0. See LICENSE file in the
 * project root for license information.
 */
#include "myofit/infer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>

#include <Eigen/Eigenvalues>

#include "myofit/design.hpp"
#include "myofit/errors.hpp"
#include "myofit/log.hpp"
#include "myofit/rng.hpp"

namespace myofit::infer {

namespace {

using Clock = std::chrono::steady_clock;

struct CountingLoss {
  const LossFn* loss;
  long count = 0;
  double operator()(const Eigen::VectorXd& x) {
    ++count;
    return (*loss)(x);
  }
};

// Scatter points come from the Sobol stream; the seed selects a disjoint
// section so that reruns are reproducible and seeds decorrelate.
Eigen::MatrixXd scatter(const OptimizerConfig& config, std::uint64_t offset, Eigen::Index n) {
  const Eigen::Index dim = config.bounds.lo.size();
  const std::uint64_t skip = 1 + config.seed * 0x10001ULL + offset;
  Eigen::MatrixXd unit = design::sobol_points(static_cast<int>(dim), n, skip);
  Eigen::MatrixXd points(n, dim);
  for (Eigen::Index j = 0; j < dim; ++j) {
    points.col(j) =
        config.bounds.lo[j] +
        (config.bounds.hi[j] - config.bounds.lo[j]) * unit.col(j).array();
  }
  return points;
}

Eigen::VectorXd fd_steps(const OptimizerConfig& config) {
  return config.fd_step_rel * config.bounds.widths();
}

void finalize(InferenceResult& result, const LossFn& loss, const OptimizerConfig& config,
              long evaluations, Clock::time_point started) {
  result.function_evaluations = evaluations;
  result.hessian = hessian_at(loss, result.theta_hat, config.bounds);
  result.covariance = hessian_inverse_pd(result.hessian);
  result.wall_time_seconds =
      std::chrono::duration<double>(Clock::now() - started).count();
}

}  // namespace

InferenceResult minimize_global_search(const LossFn& loss, const OptimizerConfig& config) {
  const auto started = Clock::now();
  if (config.trial_points < 1 || config.stage_one_points < 1) {
    throw DomainError("global search: trial/stage-one point counts must be positive");
  }

  CountingLoss counted{&loss};
  const Eigen::VectorXd steps = fd_steps(config);
  const optim::ValueGradFn objective = optim::with_central_differences(
      [&counted](const Eigen::VectorXd& x) { return counted(x); }, steps);

  optim::SolverOptions solver;
  solver.max_iterations = config.max_local_iterations;
  solver.grad_tolerance = 1e-6;
  solver.f_tolerance = 1e-10;

  InferenceResult result;
  int failures = 0;
  int runs = 0;
  const int stage_counts[2] = {
      std::min(config.stage_one_points, config.trial_points),
      std::max(config.trial_points - config.stage_one_points, 0)};

  std::uint64_t scatter_offset = 0;
  for (int stage = 0; stage < 2 && runs < config.starts; ++stage) {
    const Eigen::Index n_points = stage_counts[stage];
    if (n_points == 0) continue;
    const Eigen::MatrixXd points = scatter(config, scatter_offset, n_points);
    scatter_offset += static_cast<std::uint64_t>(n_points);

    Eigen::VectorXd scores(n_points);
    for (Eigen::Index i = 0; i < n_points; ++i) {
      scores[i] = counted(points.row(i).transpose());
    }
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n_points));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
      if (scores[a] != scores[b]) return scores[a] < scores[b];
      return a < b;
    });

    for (Eigen::Index rank = 0; rank < n_points && runs < config.starts; ++rank) {
      const Eigen::Index i = order[static_cast<std::size_t>(rank)];
      const Eigen::VectorXd start = points.row(i).transpose();
      if (!std::isfinite(scores[i])) {
        continue;
      }
      // Basin test: skip starts inside the sphere of a known optimum.
      bool inside_basin = false;
      for (const LocalOptimum& opt : result.optima) {
        if ((start - opt.point).norm() <= opt.basin_radius) {
          inside_basin = true;
          break;
        }
      }
      if (inside_basin) {
        continue;
      }
      try {
        const optim::SolverResult run =
            optim::minimize_lbfgs(objective, start, &config.bounds, solver);
        LocalOptimum opt;
        opt.point = run.x;
        opt.value = run.f;
        opt.start_index = static_cast<int>(scatter_offset - static_cast<std::uint64_t>(n_points) + static_cast<std::uint64_t>(i));
        opt.basin_radius = (start - run.x).norm();
        result.optima.push_back(std::move(opt));
      } catch (const Error& e) {
        ++failures;
        warn(std::string("global search: local run failed: ") + e.what());
      }
      ++runs;
    }
  }

  if (result.optima.empty()) {
    throw NumericError("global search: every local run failed (" +
                       std::to_string(failures) + " failures)");
  }
  const auto best = std::min_element(
      result.optima.begin(), result.optima.end(),
      [](const LocalOptimum& a, const LocalOptimum& b) { return a.value < b.value; });
  result.theta_hat = best->point;
  result.loss = best->value;
  finalize(result, loss, config, counted.count, started);
  return result;
}

InferenceResult minimize_cg_multistart(const LossFn& loss, const OptimizerConfig& config) {
  const auto started = Clock::now();
  if (config.starts < 1) {
    throw DomainError("cg multistart: needs at least one start");
  }

  CountingLoss counted{&loss};
  const Eigen::VectorXd steps = fd_steps(config);
  const optim::ValueGradFn objective = optim::with_central_differences(
      [&counted](const Eigen::VectorXd& x) { return counted(x); }, steps);

  optim::SolverOptions solver;
  solver.max_iterations = config.max_local_iterations;
  solver.grad_tolerance = 1e-6;
  solver.f_tolerance = 1e-10;

  const Eigen::MatrixXd starts = scatter(config, 0, config.starts);

  InferenceResult result;
  int failures = 0;
  for (int s = 0; s < config.starts; ++s) {
    try {
      const optim::SolverResult run =
          optim::minimize_cg(objective, starts.row(s).transpose(), &config.bounds, solver);
      LocalOptimum opt;
      opt.point = run.x;
      opt.value = run.f;
      opt.start_index = s;
      opt.basin_radius = (starts.row(s).transpose() - run.x).norm();
      result.optima.push_back(std::move(opt));
    } catch (const Error& e) {
      ++failures;
      warn(std::string("cg multistart: start failed: ") + e.what());
    }
  }
  if (result.optima.empty()) {
    throw NumericError("cg multistart: every start failed (" + std::to_string(failures) +
                       " failures)");
  }
  const auto best = std::min_element(
      result.optima.begin(), result.optima.end(),
      [](const LocalOptimum& a, const LocalOptimum& b) { return a.value < b.value; });
  result.theta_hat = best->point;
  result.loss = best->value;
  finalize(result, loss, config, counted.count, started);
  return result;
}

InferenceResult minimize(const LossFn& loss, const OptimizerConfig& config) {
  return config.strategy == Strategy::global_search ? minimize_global_search(loss, config)
                                                    : minimize_cg_multistart(loss, config);
}

Eigen::MatrixXd hessian_at(const LossFn& loss, const Eigen::VectorXd& theta,
                           const optim::Box& bounds, double step_rel) {
  const Eigen::Index dim = theta.size();
  const Eigen::VectorXd h = step_rel * bounds.widths();

  // Shift stencil centers inward where theta touches the boundary.
  Eigen::VectorXd center = theta;
  bool shifted = false;
  for (Eigen::Index i = 0; i < dim; ++i) {
    const double lo = bounds.lo[i] + h[i];
    const double hi = bounds.hi[i] - h[i];
    if (center[i] < lo || center[i] > hi) {
      center[i] = std::clamp(center[i], lo, hi);
      shifted = true;
    }
  }
  if (shifted) {
    warn("hessian: point near the boundary; stencil center shifted inward");
  }

  Eigen::MatrixXd hess(dim, dim);
  const double f0 = loss(center);
  for (Eigen::Index i = 0; i < dim; ++i) {
    Eigen::VectorXd xp = center, xm = center;
    xp[i] += h[i];
    xm[i] -= h[i];
    hess(i, i) = (loss(xp) - 2.0 * f0 + loss(xm)) / (h[i] * h[i]);
    for (Eigen::Index j = i + 1; j < dim; ++j) {
      Eigen::VectorXd xpp = center, xpm = center, xmp = center, xmm = center;
      xpp[i] += h[i]; xpp[j] += h[j];
      xpm[i] += h[i]; xpm[j] -= h[j];
      xmp[i] -= h[i]; xmp[j] += h[j];
      xmm[i] -= h[i]; xmm[j] -= h[j];
      const double value =
          (loss(xpp) - loss(xpm) - loss(xmp) + loss(xmm)) / (4.0 * h[i] * h[j]);
      hess(i, j) = value;
      hess(j, i) = value;
    }
  }
  if (!hess.allFinite()) {
    throw NumericError("hessian: non-finite entries");
  }
  return 0.5 * (hess + hess.transpose());
}

Eigen::MatrixXd hessian_inverse_pd(const Eigen::MatrixXd& hessian) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(hessian);
  if (solver.info() != Eigen::Success) {
    throw NumericError("hessian: eigendecomposition failed");
  }
  const double floor = 1e-6 * std::abs(hessian.trace());
  Eigen::VectorXd values = solver.eigenvalues();
  bool clipped = false;
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (values[i] < floor) {
      values[i] = std::max(floor, 1e-300);
      clipped = true;
    }
  }
  if (clipped) {
    warn("hessian: projected to positive definite (eigenvalue clipping)");
  }
  return solver.eigenvectors() * values.cwiseInverse().asDiagonal() *
         solver.eigenvectors().transpose();
}

UqSamples uq_sample(const Eigen::VectorXd& theta_hat, const Eigen::MatrixXd& hessian,
                    int n_samples, const optim::Box& bounds, std::uint64_t seed) {
  if (n_samples < 1) {
    throw DomainError("uq_sample: need at least one sample");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(hessian);
  if (solver.info() != Eigen::Success) {
    throw NumericError("uq_sample: eigendecomposition failed");
  }
  const double floor = 1e-6 * std::abs(hessian.trace());
  Eigen::VectorXd values = solver.eigenvalues();
  bool clipped_eigs = false;
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (values[i] < floor) {
      values[i] = std::max(floor, 1e-300);
      clipped_eigs = true;
    }
  }
  if (clipped_eigs) {
    warn("uq_sample: Hessian projected to positive definite");
  }
  // Covariance H^-1 = V diag(1/d) V^T; draws are theta + V diag(d^-1/2) z.
  const Eigen::MatrixXd transform =
      solver.eigenvectors() * values.cwiseInverse().cwiseSqrt().asDiagonal();

  const Eigen::Index dim = theta_hat.size();
  UqSamples samples;
  samples.draws.resize(n_samples, dim);
  Rng rng(seed * 0x9e3779b97f4a7c15ULL + 0xda3e39cb94b95bdbULL);
  for (int s = 0; s < n_samples; ++s) {
    Eigen::VectorXd z(dim);
    for (Eigen::Index i = 0; i < dim; ++i) {
      z[i] = rng.gaussian();
    }
    Eigen::VectorXd draw = theta_hat + transform * z;
    const Eigen::VectorXd projected = bounds.project(draw);
    if ((projected - draw).lpNorm<Eigen::Infinity>() > 0.0) {
      ++samples.clipped_count;
    }
    samples.draws.row(s) = projected;
  }
  return samples;
}

std::vector<CurveBand> curve_confidence_bands(const Eigen::VectorXd& theta_hat,
                                              const Eigen::MatrixXd& hessian,
                                              material::CurveDirection direction,
                                              std::span<const double> stretches,
                                              int n_samples, double level,
                                              std::uint64_t seed) {
  if (!(level > 0.0 && level < 1.0)) {
    throw DomainError("curve bands: level must lie in (0, 1)");
  }
  const optim::Box bounds = optim::Box::cube(4, material::kThetaLo, material::kThetaHi);
  const UqSamples samples = uq_sample(theta_hat, hessian, n_samples, bounds, seed);

  const material::ParameterVector theta_point{Eigen::Vector4d(theta_hat)};
  const auto point_curve = material::stretch_stress_curve(theta_point, direction, stretches);

  const std::size_t n_lambda = stretches.size();
  std::vector<std::vector<double>> pushed(n_lambda);
  for (auto& column : pushed) {
    column.reserve(static_cast<std::size_t>(n_samples));
  }
  for (int s = 0; s < n_samples; ++s) {
    const material::ParameterVector theta_s{Eigen::Vector4d(samples.draws.row(s))};
    const auto curve = material::stretch_stress_curve(theta_s, direction, stretches);
    for (std::size_t l = 0; l < n_lambda; ++l) {
      pushed[l].push_back(curve[l].stress);
    }
  }

  const double alpha = 0.5 * (1.0 - level);
  std::vector<CurveBand> bands(n_lambda);
  for (std::size_t l = 0; l < n_lambda; ++l) {
    bands[l].stretch = point_curve[l].stretch;
    bands[l].mean = point_curve[l].stress;
    bands[l].lower = quantile_type7(pushed[l], alpha);
    bands[l].upper = quantile_type7(pushed[l], 1.0 - alpha);
  }
  return bands;
}

double quantile_type7(std::vector<double> values, double probability) {
  if (values.empty()) {
    throw DomainError("quantile: empty sample");
  }
  if (!(probability >= 0.0 && probability <= 1.0)) {
    throw DomainError("quantile: probability outside [0, 1]");
  }
  std::sort(values.begin(), values.end());
  const double position = probability * (static_cast<double>(values.size()) - 1.0);
  const std::size_t lower = static_cast<std::size_t>(std::floor(position));
  const std::size_t upper = static_cast<std::size_t>(std::ceil(position));
  const double fraction = position - static_cast<double>(lower);
  return values[lower] + fraction * (values[upper] - values[lower]);
}

}  // namespace myofit::infer
