/*!
 * This file is part of myofit, a library for emulation-based parameter
 * inference in anisotropic hyperelastic myocardium models.
 *
 * Licensed under the Apache License Version 2.0. See LICENSE file in the
 * project root for license information.
 */
#include "myofit/gp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numeric>
#include <string>
#include <utility>

#include <Eigen/Eigenvalues>

#include "myofit/errors.hpp"
#include "myofit/log.hpp"
#include "myofit/optim.hpp"
#include "myofit/rng.hpp"

namespace myofit::gp {

namespace {

constexpr double kSqrt3 = 1.7320508075688772;
constexpr double kLog2Pi = 1.8378770664093453;
constexpr double kNoiseFloor = 1e-8;

}  // namespace

void KernelSpec::validate(Eigen::Index input_dim) const {
  if (!(output_scale > 0.0) || !std::isfinite(output_scale)) {
    throw DomainError("kernel output scale must be strictly positive");
  }
  if ((lengthscales.array() <= 0.0).any() || !lengthscales.allFinite()) {
    throw DomainError("kernel lengthscales must be strictly positive");
  }
  const Eigen::Index expected =
      family == KernelFamily::ard_squared_exponential ? input_dim : 1;
  if (lengthscales.size() != expected) {
    throw DomainError("kernel has " + std::to_string(lengthscales.size()) +
                      " lengthscales, expected " + std::to_string(expected));
  }
}

double kernel_eval(const KernelSpec& spec, const Eigen::VectorXd& x,
                   const Eigen::VectorXd& y) {
  if (x.size() != y.size()) {
    throw DomainError("kernel_eval: input dimensions differ");
  }
  spec.validate(x.size());
  const double s2 = spec.output_scale * spec.output_scale;
  if (spec.family == KernelFamily::ard_squared_exponential) {
    const Eigen::ArrayXd z = (x - y).array() / spec.lengthscales.array();
    return s2 * std::exp(-0.5 * z.square().sum());
  }
  const double t = kSqrt3 * (x - y).norm() / spec.lengthscales[0];
  return s2 * (1.0 + t) * std::exp(-t);
}

GramCache::GramCache(const Eigen::MatrixXd& X) {
  const Eigen::Index n = X.rows();
  const Eigen::Index d = X.cols();
  sqdiff.reserve(static_cast<std::size_t>(d));
  sqdist = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index k = 0; k < d; ++k) {
    const Eigen::VectorXd col = X.col(k);
    Eigen::MatrixXd diff = col.replicate(1, n) - col.transpose().replicate(n, 1);
    diff = diff.cwiseProduct(diff);
    sqdist += diff;
    sqdiff.push_back(std::move(diff));
  }
}

namespace {

// Correlation matrix (unit output scale) from cached squared differences.
Eigen::MatrixXd correlation_from_cache(const KernelSpec& spec, const GramCache& cache) {
  const Eigen::Index n = cache.size();
  if (spec.family == KernelFamily::ard_squared_exponential) {
    Eigen::MatrixXd q = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t k = 0; k < cache.sqdiff.size(); ++k) {
      const double inv2 =
          1.0 / (spec.lengthscales[static_cast<Eigen::Index>(k)] *
                 spec.lengthscales[static_cast<Eigen::Index>(k)]);
      q += inv2 * cache.sqdiff[k];
    }
    return (-0.5 * q.array()).exp().matrix();
  }
  const double inv = kSqrt3 / spec.lengthscales[0];
  Eigen::ArrayXXd t = cache.sqdist.array().sqrt() * inv;
  return ((1.0 + t) * (-t).exp()).matrix();
}

}  // namespace

Eigen::MatrixXd kernel_matrix(const KernelSpec& spec, const Eigen::MatrixXd& X) {
  spec.validate(X.cols());
  const double s2 = spec.output_scale * spec.output_scale;
  // Scaled squared distances via the Gram expansion (no per-dimension
  // staging; X can have thousands of rows here).
  Eigen::MatrixXd scaled = X;
  if (spec.family == KernelFamily::ard_squared_exponential) {
    for (Eigen::Index k = 0; k < X.cols(); ++k) {
      scaled.col(k) /= spec.lengthscales[k];
    }
  } else {
    scaled /= spec.lengthscales[0];
  }
  const Eigen::VectorXd sq = scaled.rowwise().squaredNorm();
  Eigen::MatrixXd dist2 = -2.0 * scaled * scaled.transpose();
  dist2.colwise() += sq;
  dist2.rowwise() += sq.transpose();
  dist2 = dist2.cwiseMax(0.0);
  if (spec.family == KernelFamily::ard_squared_exponential) {
    return (s2 * (-0.5 * dist2.array()).exp()).matrix();
  }
  const Eigen::ArrayXXd t = kSqrt3 * dist2.array().sqrt();
  return (s2 * (1.0 + t) * (-t).exp()).matrix();
}

Eigen::VectorXd kernel_cross(const KernelSpec& spec, const Eigen::MatrixXd& X,
                             const Eigen::VectorXd& x_star) {
  if (x_star.size() != X.cols()) {
    throw DomainError("kernel_cross: query dimension mismatch");
  }
  spec.validate(X.cols());
  const double s2 = spec.output_scale * spec.output_scale;
  if (spec.family == KernelFamily::ard_squared_exponential) {
    Eigen::ArrayXd q = Eigen::ArrayXd::Zero(X.rows());
    for (Eigen::Index k = 0; k < X.cols(); ++k) {
      const Eigen::ArrayXd diff = X.col(k).array() - x_star[k];
      q += diff.square() / (spec.lengthscales[k] * spec.lengthscales[k]);
    }
    return (s2 * (-0.5 * q).exp()).matrix();
  }
  const Eigen::ArrayXd r =
      (X.rowwise() - x_star.transpose()).rowwise().norm().array();
  const Eigen::ArrayXd t = kSqrt3 / spec.lengthscales[0] * r;
  return (s2 * (1.0 + t) * (-t).exp()).matrix();
}

// ---------------------------------------------------------------------------
// Exact GP
// ---------------------------------------------------------------------------

namespace {

// Log-space hyperparameter layout: [log lengthscales..., log s, log sigma].
struct HyperLayout {
  KernelFamily family;
  Eigen::Index input_dim;
  Eigen::Index n_lengthscales() const {
    return family == KernelFamily::ard_squared_exponential ? input_dim : 1;
  }
  Eigen::Index size() const { return n_lengthscales() + 2; }

  KernelSpec kernel(const Eigen::VectorXd& eta) const {
    KernelSpec spec;
    spec.family = family;
    spec.lengthscales = eta.head(n_lengthscales()).array().exp();
    spec.output_scale = std::exp(eta[n_lengthscales()]);
    return spec;
  }
  double noise(const Eigen::VectorXd& eta) const {
    return std::max(std::exp(eta[n_lengthscales() + 1]), kNoiseFloor);
  }
};

struct MarginalState {
  Eigen::LLT<Eigen::MatrixXd> llt;
  Eigen::VectorXd alpha;
  double mean = 0.0;
  double lml = 0.0;
  double applied_jitter = 0.0;
};

// Cholesky with jitter escalation 1e-8 -> 1e-4 (relative to the mean
// diagonal); throws NumericError beyond that.
Eigen::LLT<Eigen::MatrixXd> robust_llt(const Eigen::MatrixXd& A, double* applied = nullptr) {
  const double scale = std::max(A.diagonal().mean(), 1e-300);
  double jitter = 0.0;
  for (int attempt = 0; attempt <= 5; ++attempt) {
    Eigen::MatrixXd work = A;
    if (jitter > 0.0) {
      work.diagonal().array() += jitter * scale;
    }
    Eigen::LLT<Eigen::MatrixXd> llt(work);
    if (llt.info() == Eigen::Success) {
      if (applied) *applied = jitter * scale;
      return llt;
    }
    jitter = jitter == 0.0 ? 1e-8 : jitter * 10.0;
    if (jitter > 1e-4) break;
  }
  throw NumericError("Cholesky factorization failed after jitter escalation");
}

// Negative log marginal likelihood and its gradient in log space. The mean
// constant is profiled in closed form (its gradient contribution vanishes
// at the profiled optimum).
double negative_lml(const HyperLayout& layout, const Eigen::VectorXd& eta,
                    const GramCache& cache, const Eigen::VectorXd& y,
                    Eigen::VectorXd* grad, MarginalState* state) {
  const Eigen::Index n = y.size();
  const KernelSpec spec = layout.kernel(eta);
  const double sigma = layout.noise(eta);
  const double s2 = spec.output_scale * spec.output_scale;

  const Eigen::MatrixXd corr = correlation_from_cache(spec, cache);
  Eigen::MatrixXd ky = s2 * corr;
  ky.diagonal().array() += sigma * sigma;

  double applied_jitter = 0.0;
  Eigen::LLT<Eigen::MatrixXd> llt = robust_llt(ky, &applied_jitter);

  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
  const Eigen::VectorXd kinv_y = llt.solve(y);
  const Eigen::VectorXd kinv_1 = llt.solve(ones);
  const double denom = ones.dot(kinv_1);
  const double mean = denom > 0.0 ? ones.dot(kinv_y) / denom : 0.0;
  const Eigen::VectorXd alpha = kinv_y - mean * kinv_1;
  const Eigen::VectorXd residual = y - mean * ones;

  const double log_det =
      2.0 * llt.matrixLLT().diagonal().array().log().sum();
  const double lml =
      -0.5 * residual.dot(alpha) - 0.5 * log_det - 0.5 * n * kLog2Pi;

  if (grad) {
    // d(-lml)/d eta_j = -0.5 tr((alpha alpha^T - Ky^-1) dK/d eta_j)
    Eigen::MatrixXd a_mat = llt.solve(Eigen::MatrixXd::Identity(n, n));
    a_mat.noalias() -= alpha * alpha.transpose();  // now Ky^-1 - alpha alpha^T
    grad->resize(layout.size());
    const Eigen::ArrayXXd weighted = a_mat.array() * corr.array();
    if (layout.family == KernelFamily::ard_squared_exponential) {
      for (Eigen::Index k = 0; k < layout.n_lengthscales(); ++k) {
        const double inv2 = 1.0 / (spec.lengthscales[k] * spec.lengthscales[k]);
        // dK/d log l_k = s^2 corr .* sqdiff_k / l_k^2
        (*grad)[k] = 0.5 * s2 * inv2 *
                     (weighted * cache.sqdiff[static_cast<std::size_t>(k)].array()).sum();
      }
    } else {
      const double inv = kSqrt3 / spec.lengthscales[0];
      const Eigen::ArrayXXd t = cache.sqdist.array().sqrt() * inv;
      // dK/d log l = s^2 t^2 exp(-t)
      (*grad)[0] = 0.5 * s2 * (a_mat.array() * t.square() * (-t).exp()).sum();
    }
    (*grad)[layout.n_lengthscales()] = s2 * weighted.sum();
    (*grad)[layout.n_lengthscales() + 1] = sigma * sigma * a_mat.trace();
  }

  if (state) {
    state->llt = std::move(llt);
    state->alpha = alpha;
    state->mean = mean;
    state->lml = lml;
    state->applied_jitter = applied_jitter;
  }
  return -lml;
}

// Canonical initialization and box bounds in log space.
struct HyperInit {
  Eigen::VectorXd eta0;
  optim::Box bounds;
};

HyperInit make_init(const HyperLayout& layout, const Eigen::MatrixXd& X,
                    const Eigen::VectorXd& y, double init_noise) {
  const Eigen::Index p = layout.size();
  HyperInit init;
  init.eta0.resize(p);
  init.bounds.lo.resize(p);
  init.bounds.hi.resize(p);

  const double y_std = std::max(std::sqrt((y.array() - y.mean()).square().mean()), 1e-8);

  for (Eigen::Index k = 0; k < layout.n_lengthscales(); ++k) {
    double width;
    if (layout.family == KernelFamily::ard_squared_exponential) {
      width = X.col(k).maxCoeff() - X.col(k).minCoeff();
    } else {
      width = (X.rowwise() - X.colwise().mean()).rowwise().norm().maxCoeff() * 2.0;
    }
    width = std::max(width, 1e-8);
    init.eta0[k] = std::log(0.5 * width);
    init.bounds.lo[k] = std::log(width) - 5.0;
    init.bounds.hi[k] = std::log(width) + 5.0;
  }
  const Eigen::Index si = layout.n_lengthscales();
  init.eta0[si] = std::log(y_std);
  init.bounds.lo[si] = std::log(y_std) - 10.0;
  init.bounds.hi[si] = std::log(y_std) + 10.0;
  init.eta0[si + 1] = std::log(std::max(init_noise, kNoiseFloor));
  init.bounds.lo[si + 1] = std::log(kNoiseFloor);
  init.bounds.hi[si + 1] = std::log(std::max(10.0 * y_std, 1e-6));
  init.eta0 = init.bounds.project(init.eta0);
  return init;
}

}  // namespace

double log_marginal_likelihood(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                               KernelFamily family, const Eigen::VectorXd& eta_log,
                               Eigen::VectorXd* gradient) {
  const HyperLayout layout{family, X.cols()};
  if (eta_log.size() != layout.size()) {
    throw DomainError("log_marginal_likelihood: expected " +
                      std::to_string(layout.size()) + " log hyperparameters");
  }
  const GramCache cache(X);
  const double nll = negative_lml(layout, eta_log, cache, y, gradient, nullptr);
  if (gradient) {
    *gradient = -*gradient;
  }
  return -nll;
}

ExactGp ExactGp::fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                     KernelFamily family, const GpFitOptions& options) {
  if (X.rows() != y.size()) {
    throw DomainError("gp fit: input/output row mismatch");
  }
  // Collapse exact duplicate inputs, averaging their outputs.
  std::vector<Eigen::Index> order(static_cast<std::size_t>(X.rows()));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index c = 0; c < X.cols(); ++c) {
      if (X(a, c) != X(b, c)) return X(a, c) < X(b, c);
    }
    return a < b;
  });
  std::vector<Eigen::Index> keep;
  std::vector<double> sums;
  std::vector<int> counts;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (!keep.empty() &&
        (X.row(order[i]).array() == X.row(keep.back()).array()).all()) {
      sums.back() += y[order[i]];
      ++counts.back();
    } else {
      keep.push_back(order[i]);
      sums.push_back(y[order[i]]);
      counts.push_back(1);
    }
  }
  Eigen::MatrixXd Xu;
  Eigen::VectorXd yu;
  if (keep.size() != order.size()) {
    warn("gp fit: collapsed " + std::to_string(order.size() - keep.size()) +
         " duplicate training input(s)");
    // Preserve first-occurrence order for determinism.
    std::vector<std::size_t> idx(keep.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return keep[a] < keep[b]; });
    Xu.resize(static_cast<Eigen::Index>(keep.size()), X.cols());
    yu.resize(static_cast<Eigen::Index>(keep.size()));
    for (std::size_t r = 0; r < idx.size(); ++r) {
      Xu.row(static_cast<Eigen::Index>(r)) = X.row(keep[idx[r]]);
      yu[static_cast<Eigen::Index>(r)] = sums[idx[r]] / counts[idx[r]];
    }
  } else {
    Xu = X;
    yu = y;
  }
  if (Xu.rows() < 2) {
    throw DomainError("gp fit: need at least 2 distinct training points");
  }
  auto shared_x = std::make_shared<const Eigen::MatrixXd>(std::move(Xu));
  auto cache = std::make_shared<const GramCache>(*shared_x);
  return fit_cached(shared_x, yu, family, options, cache);
}

ExactGp ExactGp::fit_cached(const std::shared_ptr<const Eigen::MatrixXd>& X,
                            const Eigen::VectorXd& y, KernelFamily family,
                            const GpFitOptions& options,
                            const std::shared_ptr<const GramCache>& cache) {
  if (X->rows() != y.size() || X->rows() < 2) {
    throw DomainError("gp fit: need at least 2 training points");
  }
  const HyperLayout layout{family, X->cols()};
  const HyperInit init = make_init(layout, *X, y, options.init_noise);

  auto objective = [&](const Eigen::VectorXd& eta, Eigen::VectorXd* grad) {
    return negative_lml(layout, eta, *cache, y, grad, nullptr);
  };

  Eigen::VectorXd best_eta = init.eta0;
  double best_nll = std::numeric_limits<double>::infinity();

  if (options.optimize) {
    optim::SolverOptions solver;
    solver.max_iterations = options.max_iterations;
    solver.grad_tolerance = options.grad_tolerance;
    solver.grad_tolerance_rel = options.grad_tolerance_rel;
    solver.max_line_search = options.max_line_search;

    std::vector<Eigen::VectorXd> starts;
    if (options.warm_start) {
      starts.push_back(init.bounds.project(*options.warm_start));
    } else {
      starts.push_back(init.eta0);
      Rng rng(options.seed * 0x9e3779b97f4a7c15ULL + 0x2545f4914f6cdd1dULL);
      for (int r = 1; r < std::max(1, options.restarts); ++r) {
        Eigen::VectorXd eta = init.eta0;
        for (Eigen::Index i = 0; i < eta.size(); ++i) {
          eta[i] += rng.uniform(-1.0, 1.0);
        }
        starts.push_back(init.bounds.project(eta));
      }
    }

    for (const Eigen::VectorXd& start : starts) {
      try {
        const optim::SolverResult run =
            optim::minimize_lbfgs(objective, start, &init.bounds, solver);
        if (std::getenv("MYOFIT_GP_TRACE")) {
          std::fprintf(stderr, "[gp fit] n=%ld warm=%d iters=%d evals=%d conv=%d nll=%.5f\n",
                       static_cast<long>(X->rows()), options.warm_start.has_value(),
                       run.iterations, run.evaluations, run.converged, run.f);
        }
        if (run.f < best_nll) {
          best_nll = run.f;
          best_eta = run.x;
        }
      } catch (const NumericError&) {
        // A failed start (factorization breakdown) is skipped; the
        // remaining restarts still count.
      }
    }
    if (!std::isfinite(best_nll)) {
      throw NumericError("gp fit: every hyperparameter start failed");
    }
  }

  ExactGp model;
  model.X_ = X;
  model.y_ = y;
  model.cache_ = cache;
  model.kernel_ = layout.kernel(best_eta);
  model.noise_ = layout.noise(best_eta);
  model.factorize();
  return model;
}

ExactGp ExactGp::with_hyperparameters(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                      const KernelSpec& kernel, double mean_constant,
                                      double noise_std) {
  if (X.rows() != y.size() || X.rows() < 1) {
    throw DomainError("gp: invalid training data");
  }
  kernel.validate(X.cols());
  if (!(noise_std >= 0.0)) {
    throw DomainError("gp: noise must be non-negative");
  }
  ExactGp model;
  model.X_ = std::make_shared<const Eigen::MatrixXd>(X);
  model.y_ = y;
  model.cache_ = std::make_shared<const GramCache>(X);
  model.kernel_ = kernel;
  model.noise_ = std::max(noise_std, kNoiseFloor);

  const Eigen::Index n = y.size();
  const double s2 = kernel.output_scale * kernel.output_scale;
  Eigen::MatrixXd ky = s2 * correlation_from_cache(kernel, *model.cache_);
  ky.diagonal().array() += model.noise_ * model.noise_;
  model.llt_ = robust_llt(ky);
  model.mean_ = mean_constant;
  const Eigen::VectorXd residual = y - mean_constant * Eigen::VectorXd::Ones(n);
  model.alpha_ = model.llt_.solve(residual);
  const double log_det = 2.0 * model.llt_.matrixLLT().diagonal().array().log().sum();
  model.lml_ = -0.5 * residual.dot(model.alpha_) - 0.5 * log_det - 0.5 * n * kLog2Pi;
  return model;
}

void ExactGp::factorize() {
  MarginalState state;
  const HyperLayout layout{kernel_.family, X_->cols()};
  Eigen::VectorXd eta(layout.size());
  eta.head(layout.n_lengthscales()) = kernel_.lengthscales.array().log();
  eta[layout.n_lengthscales()] = std::log(kernel_.output_scale);
  eta[layout.n_lengthscales() + 1] = std::log(noise_);
  negative_lml(layout, eta, *cache_, y_, nullptr, &state);
  llt_ = std::move(state.llt);
  alpha_ = std::move(state.alpha);
  mean_ = state.mean;
  lml_ = state.lml;
}

Prediction ExactGp::predict(const Eigen::VectorXd& x_star) const {
  if (x_star.size() != X_->cols()) {
    throw DomainError("gp predict: query dimension mismatch");
  }
  const Eigen::VectorXd k_star = kernel_cross(kernel_, *X_, x_star);
  const double mean = mean_ + k_star.dot(alpha_);
  const double prior_var = kernel_.output_scale * kernel_.output_scale;
  double variance = prior_var - k_star.dot(llt_.solve(k_star));
  if (variance < -1e-8) {
    warn("gp predict: clamped negative variance " + std::to_string(variance));
  }
  return {mean, std::max(variance, 0.0)};
}

Eigen::VectorXd ExactGp::hyperparameters_log() const {
  const HyperLayout layout{kernel_.family, X_->cols()};
  Eigen::VectorXd eta(layout.size());
  eta.head(layout.n_lengthscales()) = kernel_.lengthscales.array().log();
  eta[layout.n_lengthscales()] = std::log(kernel_.output_scale);
  eta[layout.n_lengthscales() + 1] = std::log(noise_);
  return eta;
}

// ---------------------------------------------------------------------------
// Local GP
// ---------------------------------------------------------------------------

std::vector<Eigen::Index> knn_indices(const Eigen::MatrixXd& X, const Eigen::VectorXd& x,
                                      int k) {
  const Eigen::Index n = X.rows();
  if (k < 1 || k > n) {
    throw DomainError("knn: neighbour count " + std::to_string(k) +
                      " outside [1, " + std::to_string(n) + "]");
  }
  const Eigen::VectorXd sq =
      (X.rowwise() - x.transpose()).rowwise().squaredNorm();
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  const auto closer = [&](Eigen::Index a, Eigen::Index b) {
    if (sq[a] != sq[b]) return sq[a] < sq[b];
    return a < b;  // ties broken by lower training index
  };
  std::nth_element(idx.begin(), idx.begin() + (k - 1), idx.end(), closer);
  idx.resize(static_cast<std::size_t>(k));
  std::sort(idx.begin(), idx.end(), closer);
  return idx;
}

Neighborhood::Neighborhood(const Eigen::MatrixXd& source, std::vector<Eigen::Index> indices)
    : source_(&source), indices_(std::move(indices)) {}

const std::shared_ptr<const Eigen::MatrixXd>& Neighborhood::inputs() const {
  if (!inputs_) {
    Eigen::MatrixXd sub(static_cast<Eigen::Index>(indices_.size()), source_->cols());
    for (std::size_t i = 0; i < indices_.size(); ++i) {
      sub.row(static_cast<Eigen::Index>(i)) = source_->row(indices_[i]);
    }
    inputs_ = std::make_shared<const Eigen::MatrixXd>(std::move(sub));
  }
  return inputs_;
}

const std::shared_ptr<const GramCache>& Neighborhood::cache() const {
  if (!cache_) {
    cache_ = std::make_shared<const GramCache>(*inputs());
  }
  return cache_;
}

Neighborhood make_neighborhood(const Eigen::MatrixXd& X, const Eigen::VectorXd& x_star,
                               int k) {
  return Neighborhood(X, knn_indices(X, x_star, k));
}

Prediction local_gp_predict(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                            const Eigen::VectorXd& x_star, const LocalGpConfig& config) {
  if (X.rows() != y.size()) {
    throw DomainError("local gp: input/output row mismatch");
  }
  const Neighborhood nb = make_neighborhood(X, x_star, config.neighbor_count);
  Eigen::VectorXd y_local(static_cast<Eigen::Index>(nb.indices().size()));
  for (std::size_t i = 0; i < nb.indices().size(); ++i) {
    y_local[static_cast<Eigen::Index>(i)] = y[nb.indices()[i]];
  }
  const ExactGp model = ExactGp::fit_cached(
      nb.inputs(), y_local, KernelFamily::ard_squared_exponential, config.fit, nb.cache());
  return model.predict(x_star);
}

LocalGp::LocalGp(std::shared_ptr<const Eigen::MatrixXd> X, Eigen::VectorXd y,
                 LocalGpConfig config)
    : X_(std::move(X)), y_(std::move(y)), config_(std::move(config)) {
  if (X_->rows() != y_.size()) {
    throw DomainError("local gp: input/output row mismatch");
  }
  if (config_.neighbor_count > X_->rows()) {
    throw DomainError("local gp: neighbour count exceeds training size");
  }
}

Prediction LocalGp::predict(const Eigen::VectorXd& x_star) {
  return predict_in(x_star, make_neighborhood(*X_, x_star, config_.neighbor_count));
}

Prediction LocalGp::predict_in(const Eigen::VectorXd& x_star,
                               const Neighborhood& neighborhood) {
  // Unchanged neighbour set: the deterministic refit would land on the
  // cached model, so reuse its factorization outright.
  if (config_.warm_start && last_model_ && neighborhood.indices() == last_indices_) {
    return last_model_->predict(x_star);
  }

  Eigen::VectorXd y_local(static_cast<Eigen::Index>(neighborhood.indices().size()));
  for (std::size_t i = 0; i < neighborhood.indices().size(); ++i) {
    y_local[static_cast<Eigen::Index>(i)] = y_[neighborhood.indices()[i]];
  }
  GpFitOptions options = config_.fit;
  if (config_.warm_start && last_hypers_) {
    options.warm_start = last_hypers_;
    // Along an optimization trajectory the marginal-likelihood optimum
    // drifts slowly; a short refit tracks it and the next query continues
    // from wherever this one stopped.
    options.max_iterations = std::min(options.max_iterations, 12);
  }
  ExactGp model = ExactGp::fit_cached(neighborhood.inputs(), y_local,
                                      KernelFamily::ard_squared_exponential, options,
                                      neighborhood.cache());
  const Prediction prediction = model.predict(x_star);
  if (config_.warm_start) {
    last_hypers_ = model.hyperparameters_log();
    last_indices_ = neighborhood.indices();
    last_model_ = std::move(model);
  }
  return prediction;
}

// ---------------------------------------------------------------------------
// Truncated eigendecomposition
// ---------------------------------------------------------------------------

namespace {

TruncatedEig dense_truncated(const Eigen::MatrixXd& A, Eigen::Index k) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(A);
  if (solver.info() != Eigen::Success) {
    throw NumericError("dense eigendecomposition failed");
  }
  const Eigen::Index n = A.rows();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  const auto& values = solver.eigenvalues();
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return std::abs(values[a]) > std::abs(values[b]);
  });
  TruncatedEig result;
  result.values.resize(k);
  result.vectors.resize(n, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    result.values[i] = values[order[static_cast<std::size_t>(i)]];
    result.vectors.col(i) = solver.eigenvectors().col(order[static_cast<std::size_t>(i)]);
  }
  return result;
}

}  // namespace

TruncatedEig truncated_eigh(const Eigen::MatrixXd& A, Eigen::Index k, double residual_tol) {
  const Eigen::Index n = A.rows();
  if (A.cols() != n) {
    throw DomainError("truncated_eigh: matrix must be square");
  }
  if (k < 1 || k > n) {
    throw DomainError("truncated_eigh: rank outside [1, n]");
  }
  // Lanczos only pays off well below full rank.
  if (k * 2 >= n || n <= 64) {
    return dense_truncated(A, k);
  }

  const double scale = std::max(A.cwiseAbs().maxCoeff(), 1e-300);
  const Eigen::Index max_steps = std::min<Eigen::Index>(n, 10 * k);

  Eigen::MatrixXd basis(n, max_steps + 1);
  std::vector<double> alpha;
  std::vector<double> beta;

  // Deterministic, generically non-degenerate start vector.
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    v[i] = std::sin(static_cast<double>(i) + 1.0);
  }
  v.normalize();
  basis.col(0) = v;

  Eigen::Index m = 0;
  TruncatedEig result;
  while (m < max_steps) {
    Eigen::VectorXd w = A * basis.col(m);
    const double a = basis.col(m).dot(w);
    alpha.push_back(a);
    w -= a * basis.col(m);
    if (m > 0) {
      w -= beta[static_cast<std::size_t>(m - 1)] * basis.col(m - 1);
    }
    // Full reorthogonalization for numerical stability.
    w -= basis.leftCols(m + 1) * (basis.leftCols(m + 1).transpose() * w);
    double b = w.norm();
    if (b < 1e-12 * scale) {
      // Krylov space exhausted; restart with a fresh direction.
      Eigen::VectorXd fresh(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        fresh[i] = std::sin((static_cast<double>(i) + 2.0) * (static_cast<double>(m) + 2.0));
      }
      fresh -= basis.leftCols(m + 1) * (basis.leftCols(m + 1).transpose() * fresh);
      b = fresh.norm();
      if (b < 1e-12) {
        break;  // no independent direction remains
      }
      w = fresh;
    }
    beta.push_back(b);
    basis.col(m + 1) = w / b;
    ++m;

    if (m >= k + 2 || m == max_steps) {
      // Ritz pairs of the tridiagonal section.
      Eigen::MatrixXd tri = Eigen::MatrixXd::Zero(m, m);
      for (Eigen::Index i = 0; i < m; ++i) {
        tri(i, i) = alpha[static_cast<std::size_t>(i)];
        if (i + 1 < m) {
          tri(i, i + 1) = tri(i + 1, i) = beta[static_cast<std::size_t>(i)];
        }
      }
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> tri_solver(tri);
      std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
      std::iota(order.begin(), order.end(), 0);
      const auto& tv = tri_solver.eigenvalues();
      std::sort(order.begin(), order.end(), [&](Eigen::Index a2, Eigen::Index b2) {
        return std::abs(tv[a2]) > std::abs(tv[b2]);
      });
      double max_residual = 0.0;
      const double edge = beta.back();
      for (Eigen::Index i = 0; i < k; ++i) {
        const double bottom =
            std::abs(tri_solver.eigenvectors()(m - 1, order[static_cast<std::size_t>(i)]));
        max_residual = std::max(max_residual, edge * bottom);
      }
      if (max_residual <= residual_tol * scale || m == max_steps) {
        result.values.resize(k);
        result.vectors.resize(n, k);
        for (Eigen::Index i = 0; i < k; ++i) {
          const Eigen::Index j = order[static_cast<std::size_t>(i)];
          result.values[i] = tv[j];
          result.vectors.col(i) = basis.leftCols(m) * tri_solver.eigenvectors().col(j);
        }
        return result;
      }
    }
  }
  // Breakdown before convergence: fall back to the dense path.
  return dense_truncated(A, k);
}

// ---------------------------------------------------------------------------
// Low-rank GP
// ---------------------------------------------------------------------------

namespace {

double max_pairwise_distance(const Eigen::MatrixXd& X) {
  double best = 0.0;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < X.rows(); ++j) {
      best = std::max(best, (X.row(i) - X.row(j)).squaredNorm());
    }
  }
  return std::sqrt(best);
}

KernelSpec matern_unit(double lengthscale) {
  KernelSpec spec;
  spec.family = KernelFamily::matern32;
  spec.output_scale = 1.0;
  spec.lengthscales = Eigen::VectorXd::Constant(1, lengthscale);
  return spec;
}

struct EvidenceWorkspace {
  // Hyperparameter-independent sufficient statistics.
  Eigen::MatrixXd gram;      // Phi^T Phi
  Eigen::VectorXd phi_y;     // Phi^T y
  Eigen::VectorXd phi_ones;  // Phi^T 1
  double yy = 0.0;
  double y1 = 0.0;
  Eigen::Index n = 0;
  std::vector<Eigen::Index> block_offsets;  // size blocks+1
};

// Negative evidence of the weight-space model y = beta + Phi w + eps with
// blockwise prior w_b ~ N(0, s_b^2 I); beta profiled by GLS. eta holds
// [log s_1, (log s_2,) log sigma].
double negative_evidence(const EvidenceWorkspace& ws, const Eigen::VectorXd& eta,
                         Eigen::VectorXd* grad, double* beta_out,
                         Eigen::LLT<Eigen::MatrixXd>* llt_out) {
  const Eigen::Index blocks = static_cast<Eigen::Index>(ws.block_offsets.size()) - 1;
  const Eigen::Index m = ws.gram.rows();
  const double sigma = std::max(std::exp(eta[blocks]), kNoiseFloor);
  const double sigma2 = sigma * sigma;

  Eigen::MatrixXd M = ws.gram;
  double log_prior = 0.0;
  for (Eigen::Index b = 0; b < blocks; ++b) {
    const double s2 = std::exp(2.0 * eta[b]);
    const Eigen::Index begin = ws.block_offsets[static_cast<std::size_t>(b)];
    const Eigen::Index end = ws.block_offsets[static_cast<std::size_t>(b + 1)];
    M.diagonal().segment(begin, end - begin).array() += sigma2 / s2;
    log_prior += static_cast<double>(end - begin) * std::log(s2);
  }
  const Eigen::LLT<Eigen::MatrixXd> llt = robust_llt(M);

  const Eigen::VectorXd m_inv_py = llt.solve(ws.phi_y);
  const Eigen::VectorXd m_inv_p1 = llt.solve(ws.phi_ones);

  const double one_c_y = (ws.y1 - ws.phi_ones.dot(m_inv_py)) / sigma2;
  const double one_c_one =
      (static_cast<double>(ws.n) - ws.phi_ones.dot(m_inv_p1)) / sigma2;
  const double beta = one_c_one > 0.0 ? one_c_y / one_c_one : 0.0;

  const Eigen::VectorXd u = ws.phi_y - beta * ws.phi_ones;  // Phi^T r
  const Eigen::VectorXd t = m_inv_py - beta * m_inv_p1;     // M^-1 u
  const double rr = ws.yy - 2.0 * beta * ws.y1 + beta * beta * static_cast<double>(ws.n);
  const double quad = (rr - u.dot(t)) / sigma2;

  const double log_det_m = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  const double log_det =
      (static_cast<double>(ws.n) - static_cast<double>(m)) * std::log(sigma2) +
      log_prior + log_det_m;

  const double nll = 0.5 * (quad + log_det + static_cast<double>(ws.n) * kLog2Pi);

  if (grad) {
    grad->resize(blocks + 1);
    // gamma = C^-1 r; Phi^T gamma = (u - G t) / sigma^2.
    const Eigen::VectorXd phi_gamma = (u - ws.gram * t) / sigma2;
    const double gamma_sq = (rr - 2.0 * t.dot(u) + t.dot(ws.gram * t)) / (sigma2 * sigma2);
    const Eigen::MatrixXd S = llt.solve(ws.gram);  // M^-1 G
    const double tr_s = S.trace();
    for (Eigen::Index b = 0; b < blocks; ++b) {
      const double s2 = std::exp(2.0 * eta[b]);
      const Eigen::Index begin = ws.block_offsets[static_cast<std::size_t>(b)];
      const Eigen::Index len = ws.block_offsets[static_cast<std::size_t>(b + 1)] - begin;
      const double quad_term = phi_gamma.segment(begin, len).squaredNorm();
      const double tr_gg =
          (ws.gram.middleCols(begin, len).array() * S.middleCols(begin, len).array()).sum();
      const double tr_cb = (ws.gram.diagonal().segment(begin, len).sum() - tr_gg) / sigma2;
      (*grad)[b] = 0.5 * (-2.0 * s2 * quad_term + 2.0 * s2 * tr_cb);
    }
    const double tr_c = (static_cast<double>(ws.n) - tr_s) / sigma2;
    (*grad)[blocks] = 0.5 * (-2.0 * sigma2 * gamma_sq + 2.0 * sigma2 * tr_c);
  }
  if (beta_out) *beta_out = beta;
  if (llt_out) *llt_out = llt;
  return nll;
}

}  // namespace

Eigen::Index LowRankGp::rank() const {
  Eigen::Index total = 0;
  for (const Block& b : blocks_) {
    total += b.eigenvalues.size();
  }
  return total;
}

Eigen::VectorXd LowRankGp::features(const Eigen::VectorXd& x_star) const {
  Eigen::VectorXd phi(rank());
  Eigen::Index offset = 0;
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    const Block& block = blocks_[b];
    Eigen::VectorXd x = x_star;
    if (b == 1) {
      x = x_star.cwiseInverse();
    }
    const Eigen::VectorXd cross =
        kernel_cross(matern_unit(block.lengthscale), block.inputs, x);
    phi.segment(offset, block.eigenvalues.size()) = block.basis.transpose() * cross;
    offset += block.eigenvalues.size();
  }
  return phi;
}

LowRankGp LowRankGp::fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                         const LowRankConfig& config) {
  const Eigen::Index n = X.rows();
  if (n != y.size() || n < 2) {
    throw DomainError("low-rank gp: invalid training data");
  }
  const Eigen::Index n_r = std::min(config.subsample_size, n);
  if (config.rank < 1 || config.rank > config.subsample_size) {
    throw DomainError("low-rank gp: rank must lie in [1, subsample size]");
  }
  const Eigen::Index k = std::min(config.rank, n_r);

  LowRankGp model;
  // Random subsample (identity when the whole set is kept).
  model.subsample_.resize(static_cast<std::size_t>(n));
  std::iota(model.subsample_.begin(), model.subsample_.end(), 0);
  if (n_r < n) {
    Rng rng(config.seed * 0x9e3779b97f4a7c15ULL + 0x853c49e6748fea9bULL);
    for (Eigen::Index i = 0; i < n_r; ++i) {
      const Eigen::Index j =
          i + static_cast<Eigen::Index>(rng.next_u64() % static_cast<std::uint64_t>(n - i));
      std::swap(model.subsample_[static_cast<std::size_t>(i)],
                model.subsample_[static_cast<std::size_t>(j)]);
    }
  }
  model.subsample_.resize(static_cast<std::size_t>(n_r));

  Eigen::MatrixXd Z(n_r, X.cols());
  for (Eigen::Index i = 0; i < n_r; ++i) {
    Z.row(i) = X.row(model.subsample_[static_cast<std::size_t>(i)]);
  }

  const int n_blocks = config.reciprocal_block ? 2 : 1;
  for (int b = 0; b < n_blocks; ++b) {
    Block block;
    if (b == 0) {
      block.inputs = Z;
    } else {
      if ((X.array().abs() < 1e-12).any()) {
        throw DomainError("low-rank gp: reciprocal block requires non-zero inputs");
      }
      block.inputs = Z.cwiseInverse();
    }
    block.lengthscale =
        config.lengthscale.value_or(max_pairwise_distance(block.inputs));
    if (!(block.lengthscale > 0.0)) {
      throw DomainError("low-rank gp: degenerate lengthscale (coincident inputs?)");
    }
    const Eigen::MatrixXd K = kernel_matrix(matern_unit(block.lengthscale), block.inputs);
    TruncatedEig eig = truncated_eigh(K, k);

    // Drop non-positive / negligible eigenvalues: the basis needs d^(-1/2).
    const double floor = 1e-12 * std::abs(eig.values[0]);
    Eigen::Index kept = 0;
    while (kept < eig.values.size() && eig.values[kept] > floor) {
      ++kept;
    }
    if (kept == 0) {
      throw NumericError("low-rank gp: kernel matrix has no usable eigenvalues");
    }
    if (kept < k) {
      warn("low-rank gp: rank reduced from " + std::to_string(k) + " to " +
           std::to_string(kept) + " (eigenvalue floor)");
    }
    block.eigenvalues = eig.values.head(kept);
    block.basis = eig.vectors.leftCols(kept) *
                  block.eigenvalues.array().rsqrt().matrix().asDiagonal();
    block.output_scale = 1.0;
    model.blocks_.push_back(std::move(block));
  }

  // Feature matrix over the full training set.
  const Eigen::Index m = model.rank();
  Eigen::MatrixXd phi(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    phi.row(i) = model.features(X.row(i).transpose()).transpose();
  }

  EvidenceWorkspace ws;
  ws.gram = phi.transpose() * phi;
  ws.phi_y = phi.transpose() * y;
  ws.phi_ones = phi.transpose() * Eigen::VectorXd::Ones(n);
  ws.yy = y.squaredNorm();
  ws.y1 = y.sum();
  ws.n = n;
  ws.block_offsets.push_back(0);
  for (const Block& block : model.blocks_) {
    ws.block_offsets.push_back(ws.block_offsets.back() + block.eigenvalues.size());
  }

  const Eigen::Index blocks = static_cast<Eigen::Index>(model.blocks_.size());
  const double y_std = std::max(std::sqrt((y.array() - y.mean()).square().mean()), 1e-8);

  Eigen::VectorXd eta(blocks + 1);
  const bool fixed = config.fixed_output_scale && config.fixed_noise && config.fixed_mean;
  if (fixed) {
    for (Eigen::Index b = 0; b < blocks; ++b) {
      eta[b] = std::log(*config.fixed_output_scale);
    }
    eta[blocks] = std::log(std::max(*config.fixed_noise, kNoiseFloor));
  } else {
    for (Eigen::Index b = 0; b < blocks; ++b) {
      eta[b] = std::log(y_std);
    }
    eta[blocks] = std::log(std::max(0.01 * y_std, kNoiseFloor));
    if (config.optimize) {
      optim::Box bounds;
      bounds.lo = Eigen::VectorXd::Constant(blocks + 1, std::log(y_std) - 12.0);
      bounds.hi = Eigen::VectorXd::Constant(blocks + 1, std::log(y_std) + 8.0);
      bounds.lo[blocks] = std::log(kNoiseFloor);
      bounds.hi[blocks] = std::log(std::max(10.0 * y_std, 1e-6));
      optim::SolverOptions solver;
      solver.max_iterations = config.max_iterations;
      solver.grad_tolerance = 1e-5;
      const optim::SolverResult run = optim::minimize_lbfgs(
          [&](const Eigen::VectorXd& e, Eigen::VectorXd* g) {
            return negative_evidence(ws, e, g, nullptr, nullptr);
          },
          eta, &bounds, solver);
      eta = run.x;
    }
  }

  double beta = 0.0;
  Eigen::LLT<Eigen::MatrixXd> llt;
  negative_evidence(ws, eta, nullptr, &beta, &llt);
  if (fixed) {
    beta = *config.fixed_mean;
  }

  for (Eigen::Index b = 0; b < blocks; ++b) {
    model.blocks_[static_cast<std::size_t>(b)].output_scale = std::exp(eta[b]);
  }
  model.noise_ = std::max(std::exp(eta[blocks]), kNoiseFloor);
  model.beta_ = beta;
  // Recompute the posterior at the (possibly overridden) mean.
  const Eigen::VectorXd u = ws.phi_y - beta * ws.phi_ones;
  model.weights_ = llt.solve(u);
  model.posterior_llt_ = llt;
  model.posterior_valid_ = true;
  return model;
}

double LowRankGp::predict_mean(const Eigen::VectorXd& x_star) const {
  if (blocks_.empty() || x_star.size() != blocks_[0].inputs.cols()) {
    throw DomainError("low-rank gp: query dimension mismatch");
  }
  return beta_ + features(x_star).dot(weights_);
}

Prediction LowRankGp::predict(const Eigen::VectorXd& x_star) const {
  if (blocks_.empty() || x_star.size() != blocks_[0].inputs.cols()) {
    throw DomainError("low-rank gp: query dimension mismatch");
  }
  const Eigen::VectorXd phi = features(x_star);
  const double mean = beta_ + phi.dot(weights_);
  if (!posterior_valid_) {
    throw NumericError(
        "low-rank gp: posterior factor unavailable (restored model); use predict_mean");
  }
  const double variance = noise_ * noise_ * phi.dot(posterior_llt_.solve(phi));
  return {mean, std::max(variance, 0.0)};
}

LowRankGp LowRankGp::restore(std::vector<Block> blocks, Eigen::VectorXd weights, double beta,
                             double noise, std::vector<Eigen::Index> subsample) {
  LowRankGp model;
  model.blocks_ = std::move(blocks);
  model.weights_ = std::move(weights);
  model.beta_ = beta;
  model.noise_ = noise;
  model.subsample_ = std::move(subsample);
  model.posterior_valid_ = false;
  if (model.blocks_.empty() || model.weights_.size() != model.rank()) {
    throw DataError("low-rank gp restore: inconsistent state");
  }
  return model;
}

}  // namespace myofit::gp
