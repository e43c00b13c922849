/*!
 * This file is part of myofit, a library for emulation-based parameter
 * inference in anisotropic hyperelastic myocardium models.
 *
 * Licensed under the Apache License Version 2.0. See LICENSE file in the
 * project root for license information.
 */
#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

namespace myofit::gp {

enum class KernelFamily { ard_squared_exponential, matern32 };

/// Stationary kernel with an output scale and either one lengthscale per
/// input dimension (ARD squared exponential) or a single isotropic
/// lengthscale (Matern 3/2).
struct KernelSpec {
  KernelFamily family = KernelFamily::ard_squared_exponential;
  double output_scale = 1.0;       // s, so the prior variance is s^2
  Eigen::VectorXd lengthscales;    // size d (ARD) or 1 (isotropic)

  void validate(Eigen::Index input_dim) const;
};

double kernel_eval(const KernelSpec& spec, const Eigen::VectorXd& x,
                   const Eigen::VectorXd& y);

/// Gram matrix K(X, X) (rows of X are points).
Eigen::MatrixXd kernel_matrix(const KernelSpec& spec, const Eigen::MatrixXd& X);

/// Cross covariances k(X, x_star).
Eigen::VectorXd kernel_cross(const KernelSpec& spec, const Eigen::MatrixXd& X,
                             const Eigen::VectorXd& x_star);

struct Prediction {
  double mean;
  double variance;
};

/// Log marginal likelihood of (X, y) at log-space hyperparameters
/// [log lengthscales..., log output-scale, log noise], with the constant
/// mean profiled in closed form. Optionally fills the analytic gradient.
double log_marginal_likelihood(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                               KernelFamily family, const Eigen::VectorXd& eta_log,
                               Eigen::VectorXd* gradient = nullptr);

/// Shared per-dimension squared-difference matrices for one input set;
/// building these once amortizes kernel evaluations across outputs and
/// hyperparameter iterations.
struct GramCache {
  explicit GramCache(const Eigen::MatrixXd& X);
  Eigen::Index size() const { return sqdiff.empty() ? 0 : sqdiff[0].rows(); }
  std::vector<Eigen::MatrixXd> sqdiff;  // one n x n matrix per input dimension
  Eigen::MatrixXd sqdist;               // sum over dimensions
};

struct GpFitOptions {
  double init_noise = 1e-2;  // initial noise standard deviation
  int restarts = 3;          // optimizer runs (first from the canonical init)
  int max_iterations = 60;
  double grad_tolerance = 1e-5;
  double grad_tolerance_rel = 0.0;  // extra tolerance scaled by |log evidence|
  int max_line_search = 14;
  std::uint64_t seed = 0;    // perturbed-restart generator seed
  bool optimize = true;      // false keeps the initial hyperparameters
  /// Warm start: log-space hyperparameters from a previous fit. When set,
  /// a single optimizer run starts there (no perturbed restarts).
  std::optional<Eigen::VectorXd> warm_start;
};

/// Exact Gaussian-process regressor with constant mean, Gaussian noise and
/// a cached Cholesky factorization of K + sigma^2 I. Hyperparameters are
/// fitted by maximizing the log marginal likelihood with a quasi-Newton
/// method in log space; the mean constant is profiled in closed form.
class ExactGp {
 public:
  /// Fits hyperparameters on (X, y). Exact duplicate inputs are collapsed
  /// (outputs averaged) with a warning.
  static ExactGp fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                     KernelFamily family, const GpFitOptions& options = {});

  /// Same, reusing a precomputed GramCache for X (no duplicate collapsing).
  static ExactGp fit_cached(const std::shared_ptr<const Eigen::MatrixXd>& X,
                            const Eigen::VectorXd& y, KernelFamily family,
                            const GpFitOptions& options,
                            const std::shared_ptr<const GramCache>& cache);

  /// Fixed-hyperparameter model (no optimization).
  static ExactGp with_hyperparameters(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                      const KernelSpec& kernel, double mean_constant,
                                      double noise_std);

  Prediction predict(const Eigen::VectorXd& x_star) const;

  const KernelSpec& kernel() const { return kernel_; }
  double mean_constant() const { return mean_; }
  double noise_std() const { return noise_; }
  double log_marginal_likelihood() const { return lml_; }
  Eigen::Index training_size() const { return X_->rows(); }

  /// Log-space hyperparameter vector, usable as a warm start.
  Eigen::VectorXd hyperparameters_log() const;

 private:
  ExactGp() = default;
  void factorize();

  std::shared_ptr<const Eigen::MatrixXd> X_;
  Eigen::VectorXd y_;
  std::shared_ptr<const GramCache> cache_;
  KernelSpec kernel_;
  double mean_ = 0.0;
  double noise_ = 1e-2;
  double lml_ = 0.0;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::VectorXd alpha_;  // (K + sigma^2 I)^-1 (y - mean)
};

/// Local GP configuration: neighbour count and the per-query refit policy.
struct LocalGpConfig {
  /// Refit tolerances looser than the exact-GP defaults: a refit happens at
  /// every query, and hyperparameters an order of magnitude short of the
  /// marginal-likelihood optimum change predictions negligibly.
  static GpFitOptions refit_defaults() {
    GpFitOptions options;
    options.max_iterations = 50;
    options.grad_tolerance = 3e-3;
    options.grad_tolerance_rel = 1e-4;
    options.max_line_search = 8;
    return options;
  }

  int neighbor_count = 100;
  bool warm_start = true;  // reuse the previous query's optimum as the init
  GpFitOptions fit = refit_defaults();
};

/// Indices of the k nearest rows of X to `x` in Euclidean distance, ties
/// broken by lower row index. Deterministic.
std::vector<Eigen::Index> knn_indices(const Eigen::MatrixXd& X, const Eigen::VectorXd& x,
                                      int k);

/// Gathered nearest-neighbour subset of a design, shareable across the
/// per-output models of a multi-output emulator. The gathered inputs and
/// distance cache are materialized on first use: consumers that recognize
/// the index set (and reuse a cached fit) never pay for them.
class Neighborhood {
 public:
  Neighborhood(const Eigen::MatrixXd& source, std::vector<Eigen::Index> indices);

  const std::vector<Eigen::Index>& indices() const { return indices_; }
  const std::shared_ptr<const Eigen::MatrixXd>& inputs() const;
  const std::shared_ptr<const GramCache>& cache() const;

 private:
  const Eigen::MatrixXd* source_;
  std::vector<Eigen::Index> indices_;
  mutable std::shared_ptr<const Eigen::MatrixXd> inputs_;
  mutable std::shared_ptr<const GramCache> cache_;
};

Neighborhood make_neighborhood(const Eigen::MatrixXd& X, const Eigen::VectorXd& x_star,
                               int k);

/// One-shot local GP prediction (select K nearest neighbours, fit a fresh
/// GP on the subset, predict). Stateless.
Prediction local_gp_predict(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                            const Eigen::VectorXd& x_star, const LocalGpConfig& config = {});

/// Stateful local-GP surrogate bound to one output column. Each query
/// refits the local model; with warm_start the previous optimum seeds the
/// refit, which amortizes cost along optimization trajectories. When the
/// neighbour set is unchanged from the previous query the cached fit is
/// reused outright -- the refit is deterministic, so this is identical to
/// refitting.
class LocalGp {
 public:
  LocalGp(std::shared_ptr<const Eigen::MatrixXd> X, Eigen::VectorXd y,
          LocalGpConfig config);

  Prediction predict(const Eigen::VectorXd& x_star);

  /// Prediction with an externally built neighbourhood (shared across the
  /// outputs of a multi-output emulator).
  Prediction predict_in(const Eigen::VectorXd& x_star, const Neighborhood& neighborhood);

  const LocalGpConfig& config() const { return config_; }

 private:
  std::shared_ptr<const Eigen::MatrixXd> X_;
  Eigen::VectorXd y_;
  LocalGpConfig config_;
  std::optional<Eigen::VectorXd> last_hypers_;
  std::vector<Eigen::Index> last_indices_;
  std::optional<ExactGp> last_model_;
};

/// Truncated symmetric eigendecomposition: the k eigenpairs of largest
/// magnitude, ordered |d1| >= |d2| >= ... Uses Lanczos iteration with full
/// reorthogonalization, or the dense solver when k is close to n.
struct TruncatedEig {
  Eigen::VectorXd values;   // size k
  Eigen::MatrixXd vectors;  // n x k, orthonormal columns
};

TruncatedEig truncated_eigh(const Eigen::MatrixXd& A, Eigen::Index k,
                            double residual_tol = 1e-10);

struct LowRankConfig {
  Eigen::Index subsample_size = 2000;  // n_r
  Eigen::Index rank = 2000;            // k
  bool reciprocal_block = true;        // add the basis block on tau = 1/theta
  std::uint64_t seed = 0;
  int max_iterations = 100;
  bool optimize = true;
  /// Fixed hyperparameters (skip evidence maximization) -- used by the
  /// exact-GP equivalence checks.
  std::optional<double> fixed_output_scale;
  std::optional<double> fixed_noise;
  std::optional<double> fixed_mean;
  /// Kernel lengthscale override; the default is the max pairwise distance
  /// of the block's inputs.
  std::optional<double> lengthscale;
};

/// Low-rank GP: Matern-3/2 kernel on a random n_r subsample, truncated
/// rank-k eigenbasis per block (inputs theta, and optionally tau = 1/theta),
/// intercept plus basis weights fitted by evidence maximization.
class LowRankGp {
 public:
  static LowRankGp fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                       const LowRankConfig& config = {});

  Prediction predict(const Eigen::VectorXd& x_star) const;
  double predict_mean(const Eigen::VectorXd& x_star) const;

  double mean_constant() const { return beta_; }
  double noise_std() const { return noise_; }
  Eigen::Index rank() const;

  /// Persistence accessors.
  struct Block {
    Eigen::MatrixXd inputs;       // n_r x d subsample (already reciprocal for tau)
    double lengthscale;
    double output_scale;
    Eigen::VectorXd eigenvalues;  // retained, descending
    Eigen::MatrixXd basis;        // n_r x k_b : U_k D_k^{-1/2}
  };
  const std::vector<Block>& blocks() const { return blocks_; }
  const Eigen::VectorXd& weights() const { return weights_; }
  const std::vector<Eigen::Index>& subsample_indices() const { return subsample_; }

  /// Rebuilds a model from persisted state (mean prediction only unless the
  /// posterior factor is supplied).
  static LowRankGp restore(std::vector<Block> blocks, Eigen::VectorXd weights, double beta,
                           double noise, std::vector<Eigen::Index> subsample);

  bool has_posterior() const { return posterior_valid_; }

 private:
  LowRankGp() = default;
  Eigen::VectorXd features(const Eigen::VectorXd& x_star) const;

  std::vector<Block> blocks_;
  Eigen::VectorXd weights_;  // posterior mean of the basis weights
  double beta_ = 0.0;
  double noise_ = 0.0;
  std::vector<Eigen::Index> subsample_;
  Eigen::LLT<Eigen::MatrixXd> posterior_llt_;  // chol(sigma^2 A^-1 + Phi^T Phi)
  bool posterior_valid_ = false;
};

}  // namespace myofit::gp
