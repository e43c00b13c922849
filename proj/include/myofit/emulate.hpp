/*!
 * This file is part of myofit, a library for emulation-based parameter
 * inference in anisotropic hyperelastic myocardium models.
 *
 * Licensed under the Apache License Version 2.0. See LICENSE file in the
 * project root for license information.
 */
#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "myofit/forward.hpp"
#include "myofit/gp.hpp"

namespace myofit::emulate {

enum class LossFamily { euclidean, mahalanobis };

/// (1 / 2 sigma^2) ||yhat - y0||^2 (the additive constant is dropped).
double euclidean_loss(const Eigen::VectorXd& yhat, const Eigen::VectorXd& y0,
                      double sigma = 1.0);

/// Residual loss specification with a cached covariance factorization for
/// the Mahalanobis family. Copies are cheap and share the factorization.
class LossSpec {
 public:
  static LossSpec euclidean(double sigma = 1.0);
  /// The covariance is fixed once factorized (jitter escalation applies).
  static LossSpec mahalanobis(const Eigen::MatrixXd& covariance);

  double operator()(const Eigen::VectorXd& yhat, const Eigen::VectorXd& y0) const;

  LossFamily family() const { return family_; }
  double sigma() const { return sigma_; }

 private:
  LossFamily family_ = LossFamily::euclidean;
  double sigma_ = 1.0;
  std::shared_ptr<const Eigen::LLT<Eigen::MatrixXd>> factor_;
  Eigen::Index dim_ = 0;
};

/// 1/2 (yhat - y0)^T Sigma^-1 (yhat - y0), solved through the cached
/// factorization (never an explicit inverse).
double mahalanobis_loss(const Eigen::VectorXd& yhat, const Eigen::VectorXd& y0,
                        const LossSpec& spec);

/// Sample covariance of the training outputs with relative jitter added
/// until the matrix factorizes.
Eigen::MatrixXd compute_output_covariance(const forward::TrainingSet& training);

enum class Interpolator { local, lowrank };

/// Shared knobs for both interpolation methods.
struct EmulatorConfig {
  Interpolator interpolator = Interpolator::local;
  gp::LocalGpConfig local;
  Eigen::Index lowrank_subsample = 2000;  // n_r
  Eigen::Index lowrank_rank_output = 2000;
  Eigen::Index lowrank_rank_loss = 1000;
  std::uint64_t seed = 0;
};

/// One scalar surrogate per simulator output, all trained on the same
/// design (local surrogates are configured lazily and fitted per query).
class OutputEmulator {
 public:
  static OutputEmulator fit(std::shared_ptr<const forward::TrainingSet> training,
                            const EmulatorConfig& config);

  Eigen::Index output_dim() const;

  /// Componentwise surrogate means and variances at theta.
  std::pair<Eigen::VectorXd, Eigen::VectorXd> emulate(const Eigen::VectorXd& theta) const;
  Eigen::VectorXd emulate_mean(const Eigen::VectorXd& theta) const;

  /// Loss between the emulated mean vector and the observed data.
  double surrogate_loss(const Eigen::VectorXd& theta, const Eigen::VectorXd& y0,
                        const LossSpec& loss) const;

  const forward::TrainingSet& training() const { return *training_; }
  const EmulatorConfig& config() const { return config_; }
  const std::vector<gp::LowRankGp>& lowrank_models() const { return lowrank_; }

  /// Restore a low-rank output emulator from persisted per-output models.
  static OutputEmulator restore_lowrank(std::shared_ptr<const forward::TrainingSet> training,
                                        const EmulatorConfig& config,
                                        std::vector<gp::LowRankGp> models);

 private:
  std::shared_ptr<const forward::TrainingSet> training_;
  EmulatorConfig config_;
  mutable std::vector<gp::LocalGp> local_;  // per-query refits mutate warm state
  std::vector<gp::LowRankGp> lowrank_;
  mutable std::unique_ptr<std::mutex> mutex_ = std::make_unique<std::mutex>();
};

/// Single scalar surrogate of the loss surface against a fixed observation.
class LossEmulator {
 public:
  static LossEmulator fit(std::shared_ptr<const forward::TrainingSet> training,
                          const Eigen::VectorXd& y0, const LossSpec& loss,
                          const EmulatorConfig& config);

  /// Posterior mean of the emulated loss at theta.
  double predict_mean(const Eigen::VectorXd& theta) const;
  gp::Prediction predict(const Eigen::VectorXd& theta) const;

  const Eigen::VectorXd& training_losses() const { return losses_; }
  const Eigen::VectorXd& observed() const { return y0_; }

 private:
  std::shared_ptr<const forward::TrainingSet> training_;
  EmulatorConfig config_;
  Eigen::VectorXd y0_;
  Eigen::VectorXd losses_;
  mutable std::optional<gp::LocalGp> local_;
  std::optional<gp::LowRankGp> lowrank_;
  mutable std::unique_ptr<std::mutex> mutex_ = std::make_unique<std::mutex>();
};

/// Observed-data file: header `y1,...,y25` plus one row.
Eigen::VectorXd load_observed(const std::filesystem::path& path);
void save_observed(const std::filesystem::path& path, const Eigen::VectorXd& y0);

}  // namespace myofit::emulate
