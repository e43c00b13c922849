/*!
 * This file is part of myofit, a library for emulation-based parameter
 * inference in anisotropic hyperelastic myocardium models.
 *
 * Licensed under the Apache License Version 2.0. See LICENSE file in the
 * project root for license information.
 */
#include "myofit/emulate.hpp"

#include <cmath>
#include <sstream>
#include <string>
#include <utility>

#include "myofit/errors.hpp"
#include "myofit/io.hpp"
#include "myofit/log.hpp"

namespace myofit::emulate {

double euclidean_loss(const Eigen::VectorXd& yhat, const Eigen::VectorXd& y0, double sigma) {
  if (yhat.size() != y0.size()) {
    throw DomainError("euclidean loss: vector lengths differ");
  }
  if (!(sigma > 0.0)) {
    throw DomainError("euclidean loss: sigma must be strictly positive");
  }
  return (yhat - y0).squaredNorm() / (2.0 * sigma * sigma);
}

LossSpec LossSpec::euclidean(double sigma) {
  if (!(sigma > 0.0)) {
    throw DomainError("euclidean loss: sigma must be strictly positive");
  }
  LossSpec spec;
  spec.family_ = LossFamily::euclidean;
  spec.sigma_ = sigma;
  return spec;
}

LossSpec LossSpec::mahalanobis(const Eigen::MatrixXd& covariance) {
  if (covariance.rows() != covariance.cols()) {
    throw DomainError("mahalanobis loss: covariance must be square");
  }
  LossSpec spec;
  spec.family_ = LossFamily::mahalanobis;
  spec.dim_ = covariance.rows();

  const Eigen::MatrixXd sym = 0.5 * (covariance + covariance.transpose());
  const double scale = std::max(sym.diagonal().mean(), 1e-300);
  double jitter = 0.0;
  for (int attempt = 0; attempt <= 6; ++attempt) {
    Eigen::MatrixXd work = sym;
    if (jitter > 0.0) {
      work.diagonal().array() += jitter * scale;
    }
    auto llt = std::make_shared<Eigen::LLT<Eigen::MatrixXd>>(work);
    if (llt->info() == Eigen::Success) {
      spec.factor_ = std::move(llt);
      return spec;
    }
    jitter = jitter == 0.0 ? 1e-8 : jitter * 10.0;
  }
  throw NumericError("mahalanobis loss: covariance not positive definite after jitter");
}

double LossSpec::operator()(const Eigen::VectorXd& yhat, const Eigen::VectorXd& y0) const {
  if (family_ == LossFamily::euclidean) {
    return euclidean_loss(yhat, y0, sigma_);
  }
  if (yhat.size() != y0.size() || yhat.size() != dim_) {
    throw DomainError("mahalanobis loss: vector lengths differ from covariance");
  }
  const Eigen::VectorXd diff = yhat - y0;
  return 0.5 * diff.dot(factor_->solve(diff));
}

double mahalanobis_loss(const Eigen::VectorXd& yhat, const Eigen::VectorXd& y0,
                        const LossSpec& spec) {
  if (spec.family() != LossFamily::mahalanobis) {
    throw DomainError("mahalanobis_loss: spec is not a Mahalanobis loss");
  }
  return spec(yhat, y0);
}

Eigen::MatrixXd compute_output_covariance(const forward::TrainingSet& training) {
  training.validate();
  const Eigen::MatrixXd& y = training.outputs;
  const Eigen::Index n = y.rows();
  if (n < static_cast<Eigen::Index>(forward::kOutputDim) + 1) {
    warn("output covariance: fewer rows than outputs; jitter keeps it factorizable");
  }
  const Eigen::RowVectorXd mean = y.colwise().mean();
  const Eigen::MatrixXd centered = y.rowwise() - mean;
  Eigen::MatrixXd cov = centered.transpose() * centered /
                        static_cast<double>(std::max<Eigen::Index>(n - 1, 1));

  // Add relative jitter until the matrix factorizes; the escalation mirrors
  // the kernel-matrix policy.
  const double scale = std::max(cov.diagonal().mean(), 1e-300);
  double jitter = 1e-8;
  for (int attempt = 0; attempt < 8; ++attempt) {
    Eigen::MatrixXd work = cov;
    work.diagonal().array() += jitter * scale;
    Eigen::LLT<Eigen::MatrixXd> llt(work);
    if (llt.info() == Eigen::Success) {
      return work;
    }
    jitter *= 10.0;
  }
  throw NumericError("output covariance: not factorizable after jitter escalation");
}

// ---------------------------------------------------------------------------
// Output emulation
// ---------------------------------------------------------------------------

OutputEmulator OutputEmulator::fit(std::shared_ptr<const forward::TrainingSet> training,
                                   const EmulatorConfig& config) {
  training->validate();
  OutputEmulator em;
  em.training_ = std::move(training);
  em.config_ = config;

  const Eigen::Index j_dim = em.training_->outputs.cols();
  if (config.interpolator == Interpolator::local) {
    auto theta = std::make_shared<const Eigen::MatrixXd>(em.training_->theta);
    em.local_.reserve(static_cast<std::size_t>(j_dim));
    for (Eigen::Index j = 0; j < j_dim; ++j) {
      em.local_.emplace_back(theta, em.training_->outputs.col(j), config.local);
    }
  } else {
    gp::LowRankConfig lr;
    lr.subsample_size = config.lowrank_subsample;
    lr.rank = std::min(config.lowrank_rank_output, config.lowrank_subsample);
    lr.seed = config.seed;
    em.lowrank_.reserve(static_cast<std::size_t>(j_dim));
    for (Eigen::Index j = 0; j < j_dim; ++j) {
      try {
        em.lowrank_.push_back(
            gp::LowRankGp::fit(em.training_->theta, em.training_->outputs.col(j), lr));
      } catch (const Error& e) {
        throw NumericError("output emulator: output " + std::to_string(j + 1) +
                           " failed to fit: " + e.what());
      }
    }
  }
  return em;
}

OutputEmulator OutputEmulator::restore_lowrank(
    std::shared_ptr<const forward::TrainingSet> training, const EmulatorConfig& config,
    std::vector<gp::LowRankGp> models) {
  if (static_cast<Eigen::Index>(models.size()) != forward::kOutputDim) {
    throw DataError("output emulator restore: expected " +
                    std::to_string(forward::kOutputDim) + " models");
  }
  OutputEmulator em;
  em.training_ = std::move(training);
  em.config_ = config;
  em.config_.interpolator = Interpolator::lowrank;
  em.lowrank_ = std::move(models);
  return em;
}

Eigen::Index OutputEmulator::output_dim() const {
  return config_.interpolator == Interpolator::local
             ? static_cast<Eigen::Index>(local_.size())
             : static_cast<Eigen::Index>(lowrank_.size());
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> OutputEmulator::emulate(
    const Eigen::VectorXd& theta) const {
  const Eigen::Index j_dim = output_dim();
  Eigen::VectorXd means(j_dim);
  Eigen::VectorXd variances(j_dim);
  if (config_.interpolator == Interpolator::local) {
    std::scoped_lock lock(*mutex_);
    // One neighbour lookup serves all outputs: the neighbourhood depends
    // only on the design and the query.
    const gp::Neighborhood nb = gp::make_neighborhood(
        training_->theta, theta, config_.local.neighbor_count);
    for (Eigen::Index j = 0; j < j_dim; ++j) {
      try {
        const gp::Prediction p =
            local_[static_cast<std::size_t>(j)].predict_in(theta, nb);
        means[j] = p.mean;
        variances[j] = p.variance;
      } catch (const Error& e) {
        throw NumericError("output emulator: output " + std::to_string(j + 1) +
                           " failed: " + e.what());
      }
    }
  } else {
    for (Eigen::Index j = 0; j < j_dim; ++j) {
      const gp::Prediction p = lowrank_[static_cast<std::size_t>(j)].predict(theta);
      means[j] = p.mean;
      variances[j] = p.variance;
    }
  }
  return {std::move(means), std::move(variances)};
}

Eigen::VectorXd OutputEmulator::emulate_mean(const Eigen::VectorXd& theta) const {
  if (config_.interpolator == Interpolator::lowrank) {
    const Eigen::Index j_dim = output_dim();
    Eigen::VectorXd means(j_dim);
    for (Eigen::Index j = 0; j < j_dim; ++j) {
      means[j] = lowrank_[static_cast<std::size_t>(j)].predict_mean(theta);
    }
    return means;
  }
  return emulate(theta).first;
}

double OutputEmulator::surrogate_loss(const Eigen::VectorXd& theta, const Eigen::VectorXd& y0,
                                      const LossSpec& loss) const {
  return loss(emulate_mean(theta), y0);
}

// ---------------------------------------------------------------------------
// Loss emulation
// ---------------------------------------------------------------------------

LossEmulator LossEmulator::fit(std::shared_ptr<const forward::TrainingSet> training,
                               const Eigen::VectorXd& y0, const LossSpec& loss,
                               const EmulatorConfig& config) {
  training->validate();
  if (y0.size() != forward::kOutputDim) {
    throw DomainError("loss emulator: observed vector must have " +
                      std::to_string(forward::kOutputDim) + " components");
  }
  LossEmulator em;
  em.training_ = std::move(training);
  em.config_ = config;
  em.y0_ = y0;

  const Eigen::Index n = em.training_->size();
  em.losses_.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    em.losses_[i] = loss(em.training_->outputs.row(i).transpose(), y0);
  }

  if (config.interpolator == Interpolator::local) {
    auto theta = std::make_shared<const Eigen::MatrixXd>(em.training_->theta);
    em.local_.emplace(theta, em.losses_, config.local);
  } else {
    gp::LowRankConfig lr;
    lr.subsample_size = config.lowrank_subsample;
    lr.rank = std::min(config.lowrank_rank_loss, config.lowrank_subsample);
    lr.seed = config.seed;
    em.lowrank_ = gp::LowRankGp::fit(em.training_->theta, em.losses_, lr);
  }
  return em;
}

gp::Prediction LossEmulator::predict(const Eigen::VectorXd& theta) const {
  if (config_.interpolator == Interpolator::local) {
    std::scoped_lock lock(*mutex_);
    return local_->predict(theta);
  }
  return lowrank_->predict(theta);
}

double LossEmulator::predict_mean(const Eigen::VectorXd& theta) const {
  if (config_.interpolator == Interpolator::lowrank) {
    return lowrank_->predict_mean(theta);
  }
  return predict(theta).mean;
}

// ---------------------------------------------------------------------------
// Observed-data file
// ---------------------------------------------------------------------------

Eigen::VectorXd load_observed(const std::filesystem::path& path) {
  const std::string content = io::read_file(path);
  std::istringstream in(content);
  std::string line;
  if (!std::getline(in, line)) {
    throw DataError(path.string() + ": empty file");
  }
  const auto header = io::split_fields(line);
  if (header.size() != static_cast<std::size_t>(forward::kOutputDim) || header[0] != "y1") {
    throw DataError(path.string() + ":1: expected header 'y1,...,y" +
                    std::to_string(forward::kOutputDim) + "'");
  }
  if (!std::getline(in, line) || line.empty()) {
    throw DataError(path.string() + ": missing data row");
  }
  const auto fields = io::split_fields(line);
  if (fields.size() != static_cast<std::size_t>(forward::kOutputDim)) {
    throw DataError(path.string() + ":2: expected " + std::to_string(forward::kOutputDim) +
                    " values, got " + std::to_string(fields.size()));
  }
  Eigen::VectorXd y0(forward::kOutputDim);
  for (Eigen::Index j = 0; j < forward::kOutputDim; ++j) {
    y0[j] = io::parse_double(fields[static_cast<std::size_t>(j)],
                             path.string() + ":2 column " + std::to_string(j + 1));
  }
  return y0;
}

void save_observed(const std::filesystem::path& path, const Eigen::VectorXd& y0) {
  if (y0.size() != forward::kOutputDim) {
    throw DomainError("observed vector must have " + std::to_string(forward::kOutputDim) +
                      " components");
  }
  std::string content;
  for (Eigen::Index j = 0; j < forward::kOutputDim; ++j) {
    if (j > 0) content += ',';
    content += 'y' + std::to_string(j + 1);
  }
  content += '\n';
  for (Eigen::Index j = 0; j < forward::kOutputDim; ++j) {
    if (j > 0) content += ',';
    content += io::format_double(y0[j]);
  }
  content += '\n';
  io::atomic_write(path, content);
}

}  // namespace myofit::emulate
