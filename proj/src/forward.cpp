/*!
 * This file is part of myofit, a library for emulation-based parameter
 * inference in anisotropic hyperelastic myocardium models.
 *
 * Licensed under the Apache License Version 2.0. See LICENSE file in the
 * project root for license information.
 */
#include "myofit/forward.hpp"

#include <sstream>
#include <string>
#include <utility>

#include "myofit/errors.hpp"
#include "myofit/io.hpp"

namespace myofit::forward {

using material::Axis;

material::DeformationGradient ProtocolCase::deformation() const {
  if (kind == Kind::shear) {
    return material::simple_shear(first, second, magnitude);
  }
  return material::uniaxial_stretch(first, magnitude);
}

DeformationProtocol::DeformationProtocol(std::vector<ProtocolCase> cases)
    : cases_(std::move(cases)) {
  if (cases_.size() != static_cast<std::size_t>(kProtocolCases)) {
    throw DomainError("deformation protocol must have exactly " +
                      std::to_string(kProtocolCases) + " cases, got " +
                      std::to_string(cases_.size()));
  }
}

const DeformationProtocol& DeformationProtocol::standard() {
  static const DeformationProtocol protocol = [] {
    std::vector<ProtocolCase> cases;
    const std::pair<Axis, Axis> shear_modes[] = {
        {Axis::fibre, Axis::sheet},  {Axis::fibre, Axis::normal},
        {Axis::sheet, Axis::fibre},  {Axis::sheet, Axis::normal},
        {Axis::normal, Axis::fibre}, {Axis::normal, Axis::sheet},
    };
    for (double gamma : {0.1, 0.2}) {
      for (auto [i, j] : shear_modes) {
        cases.push_back({ProtocolCase::Kind::shear, i, j, gamma});
      }
    }
    for (double lambda : {1.05, 1.10, 1.15, 1.20}) {
      for (Axis axis : {Axis::fibre, Axis::sheet, Axis::normal}) {
        cases.push_back({ProtocolCase::Kind::stretch, axis, axis, lambda});
      }
    }
    return DeformationProtocol(std::move(cases));
  }();
  return protocol;
}

void TrainingSet::validate() const {
  if (theta.rows() != outputs.rows()) {
    throw DataError("training set row mismatch: " + std::to_string(theta.rows()) +
                    " parameter rows vs " + std::to_string(outputs.rows()) +
                    " output rows");
  }
  if (theta.cols() != 4) {
    throw DataError("training set must have 4 parameter columns");
  }
  if (outputs.cols() != kOutputDim) {
    throw DataError("training set must have " + std::to_string(kOutputDim) +
                    " output columns");
  }
  for (Eigen::Index r = 0; r < theta.rows(); ++r) {
    for (Eigen::Index c = 0; c < 4; ++c) {
      const double value = theta(r, c);
      if (!std::isfinite(value) || value < material::kThetaLo ||
          value > material::kThetaHi) {
        throw DataError("training set row " + std::to_string(r + 1) + ": theta" +
                        std::to_string(c + 1) + " = " + std::to_string(value) +
                        " violates box bounds");
      }
    }
  }
}

Eigen::VectorXd forward_analytic(const material::ParameterVector& theta,
                                 const DeformationProtocol& protocol) {
  const material::MaterialParams params = material::expand_parameters(theta);
  Eigen::VectorXd y(kOutputDim);
  double total_energy = 0.0;
  Eigen::Index k = 0;
  for (const ProtocolCase& pc : protocol.cases()) {
    const material::DeformationGradient defgrad = pc.deformation();
    const Eigen::Matrix3d sigma = material::cauchy_stress(params, defgrad);
    const Eigen::Vector3d ei = material::axis_vector(pc.first);
    const Eigen::Vector3d ej = material::axis_vector(pc.second);
    y[k++] = ei.dot(sigma * ej);
    total_energy += material::strain_energy(params, material::compute_invariants(defgrad));
  }
  y[kOutputDim - 1] = total_energy;
  return y;
}

TrainingSet forward_batch(const Eigen::MatrixXd& thetas, const DeformationProtocol& protocol) {
  if (thetas.rows() == 0) {
    throw DomainError("forward_batch: empty design");
  }
  if (thetas.cols() != 4) {
    throw DomainError("forward_batch: design must have 4 columns");
  }
  TrainingSet training;
  training.theta = thetas;
  training.outputs.resize(thetas.rows(), kOutputDim);
  training.provenance = TrainingSet::Provenance::analytic;
  for (Eigen::Index r = 0; r < thetas.rows(); ++r) {
    try {
      const material::ParameterVector theta(Eigen::Vector4d(thetas.row(r)));
      training.outputs.row(r) = forward_analytic(theta, protocol);
    } catch (const Error& e) {
      throw DomainError("forward_batch: row " + std::to_string(r + 1) +
                        " failed: " + e.what());
    }
  }
  return training;
}

namespace {

std::string dataset_header() {
  std::string header = "theta1,theta2,theta3,theta4";
  for (Eigen::Index j = 1; j <= kOutputDim; ++j) {
    header += ",y" + std::to_string(j);
  }
  return header;
}

}  // namespace

TrainingSet load_dataset(const std::filesystem::path& path) {
  const std::string content = io::read_file(path);
  std::istringstream in(content);
  std::string line;
  int line_number = 0;

  if (!std::getline(in, line)) {
    throw DataError(path.string() + ": empty file");
  }
  ++line_number;
  {
    const auto header = io::split_fields(line);
    if (header.size() != 4 + static_cast<std::size_t>(kOutputDim) ||
        header[0] != "theta1") {
      throw DataError(path.string() + ":1: expected header '" + dataset_header() + "'");
    }
  }

  std::vector<Eigen::VectorXd> rows;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty() || line == "\r") {
      continue;
    }
    const auto fields = io::split_fields(line);
    const std::size_t expected = 4 + static_cast<std::size_t>(kOutputDim);
    if (fields.size() != expected) {
      throw DataError(path.string() + ":" + std::to_string(line_number) + ": expected " +
                      std::to_string(expected) + " columns, got " +
                      std::to_string(fields.size()));
    }
    Eigen::VectorXd row(expected);
    for (std::size_t c = 0; c < expected; ++c) {
      row[static_cast<Eigen::Index>(c)] = io::parse_double(
          fields[c], path.string() + ":" + std::to_string(line_number) + " column " +
                         std::to_string(c + 1));
    }
    for (Eigen::Index c = 0; c < 4; ++c) {
      if (row[c] < material::kThetaLo || row[c] > material::kThetaHi) {
        throw DataError(path.string() + ":" + std::to_string(line_number) + ": theta" +
                        std::to_string(c + 1) + " = " + io::format_double(row[c]) +
                        " violates box bounds");
      }
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) {
    throw DataError(path.string() + ": no data rows");
  }

  TrainingSet training;
  training.provenance = TrainingSet::Provenance::ingested;
  training.theta.resize(static_cast<Eigen::Index>(rows.size()), 4);
  training.outputs.resize(static_cast<Eigen::Index>(rows.size()), kOutputDim);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    training.theta.row(static_cast<Eigen::Index>(r)) = rows[r].head(4);
    training.outputs.row(static_cast<Eigen::Index>(r)) = rows[r].tail(kOutputDim);
  }
  training.validate();
  return training;
}

void save_dataset(const std::filesystem::path& path, const TrainingSet& training) {
  training.validate();
  std::string content = dataset_header() + "\n";
  for (Eigen::Index r = 0; r < training.size(); ++r) {
    for (Eigen::Index c = 0; c < 4; ++c) {
      if (c > 0) content += ',';
      content += io::format_double(training.theta(r, c));
    }
    for (Eigen::Index c = 0; c < kOutputDim; ++c) {
      content += ',';
      content += io::format_double(training.outputs(r, c));
    }
    content += '\n';
  }
  io::atomic_write(path, content);
}

}  // namespace myofit::forward
