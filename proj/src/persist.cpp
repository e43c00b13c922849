/*!
 * This file is part of myofit, a library for emulation-based parameter
 * inference in anisotropic hyperelastic myocardium models.
 *
 * Licensed under the Apache License Version 2.0. See LICENSE file in the
 * project root for license information.
 */
#include "myofit/persist.hpp"

#include <utility>

#include <json.hpp>

#include "myofit/errors.hpp"
#include "myofit/io.hpp"

namespace myofit::persist {

namespace {

using nlohmann::json;

json vector_to_json(const Eigen::VectorXd& v) {
  json array = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    array.push_back(v[i]);
  }
  return array;
}

Eigen::VectorXd vector_from_json(const json& array) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(array.size()));
  for (std::size_t i = 0; i < array.size(); ++i) {
    v[static_cast<Eigen::Index>(i)] = array[i].get<double>();
  }
  return v;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    rows.push_back(vector_to_json(m.row(r).transpose()));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& rows, Eigen::Index expected_cols = -1) {
  const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
  Eigen::Index cols = expected_cols;
  if (cols < 0) {
    cols = n > 0 ? static_cast<Eigen::Index>(rows[0].size()) : 0;
  }
  Eigen::MatrixXd m(n, cols);
  for (Eigen::Index r = 0; r < n; ++r) {
    m.row(r) = vector_from_json(rows[static_cast<std::size_t>(r)]).transpose();
  }
  return m;
}

json config_to_json(const emulate::EmulatorConfig& config) {
  json doc;
  doc["interpolator"] =
      config.interpolator == emulate::Interpolator::local ? "local" : "lowrank";
  doc["neighbor_count"] = config.local.neighbor_count;
  doc["warm_start"] = config.local.warm_start;
  doc["init_noise"] = config.local.fit.init_noise;
  doc["restarts"] = config.local.fit.restarts;
  doc["lowrank_subsample"] = config.lowrank_subsample;
  doc["lowrank_rank_output"] = config.lowrank_rank_output;
  doc["lowrank_rank_loss"] = config.lowrank_rank_loss;
  doc["seed"] = config.seed;
  return doc;
}

emulate::EmulatorConfig config_from_json(const json& doc) {
  emulate::EmulatorConfig config;
  config.interpolator = doc.at("interpolator").get<std::string>() == "local"
                            ? emulate::Interpolator::local
                            : emulate::Interpolator::lowrank;
  config.local.neighbor_count = doc.at("neighbor_count").get<int>();
  config.local.warm_start = doc.at("warm_start").get<bool>();
  config.local.fit.init_noise = doc.at("init_noise").get<double>();
  config.local.fit.restarts = doc.at("restarts").get<int>();
  config.lowrank_subsample = doc.at("lowrank_subsample").get<Eigen::Index>();
  config.lowrank_rank_output = doc.at("lowrank_rank_output").get<Eigen::Index>();
  config.lowrank_rank_loss = doc.at("lowrank_rank_loss").get<Eigen::Index>();
  config.seed = doc.at("seed").get<std::uint64_t>();
  return config;
}

}  // namespace

void save_output_emulator(const std::filesystem::path& file,
                          const emulate::OutputEmulator& emulator,
                          const std::string& dataset_path) {
  json doc;
  doc["schema"] = kEmulatorSchema;
  doc["dataset"] = dataset_path;
  doc["config"] = config_to_json(emulator.config());
  doc["kernel_family"] = emulator.config().interpolator == emulate::Interpolator::local
                             ? "ard_squared_exponential"
                             : "matern32";

  if (emulator.config().interpolator == emulate::Interpolator::lowrank) {
    json outputs = json::array();
    for (const gp::LowRankGp& model : emulator.lowrank_models()) {
      json entry;
      entry["mean_constant"] = model.mean_constant();
      entry["noise_std"] = model.noise_std();
      json subsample = json::array();
      for (Eigen::Index idx : model.subsample_indices()) {
        subsample.push_back(idx);
      }
      entry["subsample_indices"] = std::move(subsample);
      json blocks = json::array();
      for (const gp::LowRankGp::Block& block : model.blocks()) {
        json jb;
        jb["lengthscale"] = block.lengthscale;
        jb["output_scale"] = block.output_scale;
        jb["eigenvalues"] = vector_to_json(block.eigenvalues);
        // Eigenpairs: the stored basis is U_k D_k^(-1/2), from which the
        // eigenvectors are U_k = basis * D_k^(1/2).
        jb["basis"] = matrix_to_json(block.basis);
        blocks.push_back(std::move(jb));
      }
      entry["blocks"] = std::move(blocks);
      entry["weights"] = vector_to_json(model.weights());
      outputs.push_back(std::move(entry));
    }
    doc["outputs"] = std::move(outputs);
  }
  io::atomic_write(file, doc.dump(2) + "\n");
}

emulate::OutputEmulator load_output_emulator(const std::filesystem::path& file,
                                             const std::string& dataset_override) {
  json doc;
  try {
    doc = json::parse(io::read_file(file));
  } catch (const json::exception& e) {
    throw DataError(file.string() + ": invalid emulator file: " + e.what());
  }
  if (doc.value("schema", "") != kEmulatorSchema) {
    throw DataError(file.string() + ": unsupported schema '" + doc.value("schema", "") +
                    "'");
  }
  const std::string dataset_path =
      dataset_override.empty() ? doc.at("dataset").get<std::string>() : dataset_override;
  auto training =
      std::make_shared<const forward::TrainingSet>(forward::load_dataset(dataset_path));
  emulate::EmulatorConfig config = config_from_json(doc.at("config"));

  if (config.interpolator == emulate::Interpolator::local) {
    return emulate::OutputEmulator::fit(training, config);
  }

  std::vector<gp::LowRankGp> models;
  for (const json& entry : doc.at("outputs")) {
    std::vector<Eigen::Index> subsample;
    for (const json& idx : entry.at("subsample_indices")) {
      subsample.push_back(idx.get<Eigen::Index>());
    }
    Eigen::MatrixXd Z(static_cast<Eigen::Index>(subsample.size()), training->theta.cols());
    for (std::size_t i = 0; i < subsample.size(); ++i) {
      if (subsample[i] < 0 || subsample[i] >= training->size()) {
        throw DataError(file.string() + ": subsample index out of range");
      }
      Z.row(static_cast<Eigen::Index>(i)) = training->theta.row(subsample[i]);
    }
    std::vector<gp::LowRankGp::Block> blocks;
    std::size_t block_index = 0;
    for (const json& jb : entry.at("blocks")) {
      gp::LowRankGp::Block block;
      block.inputs = block_index == 0 ? Z : Z.cwiseInverse();
      block.lengthscale = jb.at("lengthscale").get<double>();
      block.output_scale = jb.at("output_scale").get<double>();
      block.eigenvalues = vector_from_json(jb.at("eigenvalues"));
      block.basis = matrix_from_json(jb.at("basis"), block.eigenvalues.size());
      if (block.basis.rows() != Z.rows()) {
        throw DataError(file.string() + ": basis row count mismatch");
      }
      blocks.push_back(std::move(block));
      ++block_index;
    }
    models.push_back(gp::LowRankGp::restore(
        std::move(blocks), vector_from_json(entry.at("weights")),
        entry.at("mean_constant").get<double>(), entry.at("noise_std").get<double>(),
        std::move(subsample)));
  }
  return emulate::OutputEmulator::restore_lowrank(training, config, std::move(models));
}

std::string serialize_result(const infer::InferenceResult& result) {
  json doc;
  doc["schema"] = kResultSchema;
  doc["theta_hat"] = vector_to_json(result.theta_hat);
  doc["loss"] = result.loss;
  doc["hessian"] = matrix_to_json(result.hessian);
  doc["covariance"] = matrix_to_json(result.covariance);
  json optima = json::array();
  for (const infer::LocalOptimum& opt : result.optima) {
    json entry;
    entry["point"] = vector_to_json(opt.point);
    entry["value"] = opt.value;
    entry["start_index"] = opt.start_index;
    entry["basin_radius"] = opt.basin_radius;
    optima.push_back(std::move(entry));
  }
  doc["optima"] = std::move(optima);
  doc["diagnostics"] = {{"function_evaluations", result.function_evaluations},
                        {"local_optima", result.optima.size()}};
  return doc.dump(2) + "\n";
}

void save_result(const std::filesystem::path& file, const infer::InferenceResult& result) {
  io::atomic_write(file, serialize_result(result));
}

void save_curve(const std::filesystem::path& file,
                const std::vector<material::CurvePoint>& curve) {
  std::string content = "lambda,sigma\n";
  for (const material::CurvePoint& point : curve) {
    content += io::format_double(point.stretch) + "," + io::format_double(point.stress) + "\n";
  }
  io::atomic_write(file, content);
}

void save_curve_with_bands(const std::filesystem::path& file,
                           const std::vector<infer::CurveBand>& bands) {
  std::string content = "lambda,sigma,ci_lower,ci_upper\n";
  for (const infer::CurveBand& band : bands) {
    content += io::format_double(band.stretch) + "," + io::format_double(band.mean) + "," +
               io::format_double(band.lower) + "," + io::format_double(band.upper) + "\n";
  }
  io::atomic_write(file, content);
}

}  // namespace myofit::persist
