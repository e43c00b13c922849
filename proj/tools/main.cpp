/*!
 * This file is part of myofit, a library for emulation-based parameter
 * inference in anisotropic hyperelastic myocardium models.
 *
 * Licensed under the Apache License Version 2.0. See LICENSE file in the
 * project root for license information.
 */
#include <cctype>
#include <cstdlib>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "myofit/bench.hpp"
#include "myofit/design.hpp"
#include "myofit/emulate.hpp"
#include "myofit/errors.hpp"
#include "myofit/forward.hpp"
#include "myofit/infer.hpp"
#include "myofit/io.hpp"
#include "myofit/material.hpp"
#include "myofit/persist.hpp"

namespace {

using nlohmann::json;
namespace mf = myofit;

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

/// Every numeric knob of the pipeline, defaulting to reference scale
/// (N = 10,000 training points, K = 100 neighbours, n_r = 2000, rank 2000
/// for output emulation and 1000 for loss emulation).
struct RunConfig {
  // design
  int design_n = 10000;
  int design_dim = 4;
  std::uint64_t design_skip = 1;
  std::uint64_t seed_index = 0;
  double box_lo = 0.1;
  double box_hi = 5.0;
  // emulation
  std::string method = "out";    // out | loss
  std::string interp = "local";  // local | lowrank
  std::string loss = "euc";      // euc | mah
  int neighbors = 100;           // K
  int lowrank_subsample = 2000;  // n_r
  int lowrank_rank_output = 2000;
  int lowrank_rank_loss = 1000;
  double euclidean_sigma = 1.0;
  // optimization
  int trial_points = 2000;
  int stage_one_points = 400;
  int starts = 50;
  int max_local_iterations = 100;
  // uncertainty quantification
  int uq_samples = 1000;
  double uq_level = 0.95;
  // curves
  double curve_lo = 1.0;
  double curve_hi = 1.3;
  int curve_points = 31;
  // misc
  std::uint64_t seed = 0;
  int threads = 1;
  int bench_cases = 100;
  bool bench_desk_scale = true;
};

json config_to_json(const RunConfig& c) {
  return json{{"design_n", c.design_n},
              {"design_dim", c.design_dim},
              {"design_skip", c.design_skip},
              {"seed_index", c.seed_index},
              {"box_lo", c.box_lo},
              {"box_hi", c.box_hi},
              {"method", c.method},
              {"interp", c.interp},
              {"loss", c.loss},
              {"neighbors", c.neighbors},
              {"lowrank_subsample", c.lowrank_subsample},
              {"lowrank_rank_output", c.lowrank_rank_output},
              {"lowrank_rank_loss", c.lowrank_rank_loss},
              {"euclidean_sigma", c.euclidean_sigma},
              {"trial_points", c.trial_points},
              {"stage_one_points", c.stage_one_points},
              {"starts", c.starts},
              {"max_local_iterations", c.max_local_iterations},
              {"uq_samples", c.uq_samples},
              {"uq_level", c.uq_level},
              {"curve_lo", c.curve_lo},
              {"curve_hi", c.curve_hi},
              {"curve_points", c.curve_points},
              {"seed", c.seed},
              {"threads", c.threads},
              {"bench_cases", c.bench_cases},
              {"bench_desk_scale", c.bench_desk_scale}};
}

void config_from_json(const json& doc, RunConfig& c) {
  c.design_n = doc.value("design_n", c.design_n);
  c.design_dim = doc.value("design_dim", c.design_dim);
  c.design_skip = doc.value("design_skip", c.design_skip);
  c.seed_index = doc.value("seed_index", c.seed_index);
  c.box_lo = doc.value("box_lo", c.box_lo);
  c.box_hi = doc.value("box_hi", c.box_hi);
  c.method = doc.value("method", c.method);
  c.interp = doc.value("interp", c.interp);
  c.loss = doc.value("loss", c.loss);
  c.neighbors = doc.value("neighbors", c.neighbors);
  c.lowrank_subsample = doc.value("lowrank_subsample", c.lowrank_subsample);
  c.lowrank_rank_output = doc.value("lowrank_rank_output", c.lowrank_rank_output);
  c.lowrank_rank_loss = doc.value("lowrank_rank_loss", c.lowrank_rank_loss);
  c.euclidean_sigma = doc.value("euclidean_sigma", c.euclidean_sigma);
  c.trial_points = doc.value("trial_points", c.trial_points);
  c.stage_one_points = doc.value("stage_one_points", c.stage_one_points);
  c.starts = doc.value("starts", c.starts);
  c.max_local_iterations = doc.value("max_local_iterations", c.max_local_iterations);
  c.uq_samples = doc.value("uq_samples", c.uq_samples);
  c.uq_level = doc.value("uq_level", c.uq_level);
  c.curve_lo = doc.value("curve_lo", c.curve_lo);
  c.curve_hi = doc.value("curve_hi", c.curve_hi);
  c.curve_points = doc.value("curve_points", c.curve_points);
  c.seed = doc.value("seed", c.seed);
  c.threads = doc.value("threads", c.threads);
  c.bench_cases = doc.value("bench_cases", c.bench_cases);
  c.bench_desk_scale = doc.value("bench_desk_scale", c.bench_desk_scale);
}

/// Environment overrides: MYOFIT_<UPPERCASED KNOB>, e.g. MYOFIT_NEIGHBORS=64.
void apply_env_overrides(RunConfig& c) {
  json doc = config_to_json(c);
  for (auto& [key, value] : doc.items()) {
    std::string name = "MYOFIT_" + key;
    for (char& ch : name) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    const char* text = std::getenv(name.c_str());
    if (!text) continue;
    try {
      if (value.is_string()) {
        doc[key] = std::string(text);
      } else if (value.is_number_float()) {
        doc[key] = std::stod(text);
      } else if (value.is_boolean()) {
        doc[key] = std::string(text) == "1" || std::string(text) == "true";
      } else {
        doc[key] = static_cast<std::int64_t>(std::stoll(text));
      }
    } catch (const std::exception&) {
      throw mf::DomainError("invalid value for " + name + ": '" + text + "'");
    }
  }
  config_from_json(doc, c);
}

mf::emulate::EmulatorConfig emulator_config(const RunConfig& c) {
  mf::emulate::EmulatorConfig config;
  config.interpolator = c.interp == "lowrank" ? mf::emulate::Interpolator::lowrank
                                              : mf::emulate::Interpolator::local;
  config.local.neighbor_count = c.neighbors;
  config.lowrank_subsample = c.lowrank_subsample;
  config.lowrank_rank_output = c.lowrank_rank_output;
  config.lowrank_rank_loss = c.lowrank_rank_loss;
  config.seed = c.seed;
  return config;
}

mf::infer::OptimizerConfig optimizer_config(const RunConfig& c) {
  mf::infer::OptimizerConfig config;
  config.strategy = c.interp == "lowrank" ? mf::infer::Strategy::cg_multistart
                                          : mf::infer::Strategy::global_search;
  config.trial_points = c.trial_points;
  config.stage_one_points = c.stage_one_points;
  config.starts = c.starts;
  config.max_local_iterations = c.max_local_iterations;
  config.bounds = mf::optim::Box::cube(4, c.box_lo, c.box_hi);
  config.seed = c.seed;
  return config;
}

void validate_choices(const RunConfig& c) {
  if (c.method != "out" && c.method != "loss") {
    throw mf::DomainError("--method must be 'out' or 'loss'");
  }
  if (c.interp != "local" && c.interp != "lowrank") {
    throw mf::DomainError("--interp must be 'local' or 'lowrank'");
  }
  if (c.loss != "euc" && c.loss != "mah") {
    throw mf::DomainError("--loss must be 'euc' or 'mah'");
  }
  if (c.neighbors < 1 || c.trial_points < 1 || c.stage_one_points < 1 || c.starts < 1 ||
      c.max_local_iterations < 1 || c.uq_samples < 1 || c.threads < 1) {
    throw mf::DomainError("counts must be positive");
  }
  if (!(c.box_hi > c.box_lo)) {
    throw mf::DomainError("box bounds require hi > lo");
  }
}

// ---------------------------------------------------------------------------
// Theta-column design files (the `design` output, `simulate` input).
// ---------------------------------------------------------------------------

void save_design(const std::string& path, const Eigen::MatrixXd& theta) {
  std::string content;
  for (Eigen::Index c = 0; c < theta.cols(); ++c) {
    if (c > 0) content += ',';
    content += "theta" + std::to_string(c + 1);
  }
  content += '\n';
  for (Eigen::Index r = 0; r < theta.rows(); ++r) {
    for (Eigen::Index c = 0; c < theta.cols(); ++c) {
      if (c > 0) content += ',';
      content += mf::io::format_double(theta(r, c));
    }
    content += '\n';
  }
  mf::io::atomic_write(path, content);
}

Eigen::MatrixXd load_design(const std::string& path) {
  const std::string content = mf::io::read_file(path);
  std::istringstream in(content);
  std::string line;
  if (!std::getline(in, line)) {
    throw mf::DataError(path + ": empty file");
  }
  const auto header = mf::io::split_fields(line);
  if (header.empty() || header[0] != "theta1") {
    throw mf::DataError(path + ":1: expected a theta column header");
  }
  const std::size_t dim = header.size();
  std::vector<Eigen::VectorXd> rows;
  int line_number = 1;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty() || line == "\r") continue;
    const auto fields = mf::io::split_fields(line);
    if (fields.size() != dim) {
      throw mf::DataError(path + ":" + std::to_string(line_number) + ": expected " +
                          std::to_string(dim) + " columns");
    }
    Eigen::VectorXd row(static_cast<Eigen::Index>(dim));
    for (std::size_t c = 0; c < dim; ++c) {
      row[static_cast<Eigen::Index>(c)] =
          mf::io::parse_double(fields[c], path + ":" + std::to_string(line_number));
    }
    rows.push_back(std::move(row));
  }
  Eigen::MatrixXd theta(static_cast<Eigen::Index>(rows.size()),
                        static_cast<Eigen::Index>(dim));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    theta.row(static_cast<Eigen::Index>(r)) = rows[r].transpose();
  }
  return theta;
}

std::vector<double> curve_grid(const RunConfig& c) {
  if (c.curve_points < 2 || !(c.curve_hi > c.curve_lo) || c.curve_lo < 1.0) {
    throw mf::DomainError("curve grid requires lo >= 1, hi > lo and >= 2 points");
  }
  std::vector<double> grid(static_cast<std::size_t>(c.curve_points));
  for (int i = 0; i < c.curve_points; ++i) {
    grid[static_cast<std::size_t>(i)] =
        c.curve_lo + (c.curve_hi - c.curve_lo) * i / (c.curve_points - 1);
  }
  return grid;
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

void cmd_design(const RunConfig& c, const std::string& out) {
  const Eigen::MatrixXd unit = mf::design::sobol_points(
      c.design_dim, c.design_n, c.design_skip + c.seed_index);
  save_design(out, mf::design::scale_to_box(unit, c.box_lo, c.box_hi));
  std::cerr << "design: wrote " << c.design_n << " points to " << out << "\n";
}

void cmd_simulate(const RunConfig&, const std::string& design_path,
                  const std::string& out) {
  const Eigen::MatrixXd theta = load_design(design_path);
  const mf::forward::TrainingSet training = mf::forward::forward_batch(theta);
  mf::forward::save_dataset(out, training);
  std::cerr << "simulate: wrote " << training.size() << " rows to " << out << "\n";
}

void cmd_fit(const RunConfig& c, const std::string& train_path, const std::string& out) {
  auto training = std::make_shared<const mf::forward::TrainingSet>(
      mf::forward::load_dataset(train_path));
  const mf::emulate::OutputEmulator emulator =
      mf::emulate::OutputEmulator::fit(training, emulator_config(c));
  mf::persist::save_output_emulator(out, emulator, train_path);
  std::cerr << "fit: persisted " << c.interp << " output emulator to " << out << "\n";
}

void cmd_infer(const RunConfig& c, const std::string& data_path,
               const std::string& train_path, const std::string& emulator_path,
               const std::string& out, const std::string& curve_prefix) {
  const Eigen::VectorXd y0 = mf::emulate::load_observed(data_path);
  auto training = std::make_shared<const mf::forward::TrainingSet>(
      mf::forward::load_dataset(train_path));

  mf::emulate::LossSpec loss_spec =
      c.loss == "mah"
          ? mf::emulate::LossSpec::mahalanobis(mf::emulate::compute_output_covariance(*training))
          : mf::emulate::LossSpec::euclidean(c.euclidean_sigma);

  mf::infer::LossFn objective;
  std::shared_ptr<const mf::emulate::OutputEmulator> outputs;
  std::shared_ptr<const mf::emulate::LossEmulator> losses;
  if (c.method == "out") {
    if (!emulator_path.empty()) {
      outputs = std::make_shared<const mf::emulate::OutputEmulator>(
          mf::persist::load_output_emulator(emulator_path, train_path));
    } else {
      outputs = std::make_shared<const mf::emulate::OutputEmulator>(
          mf::emulate::OutputEmulator::fit(training, emulator_config(c)));
    }
    objective = [outputs, y0, loss_spec](const Eigen::VectorXd& theta) {
      return outputs->surrogate_loss(theta, y0, loss_spec);
    };
  } else {
    losses = std::make_shared<const mf::emulate::LossEmulator>(
        mf::emulate::LossEmulator::fit(training, y0, loss_spec, emulator_config(c)));
    objective = [losses](const Eigen::VectorXd& theta) {
      return losses->predict_mean(theta);
    };
  }

  const mf::infer::InferenceResult result =
      mf::infer::minimize(objective, optimizer_config(c));
  mf::persist::save_result(out, result);
  std::cerr << "infer: theta_hat = [" << result.theta_hat.transpose() << "], loss = "
            << result.loss << ", evaluations = " << result.function_evaluations
            << ", wall = " << result.wall_time_seconds << " s\n";

  if (!curve_prefix.empty()) {
    const std::vector<double> grid = curve_grid(c);
    const auto fibre = mf::infer::curve_confidence_bands(
        result.theta_hat, result.hessian, mf::material::CurveDirection::fibre, grid,
        c.uq_samples, c.uq_level, c.seed);
    const auto sheet = mf::infer::curve_confidence_bands(
        result.theta_hat, result.hessian, mf::material::CurveDirection::sheet, grid,
        c.uq_samples, c.uq_level, c.seed);
    mf::persist::save_curve_with_bands(curve_prefix + "_fibre.txt", fibre);
    mf::persist::save_curve_with_bands(curve_prefix + "_sheet.txt", sheet);
    std::cerr << "infer: wrote curves to " << curve_prefix << "_{fibre,sheet}.txt\n";
  }
}

void cmd_bench(const RunConfig& c, const std::string& train_path,
               const std::string& test_path, const std::string& out_dir) {
  const mf::forward::TrainingSet train = mf::forward::load_dataset(train_path);
  mf::forward::TrainingSet test = mf::forward::load_dataset(test_path);
  if (c.bench_cases < static_cast<int>(test.size())) {
    test.theta = test.theta.topRows(c.bench_cases).eval();
    test.outputs = test.outputs.topRows(c.bench_cases).eval();
  }

  mf::bench::BenchConfig config = mf::bench::BenchConfig::desk_scale();
  if (!c.bench_desk_scale) {
    config.local_optimizer = optimizer_config(c);
    config.local_optimizer.strategy = mf::infer::Strategy::global_search;
    config.lowrank_optimizer = optimizer_config(c);
    config.lowrank_optimizer.strategy = mf::infer::Strategy::cg_multistart;
    config.local_emulator.local.neighbor_count = c.neighbors;
    config.lowrank_emulator.lowrank_subsample = c.lowrank_subsample;
    config.lowrank_emulator.lowrank_rank_output = c.lowrank_rank_output;
    config.lowrank_emulator.lowrank_rank_loss = c.lowrank_rank_loss;
  }
  config.seed = c.seed;
  config.threads = c.threads;

  const auto combos = mf::bench::all_combos();
  const mf::bench::BenchReport report = mf::bench::run_benchmark(train, test, combos, config);

  const std::filesystem::path dir(out_dir);
  mf::io::atomic_write(dir / "bench_report.json", mf::bench::serialize_report(report));
  const std::string summary = mf::bench::format_summary(mf::bench::summarize(report));
  mf::io::atomic_write(dir / "bench_summary.txt", summary);
  mf::bench::write_mse_columns(dir, report);
  std::cerr << summary;
}

void cmd_curves(const RunConfig& c, const std::vector<double>& theta_values,
                const std::string& result_path, const std::string& out_prefix) {
  const std::vector<double> grid = curve_grid(c);
  if (!result_path.empty()) {
    json doc = json::parse(mf::io::read_file(result_path));
    if (doc.value("schema", "") != mf::persist::kResultSchema) {
      throw mf::DataError(result_path + ": not an inference result file");
    }
    Eigen::Vector4d theta;
    const auto& jt = doc.at("theta_hat");
    for (int i = 0; i < 4; ++i) theta[i] = jt.at(static_cast<std::size_t>(i)).get<double>();
    Eigen::Matrix4d hessian;
    const auto& jh = doc.at("hessian");
    for (int r = 0; r < 4; ++r) {
      for (int col = 0; col < 4; ++col) {
        hessian(r, col) = jh.at(static_cast<std::size_t>(r)).at(static_cast<std::size_t>(col)).get<double>();
      }
    }
    const auto fibre = mf::infer::curve_confidence_bands(
        theta, hessian, mf::material::CurveDirection::fibre, grid, c.uq_samples,
        c.uq_level, c.seed);
    const auto sheet = mf::infer::curve_confidence_bands(
        theta, hessian, mf::material::CurveDirection::sheet, grid, c.uq_samples,
        c.uq_level, c.seed);
    mf::persist::save_curve_with_bands(out_prefix + "_fibre.txt", fibre);
    mf::persist::save_curve_with_bands(out_prefix + "_sheet.txt", sheet);
  } else {
    if (theta_values.size() != 4) {
      throw mf::DomainError("curves: --theta needs 4 comma-separated values");
    }
    const mf::material::ParameterVector theta(theta_values[0], theta_values[1],
                                              theta_values[2], theta_values[3]);
    mf::persist::save_curve(out_prefix + "_fibre.txt",
                            mf::material::stretch_stress_curve(
                                theta, mf::material::CurveDirection::fibre, grid));
    mf::persist::save_curve(out_prefix + "_sheet.txt",
                            mf::material::stretch_stress_curve(
                                theta, mf::material::CurveDirection::sheet, grid));
  }
  std::cerr << "curves: wrote " << out_prefix << "_{fibre,sheet}.txt\n";
}

json error_record(const char* type, const std::string& message) {
  return json{{"error", {{"type", type}, {"message", message}}}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Emulation-based parameter inference for hyperelastic myocardium models"};
  app.require_subcommand(0, 1);

  RunConfig config;
  std::string config_path;
  bool emit_config = false;
  app.add_option("--config", config_path, "JSON config file with knob defaults");
  app.add_flag("--emit-config", emit_config,
               "Print the fully resolved configuration as JSON and exit");

  // Global knobs (override config-file values; env vars MYOFIT_* sit between).
  app.add_option("--seed", config.seed, "Seed for every randomized stage");
  app.add_option("--threads", config.threads, "Worker thread cap");

  std::string out = "out.txt";
  std::string train_path, test_path, data_path, design_path, emulator_path;
  std::string out_dir = ".";
  std::string curve_prefix, result_path;
  std::vector<double> theta_values;

  CLI::App* design = app.add_subcommand("design", "Emit a Sobol design (theta columns)");
  design->add_option("--n", config.design_n, "Number of points");
  design->add_option("--dim", config.design_dim, "Dimension");
  design->add_option("--skip", config.design_skip, "Leading sequence points to drop");
  design->add_option("--seed-index", config.seed_index,
                     "Extra offset into the sequence (design extension)");
  design->add_option("--lo", config.box_lo, "Box lower bound");
  design->add_option("--hi", config.box_hi, "Box upper bound");
  design->add_option("--out", out, "Output file")->required();

  CLI::App* simulate = app.add_subcommand("simulate", "Run the analytic forward model");
  simulate->add_option("--design", design_path, "Design file (theta columns)")->required();
  simulate->add_option("--out", out, "Dataset output file")->required();

  CLI::App* fit = app.add_subcommand("fit", "Fit and persist an output emulator");
  fit->add_option("--train", train_path, "Training dataset")->required();
  fit->add_option("--interp", config.interp, "Interpolator: local | lowrank");
  fit->add_option("--k", config.neighbors, "Local-GP neighbour count");
  fit->add_option("--nr", config.lowrank_subsample, "Low-rank subsample size");
  fit->add_option("--rank", config.lowrank_rank_output, "Low-rank basis rank");
  fit->add_option("--out", out, "Emulator output file")->required();

  CLI::App* infer_cmd = app.add_subcommand("infer", "Infer parameters from observed data");
  infer_cmd->add_option("--data", data_path, "Observed-data file (y1..y25)")->required();
  infer_cmd->add_option("--train", train_path, "Training dataset")->required();
  infer_cmd->add_option("--emulator", emulator_path, "Persisted emulator (optional)");
  infer_cmd->add_option("--method", config.method, "Emulation target: out | loss");
  infer_cmd->add_option("--interp", config.interp, "Interpolator: local | lowrank");
  infer_cmd->add_option("--loss", config.loss, "Loss function: euc | mah");
  infer_cmd->add_option("--k", config.neighbors, "Local-GP neighbour count");
  infer_cmd->add_option("--nr", config.lowrank_subsample, "Low-rank subsample size");
  infer_cmd->add_option("--trial-points", config.trial_points, "Scatter points");
  infer_cmd->add_option("--stage-one", config.stage_one_points, "Stage-one points");
  infer_cmd->add_option("--starts", config.starts, "Start budget");
  infer_cmd->add_option("--max-iter", config.max_local_iterations, "Local solver cap");
  infer_cmd->add_option("--out", out, "Result output file");
  infer_cmd->add_option("--curves", curve_prefix, "Also write curve files at this prefix");

  CLI::App* bench = app.add_subcommand("bench", "Run the 8-combination benchmark");
  bench->add_option("--train", train_path, "Training dataset")->required();
  bench->add_option("--test", test_path, "Test dataset (theta truth + outputs)")->required();
  bench->add_option("--out-dir", out_dir, "Report directory");
  bench->add_option("--cases", config.bench_cases, "Test cases to use");
  bench->add_flag("--desk-scale,!--full-scale", config.bench_desk_scale,
                  "Use desk-scale knobs (default) or the full-scale config values");

  CLI::App* curves = app.add_subcommand("curves", "Emit stretch-stress curves");
  curves->add_option("--theta", theta_values, "Four parameter values")->delimiter(',');
  curves->add_option("--result", result_path, "Inference result file (adds CI bands)");
  curves->add_option("--grid-lo", config.curve_lo, "Smallest stretch");
  curves->add_option("--grid-hi", config.curve_hi, "Largest stretch");
  curves->add_option("--grid-n", config.curve_points, "Grid size");
  curves->add_option("--out", out, "Output prefix")->required();

  // Resolution order: config file, then environment, then CLI flags.
  app.preparse_callback([&](std::size_t) {
    if (!config_path.empty()) {
      try {
        config_from_json(json::parse(mf::io::read_file(config_path)), config);
      } catch (const json::exception& e) {
        throw CLI::ValidationError("--config", e.what());
      }
    }
    apply_env_overrides(config);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  } catch (const mf::Error& e) {
    std::cerr << "error: " << e.what() << "\n"
              << error_record("config", e.what()).dump() << "\n";
    return kExitConfig;
  }

  try {
    validate_choices(config);
    if (emit_config) {
      std::cout << config_to_json(config).dump(2) << "\n";
      return 0;
    }
    if (design->parsed()) {
      cmd_design(config, out);
    } else if (simulate->parsed()) {
      cmd_simulate(config, design_path, out);
    } else if (fit->parsed()) {
      cmd_fit(config, train_path, out);
    } else if (infer_cmd->parsed()) {
      cmd_infer(config, data_path, train_path, emulator_path, out, curve_prefix);
    } else if (bench->parsed()) {
      cmd_bench(config, train_path, test_path, out_dir);
    } else if (curves->parsed()) {
      cmd_curves(config, theta_values, result_path, out);
    } else {
      std::cout << app.help();
    }
  } catch (const mf::DataError& e) {
    std::cerr << "error: " << e.what() << "\n" << error_record("data", e.what()).dump() << "\n";
    return kExitData;
  } catch (const mf::DomainError& e) {
    std::cerr << "error: " << e.what() << "\n"
              << error_record("config", e.what()).dump() << "\n";
    return kExitConfig;
  } catch (const mf::Error& e) {
    std::cerr << "error: " << e.what() << "\n"
              << error_record("numeric", e.what()).dump() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n"
              << error_record("numeric", e.what()).dump() << "\n";
    return kExitNumeric;
  }
  return 0;
}
