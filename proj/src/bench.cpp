/*!
 * This file is part of myofit, a library for emulation-based parameter
 * inference in anisotropic hyperelastic myocardium models.
 *
 * Licensed under the Apache License Version 2.0. See LICENSE file in the
 * project root for license information.
 */
#include "myofit/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <sstream>
#include <thread>
#include <utility>

#include <json.hpp>

#include "myofit/errors.hpp"
#include "myofit/io.hpp"

namespace myofit::bench {

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t combo, std::uint64_t kase) {
  std::uint64_t z = seed ^ (combo * 0x9e3779b97f4a7c15ULL) ^ (kase * 0xbf58476d1ce4e5b9ULL);
  z ^= z >> 30;
  z *= 0x94d049bb133111ebULL;
  z ^= z >> 27;
  return z;
}

}  // namespace

std::string MethodCombo::label() const {
  std::string text = interpolator == emulate::Interpolator::lowrank ? "LR" : "LOC";
  text += framework == Framework::output ? "-Out" : "-Loss";
  text += loss == emulate::LossFamily::mahalanobis ? "-Mah" : "-Euc";
  return text;
}

std::array<MethodCombo, 8> all_combos() {
  using emulate::Interpolator;
  using emulate::LossFamily;
  return {{
      {Interpolator::lowrank, Framework::output, LossFamily::mahalanobis},
      {Interpolator::lowrank, Framework::output, LossFamily::euclidean},
      {Interpolator::lowrank, Framework::loss, LossFamily::mahalanobis},
      {Interpolator::lowrank, Framework::loss, LossFamily::euclidean},
      {Interpolator::local, Framework::output, LossFamily::mahalanobis},
      {Interpolator::local, Framework::output, LossFamily::euclidean},
      {Interpolator::local, Framework::loss, LossFamily::mahalanobis},
      {Interpolator::local, Framework::loss, LossFamily::euclidean},
  }};
}

BenchConfig BenchConfig::desk_scale() {
  BenchConfig config;

  config.local_optimizer.strategy = infer::Strategy::global_search;
  config.local_optimizer.trial_points = 96;
  config.local_optimizer.stage_one_points = 32;
  config.local_optimizer.starts = 4;
  config.local_optimizer.max_local_iterations = 25;

  config.lowrank_optimizer.strategy = infer::Strategy::cg_multistart;
  config.lowrank_optimizer.starts = 10;
  config.lowrank_optimizer.max_local_iterations = 40;

  config.local_emulator.interpolator = emulate::Interpolator::local;
  config.local_emulator.local.neighbor_count = 48;

  config.lowrank_emulator.interpolator = emulate::Interpolator::lowrank;
  config.lowrank_emulator.lowrank_subsample = 512;
  config.lowrank_emulator.lowrank_rank_output = 256;
  config.lowrank_emulator.lowrank_rank_loss = 128;

  return config;
}

BenchReport run_benchmark(const forward::TrainingSet& train, const forward::TrainingSet& test,
                          std::span<const MethodCombo> combos, const BenchConfig& config) {
  train.validate();
  test.validate();
  if (combos.empty()) {
    throw DomainError("benchmark: no method combinations requested");
  }

  auto shared_train = std::make_shared<const forward::TrainingSet>(train);

  // Shared precomputations: the Mahalanobis covariance, and one low-rank
  // output emulator per seed (its predictions are immutable, so every
  // case can share it).
  const bool needs_mahalanobis =
      std::any_of(combos.begin(), combos.end(), [](const MethodCombo& c) {
        return c.loss == emulate::LossFamily::mahalanobis;
      });
  emulate::LossSpec mahalanobis = emulate::LossSpec::euclidean();
  if (needs_mahalanobis) {
    mahalanobis = emulate::LossSpec::mahalanobis(emulate::compute_output_covariance(train));
  }
  const emulate::LossSpec euclidean = emulate::LossSpec::euclidean(1.0);

  std::shared_ptr<const emulate::OutputEmulator> lowrank_outputs;
  if (std::any_of(combos.begin(), combos.end(), [](const MethodCombo& c) {
        return c.interpolator == emulate::Interpolator::lowrank &&
               c.framework == Framework::output;
      })) {
    emulate::EmulatorConfig cfg = config.lowrank_emulator;
    cfg.seed = config.seed;
    lowrank_outputs = std::make_shared<const emulate::OutputEmulator>(
        emulate::OutputEmulator::fit(shared_train, cfg));
  }

  BenchReport report;
  report.combos.assign(combos.begin(), combos.end());
  report.test_theta = test.theta;
  report.seed = config.seed;
  const Eigen::Index n_cases = test.size();
  report.cells.resize(combos.size());
  for (auto& row : report.cells) {
    row.resize(static_cast<std::size_t>(n_cases));
  }

  const auto run_cell = [&](std::size_t combo_idx, Eigen::Index case_idx) -> CaseResult {
    const MethodCombo& combo = report.combos[combo_idx];
    const Eigen::VectorXd y0 = test.outputs.row(case_idx).transpose();
    const emulate::LossSpec& loss_spec =
        combo.loss == emulate::LossFamily::mahalanobis ? mahalanobis : euclidean;

    CaseResult cell;
    try {
      infer::OptimizerConfig opt = combo.interpolator == emulate::Interpolator::local
                                       ? config.local_optimizer
                                       : config.lowrank_optimizer;
      opt.seed = mix_seed(config.seed, combo_idx, static_cast<std::uint64_t>(case_idx));

      infer::LossFn objective;
      std::shared_ptr<const emulate::OutputEmulator> local_outputs;
      std::shared_ptr<const emulate::LossEmulator> loss_emulator;

      if (combo.framework == Framework::output) {
        std::shared_ptr<const emulate::OutputEmulator> outputs;
        if (combo.interpolator == emulate::Interpolator::lowrank) {
          outputs = lowrank_outputs;
        } else {
          // Fresh per case: the warm-start state of the local surrogates
          // must not leak across cases, or scheduling would change results.
          emulate::EmulatorConfig cfg = config.local_emulator;
          cfg.seed = config.seed;
          local_outputs = std::make_shared<const emulate::OutputEmulator>(
              emulate::OutputEmulator::fit(shared_train, cfg));
          outputs = local_outputs;
        }
        objective = [outputs, y0, loss_spec](const Eigen::VectorXd& theta) {
          return outputs->surrogate_loss(theta, y0, loss_spec);
        };
      } else {
        emulate::EmulatorConfig cfg = combo.interpolator == emulate::Interpolator::local
                                          ? config.local_emulator
                                          : config.lowrank_emulator;
        cfg.seed = config.seed;
        loss_emulator = std::make_shared<const emulate::LossEmulator>(
            emulate::LossEmulator::fit(shared_train, y0, loss_spec, cfg));
        objective = [loss_emulator](const Eigen::VectorXd& theta) {
          return loss_emulator->predict_mean(theta);
        };
      }

      const infer::InferenceResult result = infer::minimize(objective, opt);
      cell.theta_hat = result.theta_hat;
      cell.loss_at_optimum = result.loss;
      cell.function_evaluations = result.function_evaluations;
      const Eigen::VectorXd truth = test.theta.row(case_idx).transpose();
      cell.mse = (result.theta_hat - truth).squaredNorm() /
                 static_cast<double>(truth.size());
    } catch (const Error& e) {
      cell.failure_reason = e.what();
    }
    return cell;
  };

  struct Task {
    std::size_t combo;
    Eigen::Index kase;
  };
  std::vector<Task> tasks;
  tasks.reserve(combos.size() * static_cast<std::size_t>(n_cases));
  for (std::size_t c = 0; c < combos.size(); ++c) {
    for (Eigen::Index i = 0; i < n_cases; ++i) {
      tasks.push_back({c, i});
    }
  }

  const int threads = std::max(1, config.threads);
  if (threads == 1) {
    for (const Task& task : tasks) {
      report.cells[task.combo][static_cast<std::size_t>(task.kase)] =
          run_cell(task.combo, task.kase);
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (;;) {
          const std::size_t i = next.fetch_add(1);
          if (i >= tasks.size()) break;
          report.cells[tasks[i].combo][static_cast<std::size_t>(tasks[i].kase)] =
              run_cell(tasks[i].combo, tasks[i].kase);
        }
      });
    }
    for (auto& worker : pool) {
      worker.join();
    }
  }
  return report;
}

std::vector<ComboSummary> summarize(const BenchReport& report) {
  std::vector<ComboSummary> rows;
  rows.reserve(report.combos.size());
  for (std::size_t c = 0; c < report.combos.size(); ++c) {
    ComboSummary row;
    row.label = report.combos[c].label();
    std::vector<double> mses;
    for (const CaseResult& cell : report.cells[c]) {
      if (cell.mse) {
        mses.push_back(*cell.mse);
      } else {
        ++row.failures;
      }
    }
    if (!mses.empty()) {
      row.median = infer::quantile_type7(mses, 0.5);
      row.q1 = infer::quantile_type7(mses, 0.25);
      row.q3 = infer::quantile_type7(mses, 0.75);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string format_summary(const std::vector<ComboSummary>& rows) {
  std::ostringstream out;
  out << "method        median       q1           q3           failures\n";
  for (const ComboSummary& row : rows) {
    out << row.label;
    for (std::size_t pad = row.label.size(); pad < 14; ++pad) out << ' ';
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), "%-12.6f %-12.6f %-12.6f %d\n", row.median,
                  row.q1, row.q3, row.failures);
    out << buffer;
  }
  return out.str();
}

std::string serialize_report(const BenchReport& report) {
  nlohmann::json doc;
  doc["schema"] = "myofit-bench/1";
  doc["seed"] = report.seed;
  nlohmann::json combos = nlohmann::json::array();
  const std::vector<ComboSummary> rows = summarize(report);
  for (std::size_t c = 0; c < report.combos.size(); ++c) {
    nlohmann::json combo;
    combo["label"] = report.combos[c].label();
    combo["median"] = rows[c].median;
    combo["q1"] = rows[c].q1;
    combo["q3"] = rows[c].q3;
    combo["failures"] = rows[c].failures;
    nlohmann::json cases = nlohmann::json::array();
    for (std::size_t i = 0; i < report.cells[c].size(); ++i) {
      const CaseResult& cell = report.cells[c][i];
      nlohmann::json entry;
      entry["case"] = i;
      if (cell.mse) {
        entry["mse"] = *cell.mse;
        entry["theta_hat"] = {cell.theta_hat[0], cell.theta_hat[1], cell.theta_hat[2],
                              cell.theta_hat[3]};
        entry["loss"] = cell.loss_at_optimum;
        entry["evaluations"] = cell.function_evaluations;
      } else {
        entry["failure"] = cell.failure_reason;
      }
      cases.push_back(std::move(entry));
    }
    combo["cases"] = std::move(cases);
    combos.push_back(std::move(combo));
  }
  doc["combos"] = std::move(combos);
  return doc.dump(2) + "\n";
}

void write_mse_columns(const std::filesystem::path& directory, const BenchReport& report) {
  for (std::size_t c = 0; c < report.combos.size(); ++c) {
    std::string content;
    for (const CaseResult& cell : report.cells[c]) {
      if (cell.mse) {
        content += io::format_double(*cell.mse);
      } else {
        content += "failed " + cell.failure_reason;
      }
      content += '\n';
    }
    io::atomic_write(directory / (report.combos[c].label() + ".mse.txt"), content);
  }
}

}  // namespace myofit::bench
