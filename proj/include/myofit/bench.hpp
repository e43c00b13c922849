/*!
 * This file is part of myofit, a library for emulation-based parameter
 * inference in anisotropic hyperelastic myocardium models.
 *
 * Licensed under the Apache License Version 2.0. See LICENSE file in the
 * project root for license information.
 */
#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "myofit/emulate.hpp"
#include "myofit/infer.hpp"

namespace myofit::bench {

enum class Framework { output, loss };

struct MethodCombo {
  emulate::Interpolator interpolator;
  Framework framework;
  emulate::LossFamily loss;

  /// Short label, e.g. "LOC-Out-Euc".
  std::string label() const;
};

/// The eight method combinations, in presentation order: low-rank before
/// local, output emulation before loss emulation, Mahalanobis before
/// Euclidean.
std::array<MethodCombo, 8> all_combos();

struct CaseResult {
  std::optional<double> mse;           // parameter-space MSE, or absent on failure
  std::string failure_reason;          // non-empty iff mse is absent
  Eigen::Vector4d theta_hat = Eigen::Vector4d::Zero();
  double loss_at_optimum = 0.0;
  long function_evaluations = 0;
};

struct ComboSummary {
  std::string label;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  int failures = 0;
  double seconds = 0.0;  // wall time spent on this combo (diagnostic only)
};

struct BenchReport {
  std::vector<MethodCombo> combos;
  std::vector<std::vector<CaseResult>> cells;  // [combo][case]
  Eigen::MatrixXd test_theta;                  // ground truth per case
  std::uint64_t seed = 0;
};

struct BenchConfig {
  /// Inference knobs per interpolation path. The defaults are scaled to a
  /// single desk-class core: scatter search for the local path, 50-start
  /// conjugate gradients would dominate the budget at full strength.
  infer::OptimizerConfig local_optimizer;
  infer::OptimizerConfig lowrank_optimizer;
  emulate::EmulatorConfig local_emulator;
  emulate::EmulatorConfig lowrank_emulator;
  std::uint64_t seed = 0;
  int threads = 1;

  static BenchConfig desk_scale();
};

/// Runs every requested combo against every test case: the test outputs act
/// as observed data, the inferred parameters are scored by the
/// dimension-normalized parameter-space MSE |theta_hat - theta_true|^2 / 4.
/// Per-case failures are recorded with their reason, never dropped.
BenchReport run_benchmark(const forward::TrainingSet& train,
                          const forward::TrainingSet& test,
                          std::span<const MethodCombo> combos, const BenchConfig& config);

/// Median and quartiles (type-7) per combo, in input order.
std::vector<ComboSummary> summarize(const BenchReport& report);

/// Human-readable summary table.
std::string format_summary(const std::vector<ComboSummary>& rows);

/// Machine-readable report (deterministic content; excludes wall times).
std::string serialize_report(const BenchReport& report);

/// Per-combo MSE column files (one value per line, `failed <reason>` rows
/// for failures), suitable for external boxplotting.
void write_mse_columns(const std::filesystem::path& directory, const BenchReport& report);

}  // namespace myofit::bench
