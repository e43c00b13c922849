/*!
 * This file is part of myofit, a library for emulation-based parameter
 * inference in anisotropic hyperelastic myocardium models.
 *
 * Licensed under the Apache License Version 2.0. See LICENSE file in the
 * project root for license information.
 */
#pragma once

#include <filesystem>
#include <string>

#include "myofit/emulate.hpp"
#include "myofit/infer.hpp"

namespace myofit::persist {

inline constexpr const char* kEmulatorSchema = "myofit-emulator/1";
inline constexpr const char* kResultSchema = "myofit-result/1";

/// Persists a fitted output emulator. Local-GP emulators store the dataset
/// reference plus configuration (their models are refit per query);
/// low-rank emulators additionally store subsample indices, retained
/// eigenpairs and weights per output.
void save_output_emulator(const std::filesystem::path& file,
                          const emulate::OutputEmulator& emulator,
                          const std::string& dataset_path);

/// Restores an emulator. `dataset_override`, when non-empty, replaces the
/// stored dataset path. Restored low-rank models support mean prediction
/// (which is all inference needs); predictive variances require a refit.
emulate::OutputEmulator load_output_emulator(const std::filesystem::path& file,
                                             const std::string& dataset_override = {});

/// Inference artifact: theta_hat, loss, optima, Hessian, covariance and
/// deterministic diagnostics. Wall time is deliberately excluded so that
/// artifacts are bit-identical across reruns at a fixed seed.
std::string serialize_result(const infer::InferenceResult& result);
void save_result(const std::filesystem::path& file, const infer::InferenceResult& result);

/// Curve file: header plus one `lambda,sigma[,ci_lower,ci_upper]` row per
/// stretch.
void save_curve(const std::filesystem::path& file,
                const std::vector<material::CurvePoint>& curve);
void save_curve_with_bands(const std::filesystem::path& file,
                           const std::vector<infer::CurveBand>& bands);

}  // namespace myofit::persist
