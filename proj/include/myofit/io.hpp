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
#include <vector>

namespace myofit::io {

/// Shortest decimal representation that parses back to the same double
/// (at most 17 significant digits).
std::string format_double(double value);

/// Writes `content` atomically: temp file in the target directory, then
/// rename over the destination.
void atomic_write(const std::filesystem::path& path, const std::string& content);

std::string read_file(const std::filesystem::path& path);

/// Splits a delimiter-separated line; accepts comma or whitespace.
std::vector<std::string> split_fields(const std::string& line);

/// Strict double parse; throws DataError naming `context` on failure.
double parse_double(const std::string& field, const std::string& context);

}  // namespace myofit::io
