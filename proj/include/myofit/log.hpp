/*!
 * This file is part of myofit, a library for emulation-based parameter
 * inference in anisotropic hyperelastic myocardium models.
 *
 * Licensed under the Apache License Version 2.0. See LICENSE file in the
 * project root for license information.
 */
#pragma once

#include <functional>
#include <string>

namespace myofit {

using WarnHandler = std::function<void(const std::string&)>;

/// Emit a non-fatal diagnostic. Routed to stderr unless a handler is set.
void warn(const std::string& message);

/// Install a warning sink (tests use this to assert on warnings).
/// Passing nullptr restores the stderr default.
void set_warn_handler(WarnHandler handler);

}  // namespace myofit
