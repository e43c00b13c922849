/*!
 * This file is part of myofit, a library for emulation-based parameter
 * inference in anisotropic hyperelastic myocardium models.
 *
 * Licensed under the Apache License Version 2.0. See LICENSE file in the
 * project root for license information.
 */
#include "myofit/log.hpp"

#include <iostream>
#include <mutex>
#include <utility>

namespace myofit {

namespace {
std::mutex g_mutex;
WarnHandler g_handler;
}  // namespace

void warn(const std::string& message) {
  std::scoped_lock lock(g_mutex);
  if (g_handler) {
    g_handler(message);
  } else {
    std::cerr << "[myofit] warning: " << message << '\n';
  }
}

void set_warn_handler(WarnHandler handler) {
  std::scoped_lock lock(g_mutex);
  g_handler = std::move(handler);
}

}  // namespace myofit
