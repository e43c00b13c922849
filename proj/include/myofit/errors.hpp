/*!
 * This file is part of myofit, a library for emulation-based parameter
 * inference in anisotropic hyperelastic myocardium models.
 *
 * Licensed under the Apache License Version 2.0. See LICENSE file in the
 * project root for license information.
 */
#pragma once

#include <stdexcept>
#include <string>

namespace myofit {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument violates an operation precondition (parameter outside the
/// admissible box, non-positive scale, bad neighbour count, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Invalid kinematics: the deformation gradient is not orientation
/// preserving (det F <= 0) or the material frame is degenerate.
class KinematicsError : public Error {
 public:
  using Error::Error;
};

/// An exponential term of the strain-energy function exceeded the overflow
/// guard. The message names the offending term.
class SaturationError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent data files (parse failures carry line numbers).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure: factorization breakdown, non-finite intermediate
/// values, or an optimizer that failed on every start.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace myofit
