#pragma once

#include <stdexcept>
#include <string>

namespace adprog {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data (files, matrices, labels).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Numerical breakdown: failed factorizations, non-finite objectives, divergence.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Invalid or incomplete run configuration. The CLI maps this to exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace adprog
