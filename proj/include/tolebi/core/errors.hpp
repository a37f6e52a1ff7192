// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace tolebi {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Simulator state or training loss left the finite range.
class NumericalDivergence : public Error {
 public:
  using Error::Error;
};

/// Bad or unknown configuration field; the message names the field.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  DimensionMismatch(const std::string& what, long expected, long actual)
      : Error(what + ": expected " + std::to_string(expected) + ", got " + std::to_string(actual)) {}
};

class IoError : public Error {
 public:
  using Error::Error;
};

class VersionMismatch : public Error {
 public:
  VersionMismatch(std::uint64_t expected, std::uint64_t found)
      : Error("checkpoint format version " + std::to_string(found) +
              " is not supported (this build reads version " + std::to_string(expected) + ")") {}
};

class EmptyTrace : public Error {
 public:
  EmptyTrace() : Error("velocity trace is empty") {}
};

inline void check_dim(const char* what, long expected, long actual) {
  if (expected != actual) throw DimensionMismatch(what, expected, actual);
}

}  // namespace tolebi
