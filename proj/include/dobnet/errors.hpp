/// @file errors.hpp
/// @brief Exception types shared by every dobnet module.

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dobnet {

/// A caller broke a documented precondition (shape mismatch, bad argument).
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A NaN or infinity showed up where only finite values are allowed.
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad configuration: unknown key, out-of-range value, unstable gain.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file. Carries the 1-based line number when known.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Checkpoint or record could not be loaded (I/O, version, architecture mismatch).
class LoadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The simulated vehicle left the finite / bounded region.
class DivergedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dobnet
