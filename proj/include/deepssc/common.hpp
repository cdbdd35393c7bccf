// Shared error types and small utilities.
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace deepssc {

// Bad user-supplied configuration (dimensions, ranges, missing keys).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Filesystem / parsing failures.
struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// A caller violated a documented precondition (unnormalized symbols,
// degenerate channel, shape mismatch at a module boundary).
struct ContractError : std::runtime_error {
  explicit ContractError(const std::string& msg) : std::runtime_error(msg) {}
};

// Training diverged (non-finite loss).
struct DivergenceError : std::runtime_error {
  explicit DivergenceError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace deepssc
