#pragma once

#include <stdexcept>
#include <string>

namespace action4d {

/// Invalid or inconsistent configuration: calibration, weights, run config.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Missing or malformed input data (depth frames, grid files, label files).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller broke an operation's precondition (shape mismatch, ungated edge).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace action4d
