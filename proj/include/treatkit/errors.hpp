#pragma once

#include <stdexcept>
#include <string>

namespace treatkit {

// Shapes or lengths of paired inputs disagree.
struct DimensionError : std::runtime_error {
  explicit DimensionError(const std::string& msg) : std::runtime_error(msg) {}
};

// A configuration value is outside its valid range.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// A treatment arm lacks the rows an estimator needs.
struct InsufficientOverlapError : std::runtime_error {
  explicit InsufficientOverlapError(const std::string& msg) : std::runtime_error(msg) {}
};

// Input data failed validation (non-finite values, bad columns, ...).
struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Filesystem or stream failure.
struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace treatkit
