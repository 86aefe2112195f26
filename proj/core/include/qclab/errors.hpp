#pragma once

#include <stdexcept>
#include <string>

namespace qclab {

/// Bad scenario/grid/tool configuration (exit code 2 in the CLI).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Geometry leaving the periodic cell (disk or bump support escaping).
class DomainError : public std::runtime_error {
 public:
  explicit DomainError(const std::string& what) : std::runtime_error(what) {}
};

/// Coefficient bound |mu|+|nu| (or |lambda|) reaching 1.
class EllipticityError : public std::runtime_error {
 public:
  explicit EllipticityError(const std::string& what) : std::runtime_error(what) {}
};

/// Fixed-point iteration ran out of iterations (exit code 3 in the CLI).
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double last_residual)
      : std::runtime_error(what), last_residual(last_residual) {}
  double last_residual = 0.0;
};

/// Jacobian floor breached on too many samples, or a degenerate input field.
class DegeneracyError : public std::runtime_error {
 public:
  explicit DegeneracyError(const std::string& what) : std::runtime_error(what) {}
};

/// Random pair sampling kept hitting coincident map values.
class SamplingError : public std::runtime_error {
 public:
  explicit SamplingError(const std::string& what) : std::runtime_error(what) {}
};

/// Filesystem trouble while reading or emitting artifacts.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace qclab
