#pragma once

#include <stdexcept>
#include <string>

namespace optolever {

/// Invalid physical parameters or violated type invariants.
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Quadrature, integrator or other numerical failure.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input data unsuitable for the requested estimator.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Least-squares fit failed or is degenerate.
class FitError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Malformed or inconsistent run configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ParameterError(message);
}

}  // namespace detail
}  // namespace optolever
