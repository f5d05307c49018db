#pragma once

#include <stdexcept>
#include <string>

namespace gsmrl {

/// Base exception for all precondition and runtime failures raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a covariance block cannot be factorized.
class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, double condition_estimate)
      : Error(what), condition_estimate_(condition_estimate) {}

  double condition_estimate() const noexcept { return condition_estimate_; }

 private:
  double condition_estimate_;
};

/// Raised when a surrogate cannot be fitted; carries the offending class (-1 if not class specific).
class FitError : public Error {
 public:
  FitError(const std::string& what, int class_id) : Error(what), class_id_(class_id) {}

  int class_id() const noexcept { return class_id_; }

 private:
  int class_id_;
};

/// Raised for malformed configuration or usage. The CLI maps it to exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace gsmrl
