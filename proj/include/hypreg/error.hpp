#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace hypreg {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid user-supplied parameter (non-positive speed, bad grid, ...).
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// A configuration that violates a structural assumption (vanishing boundary
/// factor, CFL violation, epsilon outside the admissible interval).
class ConfigurationError : public Error {
 public:
  using Error::Error;
};

/// Domain violation for an analytic formula (e.g. tau0 with k2 >= 0).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A signal was asked for something it cannot provide (derivatives of noise).
class SignalError : public Error {
 public:
  using Error::Error;
};

/// Iterative solver failed to contract. Carries the update history.
class SolverError : public Error {
 public:
  SolverError(const std::string& what, std::vector<double> history)
      : Error(what), history_(std::move(history)) {}
  const std::vector<double>& history() const noexcept { return history_; }

 private:
  std::vector<double> history_;
};

/// Non-finite values appeared during a time simulation.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, double last_valid_time)
      : Error(what), last_valid_time_(last_valid_time) {}
  double last_valid_time() const noexcept { return last_valid_time_; }

 private:
  double last_valid_time_;
};

}  // namespace hypreg
