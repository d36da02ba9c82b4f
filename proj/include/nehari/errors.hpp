#pragma once

#include <stdexcept>
#include <string>

namespace nehari {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed lattice, potential or run configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A standing hypothesis on the problem data does not hold
/// (spectral gap around zero, periodicity of V or f, ...).
class HypothesisViolation : public Error {
 public:
  using Error::Error;
};

/// Argument outside the domain of an operation (e.g. u in E^- for the
/// Nehari residual, w off the unit sphere for the reduced functional).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// An iterative method ran out of iterations or stagnated.
class NonConvergence : public Error {
 public:
  using Error::Error;
};

/// Linear-algebra failure or an internal consistency audit that tripped.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace nehari
