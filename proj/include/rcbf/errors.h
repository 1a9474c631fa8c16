#pragma once

#include <stdexcept>
#include <string>

namespace rcbf {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dimension mismatches, invalid parameters and malformed config files.
class ConfigurationError : public Error {
 public:
  using Error::Error;
};

/// An argument lies outside the domain of a function (e.g. rho(y) for y < 0).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A robustness function has no positive linear lower bound.
class InvalidRobustnessFunction : public Error {
 public:
  using Error::Error;
};

/// inf_y rho(y) - y d is still decreasing at the search bound.
class UnboundedConjugate : public Error {
 public:
  using Error::Error;
};

/// Inverting a class-K function failed (target not bracketed).
class InversionError : public Error {
 public:
  using Error::Error;
};

/// The safety constraint has no solution at the evaluated state.
class InfeasibleAtState : public Error {
 public:
  using Error::Error;
};

/// The integrator produced a non-finite state.
class NumericBlowup : public Error {
 public:
  using Error::Error;
};

/// File-system failures; the message always carries the offending path.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace rcbf
