#pragma once

#include <stdexcept>
#include <string>

namespace netopt {

/// Base for every error raised by the library. The CLI maps the concrete
/// subclass to a process exit status.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Precondition violated by the caller (bad dimension, negative rate, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// The price trace does not hold enough rounds to read off the secant slope.
class InsufficientTrace : public Error {
 public:
  using Error::Error;
};

/// A numerical routine could not reach its stopping criterion.
class SolverFailure : public Error {
 public:
  using Error::Error;
};

/// Scenario document could not be parsed or failed validation.
class ScenarioError : public Error {
 public:
  using Error::Error;
};

/// A file could not be read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace netopt
