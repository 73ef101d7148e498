#pragma once

#include <optional>
#include <stdexcept>
#include <string>

namespace mbflow {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on the caller's input was violated (bad dimensions,
/// nonpositive step, infeasible start point, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// An iterative solver (prox, Newton, coordinate descent) failed to reach its
/// tolerance within the iteration cap. Carries the flow time at which the
/// failure happened when it is known.
class SolverError : public Error {
 public:
  explicit SolverError(const std::string& what, std::optional<double> time = std::nullopt)
      : Error(time ? what + " (at t=" + std::to_string(*time) + ")" : what), time_(time) {}

  std::optional<double> time() const noexcept { return time_; }

 private:
  std::optional<double> time_;
};

/// The requested operation has no implementation for the given object, e.g.
/// a variance split that the problem family does not provide.
class Unsupported : public Error {
 public:
  using Error::Error;
};

}  // namespace mbflow
