#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace dmfg {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite numbers, out-of-range parameters, malformed tables.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// An operation was called on data that violates its documented precondition.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// An iterative method hit its iteration cap. Carries the residual history so
/// callers can see whether it was stalling or diverging.
class NonConvergence : public Error {
 public:
  NonConvergence(const std::string& what, std::vector<double> history)
      : Error(what), history_(std::move(history)) {}

  const std::vector<double>& history() const noexcept { return history_; }
  double last_residual() const noexcept {
    return history_.empty() ? -1.0 : history_.back();
  }

 private:
  std::vector<double> history_;
};

}  // namespace dmfg
