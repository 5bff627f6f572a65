#pragma once

#include <stdexcept>
#include <string>

namespace diagan {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Matrix or vector dimensions disagree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Invalid user-supplied parameter (sizes, hyperparameters, configuration).
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Value outside the mathematical domain of a function.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Index or step outside of an allowed range.
class RangeError : public Error {
 public:
  using Error::Error;
};

/// A caller broke a documented precondition that cannot be a user input error
/// (stale gradient tape, unnormalized distribution, broken invariant).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// Too few recorded values to compute a windowed statistic.
class InsufficientWindow : public Error {
 public:
  using Error::Error;
};

/// Non-finite loss or gradient during training.
class TrainingDivergence : public Error {
 public:
  TrainingDivergence(const std::string& what, long step = -1)
      : Error(step >= 0 ? what + " (step " + std::to_string(step) + ")" : what),
        step_(step) {}

  long step() const noexcept { return step_; }

 private:
  long step_;
};

/// Iterative optimizer did not reach its tolerance within the iteration cap.
class OptimizationError : public Error {
 public:
  using Error::Error;
};

/// Rejection sampler acceptance rate stayed below its floor.
class StarvationError : public Error {
 public:
  using Error::Error;
};

/// File could not be read, written or parsed.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace diagan
