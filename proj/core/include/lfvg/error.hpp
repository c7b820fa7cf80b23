#pragma once

#include <stdexcept>
#include <string>

namespace lfvg {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument does not hold (shape, range, finiteness).
class InvalidInputError : public Error {
 public:
  using Error::Error;
};

/// A feature store or checkpoint could not be read.
class LoadError : public Error {
 public:
  using Error::Error;
};

/// A caller broke a contract that cannot be expressed as an argument check,
/// e.g. a loss function that is not deterministic under pinned seeds.
class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// A temporal proposal has no frames to sample from; the caller drops it.
class SkipProposalError : public Error {
 public:
  using Error::Error;
};

/// No usable training sample could be built from the dataset.
class TrainingDataError : public Error {
 public:
  using Error::Error;
};

/// A loss or gradient became non-finite during optimization.
class NumericError : public Error {
 public:
  NumericError(const std::string& what, long step) : Error(what), step_(step) {}
  long step() const { return step_; }

 private:
  long step_;
};

/// Queries reference videos that are not present.
class EvaluationError : public Error {
 public:
  using Error::Error;
};

}  // namespace lfvg
