#pragma once

#include <stdexcept>
#include <string>

namespace mtlfault {

/// Input violates a documented precondition or invariant.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Network admittance system has no unique solution.
class DegenerateNetworkError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Ground-loop current is zero, so V/I is undefined.
class UndefinedImpedanceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InsufficientPixelsError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Design matrix is rank deficient; the message names the dependent columns.
class RankError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Kernel matrix could not be factorized even at maximum jitter.
class ConditioningError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Training produced a non-finite loss or an unsolvable step.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A pipeline stage needs an artifact that an earlier stage has not produced.
class MissingArtifactError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mtlfault
