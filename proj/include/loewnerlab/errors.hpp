#pragma once

#include <stdexcept>
#include <string>

namespace loewnerlab {

/// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inputs that violate a documented precondition. Nothing has been computed.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Malformed scenario configuration: missing, mistyped or unknown keys.
class ConfigError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// A computation started on valid inputs but could not be completed.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class DomainError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class GridError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class SingularityError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class AdmissibilityError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class InsufficientReplicas : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class CollisionFailure : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class NumericalBlowup : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class StiffnessFailure : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class InversionFailure : public NumericalError {
 public:
  InversionFailure(const std::string& what, double time)
      : NumericalError(what), time_(time) {}
  /// Flow time at which the trajectory left the domain.
  double time() const noexcept { return time_; }

 private:
  double time_;
};

class FactorizationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class SupportError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// A tracked point was swallowed before the requested horizon.
/// `usable_until()` is the last time for which results are valid.
class EarlyStopError : public NumericalError {
 public:
  EarlyStopError(const std::string& what, double usable_until)
      : NumericalError(what), usable_until_(usable_until) {}
  double usable_until() const noexcept { return usable_until_; }

 private:
  double usable_until_;
};

/// Field evaluation failed while tracing a flow line.
class FieldEvaluationError : public NumericalError {
 public:
  FieldEvaluationError(const std::string& what, double arclength)
      : NumericalError(what), arclength_(arclength) {}
  double arclength() const noexcept { return arclength_; }

 private:
  double arclength_;
};

class TruncatedComparison : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace loewnerlab
