#pragma once

#include <stdexcept>
#include <string>

namespace numeraire {

// Base of every error raised by the library. The CLI maps the two families
// below onto distinct exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input: malformed configs, invalid specs, mismatched dimensions.
class InputError : public Error {
 public:
  using Error::Error;
};

// A numerical routine could not deliver a result at the requested accuracy.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public InputError {
 public:
  using InputError::InputError;
};

class InvalidConstraint : public InputError {
 public:
  using InputError::InputError;
};

// The nullspace of the covariance is not contained in the constraint set.
class NullspaceNotContained : public InputError {
 public:
  using InputError::InputError;
};

class InvalidSpec : public InputError {
 public:
  using InputError::InputError;
};

class UnsupportedSignalModel : public InputError {
 public:
  using InputError::InputError;
};

class GridMismatch : public InputError {
 public:
  using InputError::InputError;
};

class ConfigError : public InputError {
 public:
  using InputError::InputError;
};

class NonNestedPartitions : public InputError {
 public:
  using InputError::InputError;
};

class NonConvergence : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class InfeasibleConstraint : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class DensityFloorHit : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class QuadratureUnderResolved : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace numeraire
