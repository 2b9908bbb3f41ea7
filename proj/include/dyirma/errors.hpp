#pragma once

#include <stdexcept>
#include <string>

namespace dyirma {

// Error families. The CLI maps them to stable exit codes:
//   ConfigError -> 2, data errors (Io/Format/Validation) -> 3,
//   numerical/domain errors -> 4, ConvergenceGateError -> 5.

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Covariance proposal or spec fails the Cholesky positive-definite check.
// Samplers treat this as a rejected proposal.
struct PdViolationError : NumericalError {
  using NumericalError::NumericalError;
};

// Every importance weight of a segment underflowed to zero.
struct DegenerateWeightsError : NumericalError {
  using NumericalError::NumericalError;
};

struct ConvergenceGateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace dyirma
