#pragma once

#include <stdexcept>
#include <string>

namespace brw {

// Exit-code contract: config problems -> 1, domain violations -> 2,
// numerical trouble -> 3.  Every thrown type maps onto one of these.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
  virtual int exit_code() const { return 2; }
  virtual ~Error() = default;
};

struct ConfigError : Error {
  using Error::Error;
  int exit_code() const override { return 1; }
};

struct DomainError : Error {
  using Error::Error;
};

struct UnsupportedLaw : DomainError {
  using DomainError::DomainError;
};

struct SizeLimit : DomainError {
  using DomainError::DomainError;
};

struct DegenerateFit : DomainError {
  using DomainError::DomainError;
};

struct NumericalFailure : Error {
  using Error::Error;
  int exit_code() const override { return 3; }
};

struct ToleranceNotMet : NumericalFailure {
  using NumericalFailure::NumericalFailure;
};

struct Unclassified : NumericalFailure {
  using NumericalFailure::NumericalFailure;
};

struct InsufficientHits : NumericalFailure {
  using NumericalFailure::NumericalFailure;
};

}  // namespace brw
