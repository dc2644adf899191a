#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dcmg {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument lies outside the mathematical domain of an operation
/// (e.g. a reference voltage at or below v_min).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// The constant-power load cannot be supplied: the current balance has no
/// real root.
class InfeasibleOperatingPoint : public Error {
 public:
  using Error::Error;
};

class InvalidPlan : public Error {
 public:
  using Error::Error;
};

/// The regression matrix is numerically rank deficient.
class InsufficientExcitation : public Error {
 public:
  using Error::Error;
};

class SingularSensitivity : public Error {
 public:
  using Error::Error;
};

/// The Fisher information is singular; `direction()` is the (unit-norm, in
/// parameter coordinates) null-space direction that carries no information.
class SingularInformation : public Error {
 public:
  SingularInformation(const std::string& what, std::vector<double> direction)
      : Error(what), direction_(std::move(direction)) {}

  const std::vector<double>& direction() const noexcept { return direction_; }

 private:
  std::vector<double> direction_;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace dcmg
