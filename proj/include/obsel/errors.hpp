#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace obsel {

/// Bad dimensions, out-of-range indices, invalid configuration values.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Input outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Non-finite values, singular linear systems.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Newton failure inside an implicit step.
class IntegrationError : public NumericalError {
 public:
  IntegrationError(const std::string& what, std::size_t step, double residual)
      : NumericalError(what), step_(step), residual_(residual) {}

  std::size_t step() const noexcept { return step_; }
  double residual() const noexcept { return residual_; }

 private:
  std::size_t step_;
  double residual_;
};

/// Malformed configuration or data document.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Enumeration too large to run.
class CapacityError : public std::length_error {
 public:
  using std::length_error::length_error;
};

}  // namespace obsel
