#pragma once

#include <stdexcept>
#include <string>

namespace ucd {

// Shape mismatch between operands of a tensor op.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Argument outside the mathematical domain of an op (log of a non-positive
// value, label index past the cardinality, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Caller broke a documented precondition.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Malformed checkpoint or binary file.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input data rejected by a validator (datasets, games, covariances).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Config file or override problem. Carries the offending line when known.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Iterative solver ran out of budget.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double final_grad_norm)
      : std::runtime_error(what), final_grad_norm_(final_grad_norm) {}
  double final_grad_norm() const { return final_grad_norm_; }

 private:
  double final_grad_norm_;
};

// A training loss went non-finite.
class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(const std::string& what, std::size_t step)
      : std::runtime_error(what), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

}  // namespace ucd
