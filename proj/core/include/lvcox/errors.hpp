#pragma once

#include <stdexcept>
#include <string>

namespace lvcox {

// Base of every exception thrown by the library. Callers that only need to
// distinguish "bad data" from "bad usage" can catch the two intermediate
// classes below.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Precondition violations: wrong shapes, out-of-range arguments.
class UsageError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public UsageError {
 public:
  using UsageError::UsageError;
};

class DomainError : public UsageError {
 public:
  using UsageError::UsageError;
};

// Runtime failures that depend on the data being processed.
class RuntimeFailure : public Error {
 public:
  using Error::Error;
};

class NumericError : public RuntimeFailure {
 public:
  using RuntimeFailure::RuntimeFailure;
};

class BudgetError : public RuntimeFailure {
 public:
  BudgetError(const std::string& what, double required)
      : RuntimeFailure(what), required_(required) {}
  double required() const noexcept { return required_; }

 private:
  double required_;
};

class UndefinedMetricError : public RuntimeFailure {
 public:
  using RuntimeFailure::RuntimeFailure;
};

class DataError : public RuntimeFailure {
 public:
  using RuntimeFailure::RuntimeFailure;
};

class SchemaError : public DataError {
 public:
  using DataError::DataError;
};

class VersionError : public DataError {
 public:
  using DataError::DataError;
};

class ConvergenceError : public RuntimeFailure {
 public:
  using RuntimeFailure::RuntimeFailure;
};

// Throws NumericError with `context` when `value` is NaN or infinite.
double require_finite(double value, const std::string& context);

}  // namespace lvcox
