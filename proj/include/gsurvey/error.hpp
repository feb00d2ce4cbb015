#pragma once

#include <stdexcept>
#include <string>

namespace gsurvey {

// Error hierarchy. The CLI maps each family onto an exit code:
// UsageError -> 1, DataError -> 2, NumericError -> 3.

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

// Bad input data: malformed files, shapes that do not line up, out-of-domain
// arguments.
class DataError : public Error {
 public:
  using Error::Error;
};

class ParameterError : public DataError {
 public:
  using DataError::DataError;
};

class ShapeError : public DataError {
 public:
  using DataError::DataError;
};

class ParseError : public DataError {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : DataError(source + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class DuplicateRecordError : public DataError {
 public:
  using DataError::DataError;
};

class IncompleteDataError : public DataError {
 public:
  using DataError::DataError;
};

// Problem too large for an exact method.
class CapacityError : public DataError {
 public:
  using DataError::DataError;
};

// Computation ran but produced nothing usable.
class NumericError : public Error {
 public:
  using Error::Error;
};

class DegeneracyError : public NumericError {
 public:
  using NumericError::NumericError;
};

class ReliabilityError : public NumericError {
 public:
  using NumericError::NumericError;
};

}  // namespace gsurvey
