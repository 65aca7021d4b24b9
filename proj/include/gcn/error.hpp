#pragma once

#include <stdexcept>
#include <string>

namespace gcn {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Precondition or shape violation by the caller.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Malformed corpus input. `line()` is 1-based, 0 when not line-specific.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class EmptyCollectionError : public Error {
 public:
  using Error::Error;
};

/// Label outside an auxiliary slot's label set.
class EncodingError : public Error {
 public:
  using Error::Error;
};

/// Non-finite value reached a numeric kernel.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Metric that is undefined for the given input (e.g. AUC with one class).
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

/// Checkpoint load failures. Each failure mode has its own subclass.
class CheckpointError : public Error {
 public:
  using Error::Error;
};
class CheckpointVersionError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};
class CheckpointHeaderError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};
class CheckpointTruncatedError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};
class CheckpointShapeError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

}  // namespace gcn
