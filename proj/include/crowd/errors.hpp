#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace crowd {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad input: malformed data, inconsistent dimensions, values out of domain.
/// The CLI maps these to exit code 1.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class EmptyMatrix : public ValidationError {
 public:
  EmptyMatrix() : ValidationError("label matrix has no workers or no items") {}
};

class OutOfRangeLabel : public ValidationError {
 public:
  // worker and item are 0-based.
  OutOfRangeLabel(int worker, int item, int value)
      : ValidationError("label " + std::to_string(value) + " out of range at worker " +
                        std::to_string(worker) + ", item " + std::to_string(item)),
        worker_(worker),
        item_(item),
        value_(value) {}

  int worker() const { return worker_; }
  int item() const { return item_; }
  int value() const { return value_; }

 private:
  int worker_;
  int item_;
  int value_;
};

class DimensionMismatch : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class LengthMismatch : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class WeightLengthMismatch : public ValidationError {
 public:
  WeightLengthMismatch(std::size_t got, std::size_t expected)
      : ValidationError("weight vector has " + std::to_string(got) + " entries, expected " +
                        std::to_string(expected)) {}
};

class DomainError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class NotBinary : public ValidationError {
 public:
  NotBinary() : ValidationError("operation requires exactly two classes") {}
};

class ParseError : public ValidationError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : ValidationError("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class DuplicateLabel : public ValidationError {
 public:
  DuplicateLabel(const std::string& worker, const std::string& item)
      : ValidationError("duplicate label for worker '" + worker + "', item '" + item + "'"),
        worker_(worker),
        item_(item) {}

  const std::string& worker() const { return worker_; }
  const std::string& item() const { return item_; }

 private:
  std::string worker_;
  std::string item_;
};

class UnknownLabel : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Whole-batch rejection sampling gave up before meeting its constraint.
class RejectionBudgetExceeded : public Error {
 public:
  explicit RejectionBudgetExceeded(std::size_t batches)
      : Error("no accepted batch after " + std::to_string(batches) + " attempts") {}
};

}  // namespace crowd
