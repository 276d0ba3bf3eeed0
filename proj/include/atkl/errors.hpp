#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace atkl {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand extents do not satisfy an operation's shape rule.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// An operation produced a non-finite value.
class NumericError : public Error {
 public:
  NumericError(std::string op, const std::string& what)
      : Error(op + ": " + what), op_(std::move(op)) {}
  const std::string& op() const noexcept { return op_; }

 private:
  std::string op_;
};

/// API misuse (e.g. backward on a non-scalar).
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Model or experiment configuration is inconsistent.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Input signal is shorter than one analysis window.
class InputTooShortError : public Error {
 public:
  using Error::Error;
};

/// SI-SNR reference has no energy after mean removal.
class DegenerateReferenceError : public Error {
 public:
  using Error::Error;
};

/// Training diverged; carries the step at which the loss became non-finite.
class TrainingError : public Error {
 public:
  TrainingError(std::size_t step, const std::string& what)
      : Error("step " + std::to_string(step) + ": " + what), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class UnsupportedFormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace atkl
