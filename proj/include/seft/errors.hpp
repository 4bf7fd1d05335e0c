#pragma once

#include <stdexcept>
#include <string>

namespace seft {

// Base of every library error. The CLI maps IoError to exit code 2 and
// everything else to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

  ParseError with_context(const std::string& prefix) const {
    return ParseError(prefix + ": " + what(), line_, 0);
  }

 private:
  ParseError(const std::string& message, std::size_t line, int) : Error(message), line_(line) {}
  std::size_t line_;
};

class StateError : public Error {
 public:
  using Error::Error;
};

class StreamOrderError : public Error {
 public:
  using Error::Error;
};

class MetricUndefinedError : public Error {
 public:
  using Error::Error;
};

class CompatibilityError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace seft
