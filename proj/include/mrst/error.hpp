#pragma once

#include <stdexcept>
#include <string>

namespace mrst {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or inconsistent dimensions.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Input data that cannot be processed (non-finite values, empty sets).
class InputError : public Error {
 public:
  using Error::Error;
};

/// A numeric failure detected during an iterative algorithm.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Missing or unreadable files.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Malformed file contents. `field()` names the offending header field.
class ParseError : public Error {
 public:
  ParseError(std::string field, const std::string& message)
      : Error("field '" + field + "': " + message), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace mrst
