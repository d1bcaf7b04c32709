#pragma once

#include <stdexcept>
#include <string>

namespace rlihf {

/// Error categories shared by the C++ core and the C API status codes.
enum class ErrorKind {
  config,  // invalid configuration or scene
  input,   // bad numeric input (non-finite, out of range)
  usage,   // API called in the wrong state
  format,  // malformed file contents
  io,      // filesystem failure
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::config, what) {}
};

class InputError : public Error {
 public:
  explicit InputError(const std::string& what) : Error(ErrorKind::input, what) {}
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(ErrorKind::usage, what) {}
};

class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what) : Error(ErrorKind::format, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::io, what) {}
};

}  // namespace rlihf
