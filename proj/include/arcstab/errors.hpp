#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace arcstab {

// Every library failure derives from Error so the CLI can map it to a
// machine-readable code.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& message)
      : Error("invalid_argument", message) {}
};

class EmptyInput : public Error {
 public:
  explicit EmptyInput(const std::string& message = "empty input")
      : Error("empty_input", message) {}
};

// Fundamental (or total) power too small for a ratio descriptor to be defined.
class DegenerateSpectrum : public Error {
 public:
  explicit DegenerateSpectrum(const std::string& message)
      : Error("degenerate_spectrum", message) {}
};

class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t line)
      : Error("parse_error", message + " (line " + std::to_string(line) + ")"),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class FormatError : public Error {
 public:
  explicit FormatError(const std::string& message)
      : Error("format_error", message) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message)
      : Error("config_error", message) {}
};

}  // namespace arcstab
