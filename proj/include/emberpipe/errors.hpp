#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace emberpipe {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input violates a geometric precondition (too few points, collinear set, ...).
class DegenerateInput : public Error {
 public:
  using Error::Error;
};

class InsufficientSupport : public Error {
 public:
  using Error::Error;
};

class OutOfRange : public Error {
 public:
  using Error::Error;
};

class NonConvergence : public Error {
 public:
  using Error::Error;
};

class RegistrationFailure : public Error {
 public:
  using Error::Error;
};

class NotInitialized : public Error {
 public:
  using Error::Error;
};

class Unreachable : public Error {
 public:
  using Error::Error;
};

class NoMap : public Error {
 public:
  using Error::Error;
};

class IncompleteReport : public Error {
 public:
  using Error::Error;
};

/// Malformed input document. `line` is 1-based, 0 when unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Semantically invalid input; carries every violation found, not just the first.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<std::string> violations)
      : Error(join(violations)), violations_(std::move(violations)) {}
  const std::vector<std::string>& violations() const noexcept { return violations_; }

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string out = "validation failed";
    for (const auto& s : v) out += "\n  - " + s;
    return out;
  }
  std::vector<std::string> violations_;
};

}  // namespace emberpipe
