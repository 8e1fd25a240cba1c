#pragma once

#include <stdexcept>
#include <string>

namespace phqens {

/// Precondition or contract violation on caller-supplied values.
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Non-finite input reaching a numeric routine.
class NumericError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Malformed text input; carries a 1-based line number (0 when unknown).
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : std::runtime_error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// A file that cannot be opened, read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Well-formed data that breaks a cohort or label invariant.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Corrupt or truncated model archive.
class IntegrityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Archive written by an incompatible format version.
class VersionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Archive holds a different ensemble kind than the caller requested.
class KindMismatchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace phqens
