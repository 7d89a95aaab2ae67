#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bbsgd {

/// Thrown when a BB quotient has a vanishing denominator.
class DegenerateCurvature : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Malformed LIBSVM input. `line()` is 1-based; 0 means the whole stream.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// A file could not be opened, read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace bbsgd
