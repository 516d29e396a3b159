#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace kcrime {

/// Base for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad input from the caller: malformed arguments, files or incompatible grids.
/// The CLI maps these to exit code 2.
class UsageError : public Error {
 public:
  using Error::Error;
};

class ParseError : public UsageError {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : UsageError(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class GridMismatch : public UsageError {
 public:
  using UsageError::UsageError;
};

/// Numerical failure (factorization, non-convergence, broken PSD). Exit code 1.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace kcrime
