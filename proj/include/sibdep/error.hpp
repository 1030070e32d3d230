#ifndef SIBDEP_ERROR_HPP
#define SIBDEP_ERROR_HPP

#include <stdexcept>
#include <string>

namespace sibdep {

/// Base for every error raised by the library. `kind()` is a stable
/// machine-readable tag used by the CLI error JSON.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

/// Malformed input document (bad JSON, wrong schema, non-canonical tuple).
class ParseError : public Error {
 public:
  explicit ParseError(const std::string& what) : Error("parse", what) {}
};

class IndexError : public Error {
 public:
  explicit IndexError(const std::string& what) : Error("index", what) {}
};

/// A law or ensemble failed probability validation.
class InvalidLawError : public Error {
 public:
  explicit InvalidLawError(const std::string& what)
      : Error("invalid_law", what) {}
};

class DegenerateError : public Error {
 public:
  explicit DegenerateError(const std::string& what)
      : Error("degenerate", what) {}
};

class NumericError : public Error {
 public:
  NumericError(const std::string& what, double residual)
      : Error("numeric", what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

class CalibrationError : public Error {
 public:
  explicit CalibrationError(const std::string& what)
      : Error("calibration", what) {}
};

class InsufficientSampleError : public Error {
 public:
  explicit InsufficientSampleError(const std::string& what)
      : Error("insufficient_sample", what) {}
};

class ArgumentError : public Error {
 public:
  explicit ArgumentError(const std::string& what) : Error("argument", what) {}
};

}  // namespace sibdep

#endif  // SIBDEP_ERROR_HPP
