#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ptl {

/// Root of every exception the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Incompatible tensor shapes, bad axes, class-count mismatches.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Index tables pointing outside their reference set.
class IndexError : public Error {
 public:
  using Error::Error;
};

/// NaN or Inf observed where finite values are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Malformed text input; carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& detail, const std::string& source = "")
      : Error((source.empty() ? "" : source + ": ") + "line " + std::to_string(line) + ": " +
              detail),
        line_(line),
        detail_(detail) {}
  std::size_t line() const { return line_; }
  const std::string& detail() const { return detail_; }

 private:
  std::size_t line_;
  std::string detail_;
};

/// Malformed binary container (bad magic, truncation, version).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration or precondition detected before any work starts.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace ptl
