#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cocoedit {

/// Base for every error raised by the library. Each subclass maps onto one
/// CLI exit code (see `exit_code_for`).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A masked measurement was requested over a region with no active cells.
class EmptyRegionError : public Error {
 public:
  using Error::Error;
};

class InvalidMaskError : public Error {
 public:
  using Error::Error;
};

/// Malformed input text or bytes. `position` is a byte offset for binary
/// formats and a 1-based line number for line-oriented formats.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t position)
      : Error(what), position_(position) {}
  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

class LookupError : public Error {
 public:
  using Error::Error;
};

class UndefinedCorrelation : public Error {
 public:
  using Error::Error;
};

/// Loss or gradient went non-finite during optimization.
class NumericAbort : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace cocoedit
