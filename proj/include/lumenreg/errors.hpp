#pragma once

#include <stdexcept>
#include <string>

namespace lumenreg {

// All library errors derive from Error so callers at the CLI/service boundary
// can catch one type and still report the specific kind.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class InvalidIntrinsics : public Error {
 public:
  using Error::Error;
};

/// Euler decomposition at (or numerically near) gimbal lock.
class DegenerateDecomposition : public Error {
 public:
  using Error::Error;
};

class OutOfFov : public Error {
 public:
  using Error::Error;
};

/// Malformed input file; `line()` is 1-based, 0 when not line-oriented.
class FormatError : public Error {
 public:
  FormatError(const std::string& where, std::size_t line, const std::string& what)
      : Error(where + (line ? ":" + std::to_string(line) : std::string()) + ": " + what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class NoSignal : public Error {
 public:
  using Error::Error;
};

class RankDeficient : public Error {
 public:
  using Error::Error;
};

class GenerationError : public Error {
 public:
  using Error::Error;
};

class EncodingError : public Error {
 public:
  using Error::Error;
};

class WriteError : public Error {
 public:
  using Error::Error;
};

}  // namespace lumenreg
