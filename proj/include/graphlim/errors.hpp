#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace graphlim {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Precondition violated by the caller (bad sizes, broken invariants, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A computational guard refused the input. The code identifies the guard,
/// e.g. "D-5" for the exact cut-norm class limit.
class GuardError : public Error {
 public:
  GuardError(std::string code, const std::string& message)
      : Error(message + " [" + code + "]"), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

/// Malformed input file. Line and column are 1-based; 0 means unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t line, std::size_t column = 0)
      : Error(format(message, line, column)), line_(line), column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  static std::string format(const std::string& message, std::size_t line, std::size_t column) {
    std::string out = "parse error";
    if (line != 0) {
      out += " at line " + std::to_string(line);
      if (column != 0) out += ", column " + std::to_string(column);
    }
    return out + ": " + message;
  }

  std::size_t line_;
  std::size_t column_;
};

namespace detail {

inline void require(bool condition, const std::string& message) {
  if (!condition) throw InvalidArgument(message);
}

}  // namespace detail
}  // namespace graphlim
