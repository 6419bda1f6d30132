#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace xolap {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input (XML, pattern JSON, schema JSON). Line/column are 1-based
// and zero when not applicable.
class ParseError : public Error {
 public:
  explicit ParseError(const std::string& what, std::size_t line = 0, std::size_t column = 0)
      : Error(line == 0 ? what
                        : what + " at line " + std::to_string(line) + ", column " +
                              std::to_string(column)),
        line_(line),
        column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

// Well-formed XML using a construct outside the supported subset.
class UnsupportedConstructError : public ParseError {
 public:
  UnsupportedConstructError(std::string construct, std::size_t line, std::size_t column)
      : ParseError("unsupported construct: " + construct, line, column),
        construct_(std::move(construct)) {}

  const std::string& construct() const noexcept { return construct_; }

 private:
  std::string construct_;
};

class LookupError : public Error {
 public:
  using Error::Error;
};

// Structure that violates a documented invariant.
class InvariantError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<std::string> violations)
      : Error(join(violations)), violations_(std::move(violations)) {}

  const std::vector<std::string>& violations() const noexcept { return violations_; }

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string out = "invalid pattern";
    for (const auto& s : v) out += "; " + s;
    return out;
  }

  std::vector<std::string> violations_;
};

// A binding handed to the witness builder that does not belong to the
// pattern/tree pair it is used with.
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

class OracleLimitError : public Error {
 public:
  using Error::Error;
};

// Warehouse interpretation failed (missing or non-numeric measure).
class BindingError : public Error {
 public:
  using Error::Error;
};

// A fact unusable by a rollup query.
class DataError : public Error {
 public:
  using Error::Error;
};

class EmptyAggregateError : public Error {
 public:
  using Error::Error;
};

class NumericDomainError : public Error {
 public:
  using Error::Error;
};

}  // namespace xolap
