#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace enesy {

// Base of every error the library raises on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input text: triple files, query s-expressions, config files.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t column = 0)
      : Error(what), line_(line), column_(column) {}

  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

class VocabularyError : public Error {
 public:
  using Error::Error;
};

// Out-of-range ids.
class RangeError : public Error {
 public:
  using Error::Error;
};

// Mathematical precondition violated (negative weights, dimension mismatch).
class DomainError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Structurally invalid computation graph.
class QueryError : public Error {
 public:
  using Error::Error;
};

class SamplingError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace enesy
