#pragma once

#include <stdexcept>
#include <string>

namespace gazekit {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input data violates a precondition (bad frame, malformed file, too few
/// samples). The CLI maps this to exit code 2.
class DataError : public Error {
 public:
  using Error::Error;
};

/// A fit or solve has no unique solution for the given input geometry.
class DegenerateError : public DataError {
 public:
  using DataError::DataError;
};

class IoError : public DataError {
 public:
  IoError(const std::string& path, const std::string& what)
      : DataError(path + ": " + what), path_(path) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

/// A ParseError carries the 1-based line number of the offending input line.
class ParseError : public DataError {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : DataError(source + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Internal consistency check failed. Indicates a bug, not bad input.
class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace gazekit
