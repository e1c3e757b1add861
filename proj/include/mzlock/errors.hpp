#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace mzlock {

// Base of everything the library throws for a domain-level failure.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A state quantity became NaN or infinite.
class NumericError : public Error {
 public:
  using Error::Error;
};

class CalibrationError : public Error {
 public:
  using Error::Error;
};

// Visibility requested for a pair of rates that sum to zero.
class UndefinedVisibility : public Error {
 public:
  using Error::Error;
};

class FitError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(int line, const std::string& message)
      : Error("line " + std::to_string(line) + ": " + message), line_(line) {}

  int line() const { return line_; }

 private:
  int line_;
};

struct ValidationIssue {
  std::string key;
  std::string message;
};

// Collects every violated invariant of a configuration, not just the first.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<ValidationIssue> issues);

  const std::vector<ValidationIssue>& issues() const { return issues_; }

 private:
  std::vector<ValidationIssue> issues_;
};

class IoError : public Error {
 public:
  IoError(const std::string& path, const std::string& message)
      : Error(path + ": " + message), path_(path) {}

  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

}  // namespace mzlock
