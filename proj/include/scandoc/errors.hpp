#pragma once

#include <stdexcept>
#include <string>

namespace scandoc {

// Base class for everything thrown by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller violated a documented precondition or passed malformed data.
class InvalidInputError : public Error {
 public:
  using Error::Error;
};

// Structured text (TSV/CSV/JSON) did not match its schema.
class ParseError : public Error {
 public:
  using Error::Error;
};

// A required external resource (OCR engine binary, file) is missing.
class EnvironmentError : public Error {
 public:
  using Error::Error;
};

// An external engine ran but failed; carries its stderr.
class EngineError : public Error {
 public:
  EngineError(const std::string& what, std::string stderr_text)
      : Error(what), stderr_text_(std::move(stderr_text)) {}
  const std::string& engine_stderr() const { return stderr_text_; }

 private:
  std::string stderr_text_;
};

// A numeric computation produced a non-finite value.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace scandoc
