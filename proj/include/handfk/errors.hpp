#pragma once

#include <stdexcept>
#include <string>

namespace handfk {

// Every error carries the module that raised it so the CLI can report
// "<module>: <message>" without extra bookkeeping.
class Error : public std::runtime_error {
 public:
  Error(std::string module, const std::string& message)
      : std::runtime_error(module + ": " + message), module_(std::move(module)) {}

  const std::string& module() const noexcept {
    return module_;
  }

 private:
  std::string module_;
};

/// Malformed input text (config, parameter files, corpus headers).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Well-formed input that violates a documented invariant or precondition.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Failures that happen while computing (non-finite cost, I/O).
class RuntimeFailure : public Error {
 public:
  using Error::Error;
};

} // namespace handfk
