#pragma once

#include <stdexcept>
#include <string>

namespace hessolve {

// Malformed block storage (wrong dimensions, missing rule for a level).
class StructuralError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The chain itself does not admit the requested computation, e.g. a
// singular censored block at some level.
class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Floating point trouble inside the recursion (lost positivity).
class NumericalBreakdown : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The generator cannot answer a query, e.g. an infinite tail without a hook.
class CapabilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A caller violated a documented precondition.
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Model parameters that violate the model's own invariants.
class SpecError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Load is at or beyond capacity (rho >= 1 and friends).
class StabilityError : public SpecError {
 public:
  using SpecError::SpecError;
};

class CertificateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, int line)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

}  // namespace hessolve
