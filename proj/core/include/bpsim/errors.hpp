#pragma once

#include <stdexcept>
#include <string>

namespace bpsim {

/// Malformed or inconsistent input: BPMN, CSV, parameter JSON, state files,
/// scenario overrides. Maps to CLI exit code 2 and HTTP 422.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A configured resource cap (state-space markings, simulation events) was
/// hit. Maps to CLI exit code 3.
class BudgetExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace bpsim
