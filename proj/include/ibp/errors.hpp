#pragma once

#include <cstdint>
#include <functional>
#include <iostream>
#include <stdexcept>
#include <string>

namespace ibp {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad argument values: nonpositive times, empty budgets, unordered tuples.
struct DomainError : Error {
  using Error::Error;
};

// Shape mismatches: array lengths, non-abutting segments, junction values.
struct StructuralError : Error {
  using Error::Error;
};

// An estimate could not be formed (no survivors at any grid size, etc).
struct DegenerateError : Error {
  using Error::Error;
};

// Rejection sampler ran out of attempts. Retryable with a larger budget.
struct SaturationError : Error {
  std::uint64_t attempts;
  SaturationError(const std::string& what, std::uint64_t n)
      : Error(what + " (after " + std::to_string(n) + " attempts)"), attempts(n) {}
};

using WarningHandler = std::function<void(const std::string&)>;

inline WarningHandler& warning_handler() {
  static WarningHandler h = [](const std::string& m) { std::cerr << "warning: " << m << "\n"; };
  return h;
}

inline void warn(const std::string& msg) {
  if (warning_handler()) warning_handler()(msg);
}

}  // namespace ibp
