#pragma once

#include <stdexcept>
#include <string>

namespace protoflow {

// Shape/dimension mismatch between tensors.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Non-finite value where a finite one is required (losses, gradients, MC).
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid argument value (bad permutation, out-of-range label, ...).
struct ArgumentError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Operation called in a state that does not admit it (duplicate snapshot,
// empty head, ...).
struct StateError : std::logic_error {
  using std::logic_error::logic_error;
};

// Unknown class or missing entry.
struct LookupError : std::out_of_range {
  using std::out_of_range::out_of_range;
};

// Prototype with near-zero norm cannot be normalized.
struct DegenerateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Config file parse/validation failure; carries the offending field path.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what, std::string field = "")
      : std::runtime_error(what), field_path(std::move(field)) {}
  std::string field_path;
};

}  // namespace protoflow
