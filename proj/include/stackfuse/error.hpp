#pragma once

#include <stdexcept>
#include <string>

namespace stackfuse {

/// Category of a rejected input. Each kind is distinct so callers (and tests)
/// can tell a class-order mismatch from a malformed line without string matching.
enum class ErrorKind {
  invalid_argument,
  unknown_class,
  duplicate_id,
  malformed_line,
  class_order_mismatch,
  row_sum,
  value_range,
  id_mismatch,
  label_space_mismatch,
  dimension_mismatch,
  single_class,
  empty_class,
  empty_input,
  non_finite,
  retry_exhausted,
  schema,
  version,
  io,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_argument: return "invalid argument";
    case ErrorKind::unknown_class: return "unknown class";
    case ErrorKind::duplicate_id: return "duplicate id";
    case ErrorKind::malformed_line: return "malformed line";
    case ErrorKind::class_order_mismatch: return "class order mismatch";
    case ErrorKind::row_sum: return "row sum";
    case ErrorKind::value_range: return "value out of range";
    case ErrorKind::id_mismatch: return "example id mismatch";
    case ErrorKind::label_space_mismatch: return "label space mismatch";
    case ErrorKind::dimension_mismatch: return "dimension mismatch";
    case ErrorKind::single_class: return "single class";
    case ErrorKind::empty_class: return "empty class";
    case ErrorKind::empty_input: return "empty input";
    case ErrorKind::non_finite: return "non-finite value";
    case ErrorKind::retry_exhausted: return "retry budget exhausted";
    case ErrorKind::schema: return "schema violation";
    case ErrorKind::version: return "version mismatch";
    case ErrorKind::io: return "i/o failure";
  }
  return "error";
}

/// Raised for any input that violates a documented contract. The CLI maps
/// this to exit code 2; everything else is an internal error (exit code 1).
class ValidationError : public std::runtime_error {
 public:
  ValidationError(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace stackfuse
