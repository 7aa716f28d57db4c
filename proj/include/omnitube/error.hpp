#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace omnitube {

enum class ErrorKind {
  invalid_box,
  invalid_segment,
  shape_mismatch,
  invalid_argument,
  empty_input,
  // file formats
  io_error,
  malformed_syntax,
  invariant_violation,
  magic_mismatch,
  truncated_payload,
  dimension_overflow,
  unsupported_version,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_box: return "invalid box";
    case ErrorKind::invalid_segment: return "invalid segment";
    case ErrorKind::shape_mismatch: return "shape mismatch";
    case ErrorKind::invalid_argument: return "invalid argument";
    case ErrorKind::empty_input: return "empty input";
    case ErrorKind::io_error: return "i/o error";
    case ErrorKind::malformed_syntax: return "malformed syntax";
    case ErrorKind::invariant_violation: return "invariant violation";
    case ErrorKind::magic_mismatch: return "magic mismatch";
    case ErrorKind::truncated_payload: return "truncated payload";
    case ErrorKind::dimension_overflow: return "dimension overflow";
    case ErrorKind::unsupported_version: return "unsupported version";
  }
  return "unknown";
}

/// Every failure raised by the library carries a machine-checkable kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) throw Error(kind, what);
}

}  // namespace omnitube
