#pragma once

#include <stdexcept>
#include <string>

namespace wlrtr {

enum class ErrorCode {
  invalid_argument,
  shape_mismatch,
  out_of_bounds,
  convergence_failure,
  singular_system,
  non_finite,
  io_failure,
  bad_magic,
  bad_dtype,
  truncated,
  dim_overflow,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid argument";
    case ErrorCode::shape_mismatch: return "shape mismatch";
    case ErrorCode::out_of_bounds: return "out of bounds";
    case ErrorCode::convergence_failure: return "convergence failure";
    case ErrorCode::singular_system: return "singular system";
    case ErrorCode::non_finite: return "non-finite value";
    case ErrorCode::io_failure: return "i/o failure";
    case ErrorCode::bad_magic: return "bad magic";
    case ErrorCode::bad_dtype: return "bad dtype";
    case ErrorCode::truncated: return "truncated payload";
    case ErrorCode::dim_overflow: return "dimension overflow";
  }
  return "unknown error";
}

// Every failure in the library is reported through this type; code() lets
// callers (the CLI, tests) tell the cases apart without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace wlrtr
