#pragma once

#include <stdexcept>
#include <string>

namespace toriqp {

// Failure categories surfaced through the C API as status codes and through
// the CLI as machine-readable reason slugs.
enum class ErrorCode {
    invalid_argument,
    non_finite,
    resonance,          // small divisor below floor on an active mode
    cancellation,       // a zero-average / quadratic-smallness check failed
    frame_degenerate,   // G_K or <S1> numerically singular, or frame refused
    not_converged,
    integration_failure,
    collision,          // trajectory too close to a primary
    io_error,
};

const char* error_code_slug(ErrorCode code);

class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}
    ErrorCode code() const { return code_; }

  private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
    throw Error(code, what);
}

} // namespace toriqp
