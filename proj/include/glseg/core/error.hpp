#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace glseg {

enum class ErrorCode {
  config,      // bad configuration file or flag combination
  io,          // file missing / unreadable / unwritable
  schema,      // column mapping problems
  validation,  // data fails a declared invariant
  degenerate,  // mathematically undefined request (empty class, zero path, ...)
  numeric,     // numerical failure (non-PD matrix, rank deficiency, ...)
  internal
};

std::string_view error_code_name(ErrorCode c);
int error_exit_code(ErrorCode c);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace glseg
