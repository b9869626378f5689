#include "glseg/core/error.hpp"

namespace glseg {

std::string_view error_code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::config: return "E_CONFIG";
    case ErrorCode::io: return "E_IO";
    case ErrorCode::schema: return "E_SCHEMA";
    case ErrorCode::validation: return "E_VALIDATION";
    case ErrorCode::degenerate: return "E_DEGENERATE";
    case ErrorCode::numeric: return "E_NUMERIC";
    case ErrorCode::internal: return "E_INTERNAL";
  }
  return "E_INTERNAL";
}

int error_exit_code(ErrorCode c) {
  switch (c) {
    case ErrorCode::config: return 2;
    case ErrorCode::io: return 3;
    case ErrorCode::schema: return 4;
    case ErrorCode::validation: return 5;
    case ErrorCode::degenerate: return 6;
    case ErrorCode::numeric: return 7;
    case ErrorCode::internal: return 8;
  }
  return 8;
}

}  // namespace glseg
