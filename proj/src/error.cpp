#include "dupsim/error.hpp"

namespace dupsim {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return "invalid-argument";
    case ErrorKind::kEmptyInput: return "empty-input";
    case ErrorKind::kInvalidCodepoint: return "invalid-codepoint";
    case ErrorKind::kOversize: return "oversize";
    case ErrorKind::kConfigMismatch: return "config-mismatch";
    case ErrorKind::kFormat: return "format";
    case ErrorKind::kIntegrity: return "integrity";
    case ErrorKind::kNumeric: return "numeric";
    case ErrorKind::kScheduleExhausted: return "schedule-exhausted";
  }
  return "unknown";
}

}  // namespace dupsim
