#pragma once

#include <stdexcept>
#include <string>

namespace dupsim {

// Broad failure classes. The CLI maps these onto process exit codes:
// input/usage problems exit 2, numeric and integrity failures exit 3.
enum class ErrorKind {
  kInvalidArgument,
  kEmptyInput,
  kInvalidCodepoint,
  kOversize,
  kConfigMismatch,
  kFormat,
  kIntegrity,
  kNumeric,
  kScheduleExhausted,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

const char* to_string(ErrorKind kind) noexcept;

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

}  // namespace dupsim
