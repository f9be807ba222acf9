#pragma once

#include <stdexcept>
#include <string>

namespace qhdboot {

enum class ErrorCode {
  invalid_argument = 1,
  empty_sample,
  length_mismatch,
  level_out_of_range,
  norm_infinite,
  range_too_small,
  lattice_mismatch,
  non_integrable,
  non_integrable_direction,
  moment_diverges,
  block_length_invalid,
  path_too_short,
  factorization_failed,
  config_invalid,
  io_error,
};

const char* to_string(ErrorCode code) noexcept;

// Every failure raised by the library carries one of the codes above; the
// C API maps them one-to-one onto its status values.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) fail(code, message);
}

}  // namespace qhdboot
