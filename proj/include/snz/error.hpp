#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace snz {

/// Failure categories. The CLI maps each one to a distinct exit status.
enum class ErrorCode : int {
  invalid_input = 10,
  insufficient_beats = 11,
  empty_after_cleaning = 12,
  invalid_band = 13,
  inconsistent_record = 14,
  record_too_short = 15,
  missing_channel = 16,
  shape = 20,
  invalid_backward = 21,
  no_grad_path = 22,
  non_finite_gradient = 23,
  non_finite_loss = 24,
  invalid_config = 30,
  no_data = 31,
  bad_magic = 40,
  truncated_payload = 41,
  count_mismatch = 42,
  unsupported_version = 43,
  io = 44,
};

std::string_view error_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace snz
