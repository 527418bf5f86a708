#include "snz/error.hpp"

namespace snz {

std::string_view error_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::invalid_input: return "invalid-input";
    case ErrorCode::insufficient_beats: return "insufficient-beats";
    case ErrorCode::empty_after_cleaning: return "empty-after-cleaning";
    case ErrorCode::invalid_band: return "invalid-band";
    case ErrorCode::inconsistent_record: return "inconsistent-record";
    case ErrorCode::record_too_short: return "record-too-short";
    case ErrorCode::missing_channel: return "missing-channel";
    case ErrorCode::shape: return "shape";
    case ErrorCode::invalid_backward: return "invalid-backward";
    case ErrorCode::no_grad_path: return "no-grad-path";
    case ErrorCode::non_finite_gradient: return "non-finite-gradient";
    case ErrorCode::non_finite_loss: return "non-finite-loss";
    case ErrorCode::invalid_config: return "invalid-config";
    case ErrorCode::no_data: return "no-data";
    case ErrorCode::bad_magic: return "bad-magic";
    case ErrorCode::truncated_payload: return "truncated-payload";
    case ErrorCode::count_mismatch: return "count-mismatch";
    case ErrorCode::unsupported_version: return "unsupported-version";
    case ErrorCode::io: return "io";
  }
  return "unknown";
}

}  // namespace snz
