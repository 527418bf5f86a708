#include "snz/signal.hpp"

#include <cmath>

#include "snz/error.hpp"

namespace snz {

bool BinaryMask::is_binary() const noexcept {
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (values[i] > 1) return false;
  }
  return true;
}

Stage stage_from_code(int code) {
  if (code < 0 || code >= kNumStages) fail(ErrorCode::invalid_input, "stage code out of range: " + std::to_string(code));
  return static_cast<Stage>(code);
}

std::string_view stage_name(Stage s) noexcept { return kStageNames[static_cast<std::size_t>(s)]; }

int ComponentSet::epochs() const {
  validate();
  return static_cast<int>(heartbeat.size() / kSamplesPerEpoch);
}

void ComponentSet::validate() const {
  auto check_rate = [](double hz, const char* what) {
    if (hz != kComponentRateHz) {
      fail(ErrorCode::invalid_input, std::string(what) + " sample rate must be 4 Hz, got " + std::to_string(hz));
    }
  };
  check_rate(heartbeat.sample_rate_hz, "heartbeat");
  check_rate(breath.sample_rate_hz, "breath");
  check_rate(movement.sample_rate_hz, "movement");
  const Eigen::Index n = heartbeat.size();
  if (breath.size() != n || movement.size() != n) {
    fail(ErrorCode::invalid_input, "component lengths differ: heartbeat " + std::to_string(n) + ", breath " +
                                       std::to_string(breath.size()) + ", movement " + std::to_string(movement.size()));
  }
  if (n == 0 || n % kSamplesPerEpoch != 0) {
    fail(ErrorCode::invalid_input, "component length " + std::to_string(n) + " is not a positive multiple of 120");
  }
  if (!movement.is_binary()) fail(ErrorCode::invalid_input, "movement mask contains values outside {0,1}");
  if (!heartbeat.samples.allFinite() || !breath.samples.allFinite()) {
    fail(ErrorCode::invalid_input, "component contains non-finite samples");
  }
}

ComponentSet ComponentSet::slice_epochs(int first, int count) const {
  const int total = epochs();
  if (first < 0 || count < 1 || first + count > total) {
    fail(ErrorCode::invalid_input, "epoch slice out of range");
  }
  const Eigen::Index start = static_cast<Eigen::Index>(first) * kSamplesPerEpoch;
  const Eigen::Index len = static_cast<Eigen::Index>(count) * kSamplesPerEpoch;
  ComponentSet out = *this;
  out.heartbeat.samples = heartbeat.samples.segment(start, len);
  out.breath.samples = breath.samples.segment(start, len);
  out.movement.values = movement.values.segment(start, len);
  return out;
}

StageSequence slice_epochs(const StageSequence& y, int first, int count) {
  if (first < 0 || count < 1 || static_cast<std::size_t>(first + count) > y.size()) {
    fail(ErrorCode::invalid_input, "stage slice out of range");
  }
  return StageSequence{{y.stages.begin() + first, y.stages.begin() + first + count}};
}

Eigen::Index floor_count(double x) noexcept {
  // Sample counts like 3600 * 4 must not become 14399 through rounding.
  return static_cast<Eigen::Index>(std::floor(x + 1e-9));
}

Waveform resample_linear(const Waveform& w, double target_hz) {
  if (w.empty()) fail(ErrorCode::invalid_input, "resample_linear: empty waveform");
  if (!(target_hz > 0) || !(w.sample_rate_hz > 0)) fail(ErrorCode::invalid_input, "resample_linear: non-positive rate");

  const Eigen::Index n_in = w.size();
  const Eigen::Index n_out = floor_count(static_cast<double>(n_in) * target_hz / w.sample_rate_hz);
  Waveform out{Eigen::VectorXd(n_out), target_hz, w.label};
  const double ratio = w.sample_rate_hz / target_hz;
  for (Eigen::Index j = 0; j < n_out; ++j) {
    const double pos = static_cast<double>(j) * ratio;
    const auto i0 = static_cast<Eigen::Index>(std::floor(pos));
    if (i0 >= n_in - 1) {
      out.samples[j] = w.samples[n_in - 1];
      continue;
    }
    const double frac = pos - static_cast<double>(i0);
    out.samples[j] = frac == 0.0 ? w.samples[i0] : w.samples[i0] + frac * (w.samples[i0 + 1] - w.samples[i0]);
  }
  return out;
}

BinaryMask mask_resample_nearest(const BinaryMask& m, double target_hz) {
  if (m.empty()) fail(ErrorCode::invalid_input, "mask_resample_nearest: empty mask");
  if (!(target_hz > 0) || !(m.sample_rate_hz > 0)) fail(ErrorCode::invalid_input, "mask_resample_nearest: non-positive rate");

  const Eigen::Index n_in = m.size();
  const Eigen::Index n_out = floor_count(static_cast<double>(n_in) * target_hz / m.sample_rate_hz);
  BinaryMask out{MaskVector(n_out), target_hz};
  const double ratio = m.sample_rate_hz / target_hz;
  for (Eigen::Index j = 0; j < n_out; ++j) {
    // Ties between two inputs go to the later one.
    auto i = static_cast<Eigen::Index>(std::floor(static_cast<double>(j) * ratio + 0.5));
    out.values[j] = m.values[std::min(i, n_in - 1)];
  }
  return out;
}

Normalized zscore(const Waveform& w) {
  if (w.size() < 2) fail(ErrorCode::invalid_input, "zscore: need at least 2 samples");
  const double mean = w.samples.mean();
  const Eigen::VectorXd centered = w.samples.array() - mean;
  const double sigma = std::sqrt(centered.squaredNorm() / static_cast<double>(w.size()));
  Normalized out{Waveform{Eigen::VectorXd::Zero(w.size()), w.sample_rate_hz, w.label}, false};
  if (!(sigma > 0) || !std::isfinite(sigma)) {
    out.degenerate = true;
    return out;
  }
  out.signal.samples = centered / sigma;
  // Second centering pass keeps the output mean at 0 to within rounding.
  out.signal.samples.array() -= out.signal.samples.mean();
  return out;
}

}  // namespace snz
