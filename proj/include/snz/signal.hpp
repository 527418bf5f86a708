#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace snz {

/// Unified model-input rate for all components.
inline constexpr double kComponentRateHz = 4.0;
/// Scoring epoch length in seconds.
inline constexpr int kEpochSeconds = 30;
/// Samples per epoch at the component rate.
inline constexpr int kSamplesPerEpoch = 120;

/// Uniformly sampled real-valued channel.
struct Waveform {
  Eigen::VectorXd samples;
  double sample_rate_hz = 1.0;
  std::string label;

  Eigen::Index size() const noexcept { return samples.size(); }
  bool empty() const noexcept { return samples.size() == 0; }
  double duration_s() const noexcept { return static_cast<double>(samples.size()) / sample_rate_hz; }
};

using MaskVector = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, 1>;

/// 0/1 sequence; movement indicator when sampled at the component rate.
struct BinaryMask {
  MaskVector values;
  double sample_rate_hz = 1.0;

  Eigen::Index size() const noexcept { return values.size(); }
  bool empty() const noexcept { return values.size() == 0; }
  double duration_s() const noexcept { return static_cast<double>(values.size()) / sample_rate_hz; }
  bool is_binary() const noexcept;
};

enum class Stage : std::uint8_t { W = 0, N1 = 1, N2 = 2, N3 = 3, R = 4 };
inline constexpr int kNumStages = 5;
inline constexpr std::array<std::string_view, kNumStages> kStageNames{"W", "N1", "N2", "N3", "R"};

inline int stage_code(Stage s) noexcept { return static_cast<int>(s); }
Stage stage_from_code(int code);
std::string_view stage_name(Stage s) noexcept;

/// Per-epoch labels; one entry per 30 s epoch.
struct StageSequence {
  std::vector<Stage> stages;

  std::size_t size() const noexcept { return stages.size(); }
  Stage operator[](std::size_t i) const { return stages[i]; }
};

/// Aligned 4 Hz triple of heartbeat (IBI, ms), breath (z-score) and movement mask.
struct ComponentSet {
  Waveform heartbeat;
  Waveform breath;
  BinaryMask movement;

  /// Number of whole epochs; throws if the alignment invariant is broken.
  int epochs() const;
  /// Throws Error(invalid_input) describing the first violated invariant.
  void validate() const;
  /// Restrict to epochs [first, first + count).
  ComponentSet slice_epochs(int first, int count) const;
};

StageSequence slice_epochs(const StageSequence& y, int first, int count);

// ---- rate conversion / normalization ---------------------------------------------------

/// Linear interpolation onto a `target_hz` grid starting at t = 0; length floor(duration * target_hz).
Waveform resample_linear(const Waveform& w, double target_hz);

/// Nearest-in-time resampling that preserves binaryness.
BinaryMask mask_resample_nearest(const BinaryMask& m, double target_hz);

struct Normalized {
  Waveform signal;
  bool degenerate = false;  // input had zero variance; output is all zeros
};

/// Population z-score over the full record.
Normalized zscore(const Waveform& w);

/// floor(x) for a sample count that should be integral up to rounding noise.
Eigen::Index floor_count(double x) noexcept;

}  // namespace snz
