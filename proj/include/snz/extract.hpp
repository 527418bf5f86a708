#pragma once

#include <complex>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "snz/signal.hpp"

namespace snz {

// ---- heartbeat -------------------------------------------------------------------------

/// Heartbeat anchors: end time P_i (s) and interval length T_i (ms) of each interval.
/// After cleaning, P_i need not equal P_{i-1} + T_i.
struct BeatSeries {
  Eigen::VectorXd end_times_s;
  Eigen::VectorXd intervals_ms;

  Eigen::Index size() const noexcept { return end_times_s.size(); }
  bool empty() const noexcept { return end_times_s.size() == 0; }
};

struct BeatDetectorConfig {
  double band_low_hz = 0.7;
  double band_high_hz = 10.0;
  int band_order = 3;
  double smoothing_s = 0.15;
  double refractory_s = 0.3;
  double threshold_factor = 2.0;  // x running median of the envelope
  double median_window_s = 5.0;
  // Peaks must also reach this fraction of the running 90th percentile; keeps
  // inter-beat ripple out when the envelope median is near zero.
  double min_peak_fraction = 0.25;
};

struct CleaningConfig {
  double low_ms = 300.0;
  double high_ms = 2000.0;
  double ectopic_fraction = 0.2;
  // This many consecutive in-range intervals that fail the ectopic test but agree
  // with each other become the new reference (0 disables re-anchoring).
  int reanchor_count = 5;
};

/// Beat detection on a cardiac-band energy envelope. Also returns the raw peak times through `peaks_s` if given.
BeatSeries detect_beats(const Waveform& w, const BeatDetectorConfig& cfg = {}, std::vector<double>* peaks_s = nullptr);

/// Normal-to-normal cleaning: range + ectopic removal, interior interpolation, boundary drop.
BeatSeries clean_nn_intervals(const BeatSeries& b, const CleaningConfig& cfg = {});

/// IBI wave at 4 Hz (ms), linear between anchors and constant-padded outside them.
Waveform interpolate_ibi(const BeatSeries& b, double duration_s);

// ---- filtering -------------------------------------------------------------------------

struct Biquad {
  double b0 = 1, b1 = 0, b2 = 0;
  double a1 = 0, a2 = 0;  // a0 == 1

  bool is_stable() const noexcept;
};

struct FilterCoeffs {
  std::vector<Biquad> sections;
  double low_hz = 0;
  double high_hz = 0;
  int order = 0;  // prototype order; the band-pass has order 2 * order
  double sample_rate_hz = 0;

  bool is_stable() const noexcept;
  /// Complex frequency response at `f_hz`.
  std::complex<double> response(double f_hz) const;
};

/// Bessel band-pass: -3 dB normalized analog prototype, low-pass to band-pass
/// transform, bilinear transform pre-warped at the geometric center frequency.
FilterCoeffs design_bessel_bandpass(double low_hz, double high_hz, int order, double fs_hz);

/// Causal cascaded-biquad filtering from zero state.
Waveform apply_filter(const FilterCoeffs& c, const Waveform& w);

/// Forward-backward filtering (zero phase); used where peak timing matters.
Waveform apply_filter_zero_phase(const FilterCoeffs& c, const Waveform& w);

// ---- breath ----------------------------------------------------------------------------

enum class SourceKind { bed_sensor, respiratory_effort };

std::string to_string(SourceKind s);
SourceKind source_from_string(const std::string& s);

struct BreathConfig {
  double low_hz = 0.1;
  double high_hz = 1.0 / 3.0;
  int order = 3;
  double min_duration_s = 60.0;
};

/// Filter, resample to 4 Hz, integrate (bed sensor only), z-score.
Waveform extract_breath(const Waveform& w, SourceKind source, const BreathConfig& cfg = {}, bool* degenerate = nullptr);

// ---- movement --------------------------------------------------------------------------

struct MovementConfig {
  double window_s = 2.0;
  int baseline_windows = 15;  // 15 x 2 s = 30 s baseline
  double multiplier = 5.0;
  double sigma_floor_rel = 1e-6;
};

/// Per-window peak-to-peak amplitude of consecutive, non-overlapping windows.
Eigen::VectorXd window_peak_to_peak(const Waveform& w, double window_s);

/// Movement mask at 4 Hz. Window k is flagged when its peak-to-peak amplitude exceeds
/// mu + multiplier * sigma of the 15 most recent unflagged windows.
BinaryMask detect_movement(const Waveform& w, const MovementConfig& cfg = {});

// ---- whole record ----------------------------------------------------------------------

struct RawRecord {
  std::string id;
  SourceKind source = SourceKind::respiratory_effort;
  std::vector<Waveform> channels;  // Waveform::label is the channel name
  std::optional<StageSequence> stages;

  const Waveform* find(const std::string& name) const noexcept;
  const Waveform& channel(const std::string& name) const;  // throws missing_channel
};

struct ExtractConfig {
  std::string cardiac_channel = "raw";
  std::string breath_channel = "raw";
  std::string movement_channel = "raw";
  BeatDetectorConfig beats;
  CleaningConfig cleaning;
  BreathConfig breath;
  MovementConfig movement;
};

struct Extraction {
  ComponentSet components;
  std::optional<StageSequence> stages;
  BeatSeries beats;  // cleaned anchors
  bool breath_degenerate = false;
};

/// Full component extraction, truncated to 120 * T samples with T = floor(duration / 30).
Extraction extract_components(const RawRecord& record, const ExtractConfig& cfg = {});

}  // namespace snz
