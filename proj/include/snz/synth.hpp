#pragma once

// Synthetic overnight recordings with known physiology: a clean contact-sensor
// style record and a degraded bed-sensor style record generated from the same
// stage sequence, beats, breathing and movement.

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "snz/extract.hpp"
#include "snz/random.hpp"
#include "snz/signal.hpp"

namespace snz {

using StageArray = std::array<double, kNumStages>;
using TransitionMatrix = Eigen::Matrix<double, kNumStages, kNumStages, Eigen::RowMajor>;

/// Reversible chain with stationary distribution `target`: off-diagonal moves only
/// between physiologically adjacent stages, P_ij = rate * target_j.
TransitionMatrix default_transition_matrix(const StageArray& target = {0.33, 0.03, 0.37, 0.14, 0.12}, double rate = 0.25);
/// Left eigenvector of P for eigenvalue 1, normalized to sum 1.
StageArray stationary_distribution(const TransitionMatrix& p);

struct SynthConfig {
  std::uint64_t seed = 0;
  double duration_s = 3600;
  double raw_rate_hz = 100;
  TransitionMatrix transition = default_transition_matrix();

  // Heart: mean rate per stage, AR(1) interval jitter.
  StageArray hr_mean_bpm{70, 65, 60, 58, 72};
  StageArray rr_sd_ms{30, 20, 20, 20, 40};
  double rr_ar = 0.7;
  double beat_amplitude = 1.0;
  double beat_frequency_hz = 5.0;
  double beat_width_s = 0.04;

  // Breathing: sinusoidal volume, rate jittered per epoch.
  StageArray breath_rate_hz{0.28, 0.22, 0.22, 0.22, 0.30};
  StageArray breath_amplitude{0.35, 0.3, 0.25, 0.4, 0.2};
  double breath_rate_jitter = 0.03;

  // Movement bursts of high-amplitude noise.
  StageArray movement_per_min{0.5, 0.3, 0.03, 0.0, 0.05};
  double movement_min_s = 2;
  double movement_max_s = 10;
  double movement_amplitude = 4.0;
  double movement_min_gap_s = 30;
  double movement_start_s = 40;

  // Between-subject spread: log-normal SD of per-record multipliers on every
  // stage's heart rate and breathing rate.
  double subject_hr_sd = 0.08;
  double subject_breath_sd = 0.10;

  // Noise and degradation.
  double clean_snr_db = 20;
  double degraded_snr_db = 8;
  double drift_depth = 0.3;
  double drift_period_s = 900;
  double missed_beat_probability = 0.05;

  /// Throws invalid-config (duration < 60 s, rows not summing to 1, non-positive rates).
  void validate() const;
};

struct GroundTruth {
  double hr_scale = 1;      // subject multiplier applied to hr_mean_bpm
  double breath_scale = 1;  // subject multiplier applied to breath_rate_hz
  std::vector<double> beat_times_s;
  Eigen::VectorXd breath_phase;  // radians, one value per raw sample
  std::vector<std::pair<double, double>> movement_intervals_s;
  StageSequence stages;
};

struct SynthRecords {
  RawRecord clean;     // respiratory-effort source, channel "raw"
  RawRecord degraded;  // bed-sensor source, channel "raw"
  GroundTruth truth;
};

/// Markov stage sequence starting from the chain's stationary distribution.
StageSequence sample_stages(const TransitionMatrix& p, std::size_t epochs, KeyedRng& rng);

/// Fully determined by `cfg` (including its seed).
SynthRecords generate(const SynthConfig& cfg);

}  // namespace snz
