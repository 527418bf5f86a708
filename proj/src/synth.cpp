#include "snz/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "snz/error.hpp"

namespace snz {

TransitionMatrix default_transition_matrix(const StageArray& target, double rate) {
  // W-N1, W-N2, W-R, N1-N2, N1-R, N2-N3, N2-R
  Eigen::Matrix<int, kNumStages, kNumStages> adj;
  adj << 0, 1, 1, 0, 1,
         1, 0, 1, 0, 1,
         1, 1, 0, 1, 1,
         0, 0, 1, 0, 0,
         1, 1, 1, 0, 0;
  TransitionMatrix p = TransitionMatrix::Zero();
  for (int i = 0; i < kNumStages; ++i) {
    double off = 0;
    for (int j = 0; j < kNumStages; ++j) {
      if (adj(i, j)) off += (p(i, j) = rate * target[j]);
    }
    if (off >= 1) fail(ErrorCode::invalid_config, "transition rate too large for a valid chain");
    p(i, i) = 1 - off;
  }
  return p;
}

StageArray stationary_distribution(const TransitionMatrix& p) {
  Eigen::EigenSolver<Eigen::Matrix<double, kNumStages, kNumStages>> es(p.transpose());
  int best = 0;
  for (int i = 1; i < kNumStages; ++i) {
    if (std::abs(es.eigenvalues()[i] - 1.0) < std::abs(es.eigenvalues()[best] - 1.0)) best = i;
  }
  const Eigen::Matrix<double, kNumStages, 1> v = es.eigenvectors().col(best).real();
  StageArray out{};
  for (int i = 0; i < kNumStages; ++i) out[i] = v[i] / v.sum();
  return out;
}

void SynthConfig::validate() const {
  auto bad = [](const std::string& m) { fail(ErrorCode::invalid_config, "synth config: " + m); };
  if (!(duration_s >= 60)) bad("duration must be at least 60 s");
  if (!(raw_rate_hz >= 40)) bad("raw rate must be at least 40 Hz");
  for (int i = 0; i < kNumStages; ++i) {
    if (std::abs(transition.row(i).sum() - 1.0) > 1e-9 || (transition.row(i).array() < 0).any()) {
      bad("transition row " + std::to_string(i) + " is not a probability distribution");
    }
    if (!(hr_mean_bpm[i] > 0) || !(rr_sd_ms[i] >= 0) || !(breath_rate_hz[i] > 0) || !(breath_amplitude[i] > 0) ||
        !(movement_per_min[i] >= 0)) {
      bad("per-stage rates must be positive");
    }
  }
  if (!(subject_hr_sd >= 0 && subject_breath_sd >= 0)) bad("subject spreads must be non-negative");
  if (!(rr_ar >= 0 && rr_ar < 1)) bad("rr_ar must be in [0, 1)");
  if (!(beat_amplitude > 0 && beat_frequency_hz > 0 && beat_width_s > 0)) bad("beat shape must be positive");
  if (!(movement_min_s > 0 && movement_max_s >= movement_min_s && movement_amplitude > 0)) bad("movement burst shape invalid");
  if (!(missed_beat_probability >= 0 && missed_beat_probability < 1)) bad("missed-beat probability must be in [0, 1)");
  if (!(drift_depth >= 0 && drift_depth < 1 && drift_period_s > 0)) bad("drift depth must be in [0, 1)");
}

StageSequence sample_stages(const TransitionMatrix& p, std::size_t epochs, KeyedRng& rng) {
  const StageArray pi = stationary_distribution(p);
  auto draw = [&rng](auto&& prob) {
    const double u = rng.uniform();
    double acc = 0;
    for (int c = 0; c < kNumStages; ++c) {
      acc += prob(c);
      if (u < acc) return c;
    }
    return kNumStages - 1;
  };
  StageSequence y;
  y.stages.reserve(epochs);
  if (epochs == 0) return y;
  int s = draw([&](int c) { return pi[c]; });
  y.stages.push_back(stage_from_code(s));
  for (std::size_t e = 1; e < epochs; ++e) {
    s = draw([&](int c) { return p(s, c); });
    y.stages.push_back(stage_from_code(s));
  }
  return y;
}

SynthRecords generate(const SynthConfig& cfg) {
  cfg.validate();
  const KeyedRng root(cfg.seed);
  const double fs = cfg.raw_rate_hz;
  const Eigen::Index n = floor_count(cfg.duration_s * fs);
  const double dur = static_cast<double>(n) / fs;
  const auto full_epochs = static_cast<std::size_t>(std::ceil(dur / kEpochSeconds));

  KeyedRng stage_rng = root.split("stages");
  const StageSequence all_stages = sample_stages(cfg.transition, full_epochs, stage_rng);
  auto stage_at = [&](double t) {
    const auto e = std::min(full_epochs - 1, static_cast<std::size_t>(std::max(0.0, t) / kEpochSeconds));
    return stage_code(all_stages.stages[e]);
  };

  GroundTruth truth;
  KeyedRng subject_rng = root.split("subject");
  truth.hr_scale = std::exp(cfg.subject_hr_sd * subject_rng.normal());
  truth.breath_scale = std::exp(cfg.subject_breath_sd * subject_rng.normal());
  truth.stages.stages.assign(all_stages.stages.begin(), all_stages.stages.begin() + floor_count(dur / kEpochSeconds));

  // Beats.
  KeyedRng beat_rng = root.split("beats");
  double jitter = 0;
  for (double t = beat_rng.uniform(0.1, 1.0); t < dur;) {
    truth.beat_times_s.push_back(t);
    const int s = stage_at(t);
    jitter = cfg.rr_ar * jitter + cfg.rr_sd_ms[s] * std::sqrt(1 - cfg.rr_ar * cfg.rr_ar) * beat_rng.normal();
    const double rr = std::clamp(60000.0 / (cfg.hr_mean_bpm[s] * truth.hr_scale) + jitter, 300.0, 2000.0);
    t += rr / 1000.0;
  }

  // Breathing volume with continuous phase.
  KeyedRng breath_rng = root.split("breath");
  std::vector<double> epoch_rate(full_epochs);
  for (std::size_t e = 0; e < full_epochs; ++e) {
    epoch_rate[e] = cfg.breath_rate_hz[stage_code(all_stages.stages[e])] * truth.breath_scale * (1 + cfg.breath_rate_jitter * breath_rng.normal());
  }
  truth.breath_phase.resize(n);
  Eigen::VectorXd volume(n), flux(n);
  double phase = breath_rng.uniform(0, 2 * std::numbers::pi);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / fs;
    const auto e = std::min(full_epochs - 1, static_cast<std::size_t>(t / kEpochSeconds));
    const double amp = cfg.breath_amplitude[stage_code(all_stages.stages[e])];
    truth.breath_phase[i] = phase;
    volume[i] = amp * std::sin(phase);
    // Flux normalized by the angular rate so both forms have comparable amplitude.
    flux[i] = amp * std::cos(phase);
    phase += 2 * std::numbers::pi * epoch_rate[e] / fs;
  }

  // Movement bursts.
  KeyedRng move_rng = root.split("movement");
  double free_from = cfg.movement_start_s;
  for (std::size_t e = 0; e < full_epochs; ++e) {
    const double p = cfg.movement_per_min[stage_code(all_stages.stages[e])] * kEpochSeconds / 60.0;
    const double coin = move_rng.uniform();
    const double start = e * kEpochSeconds + move_rng.uniform(0, kEpochSeconds);
    const double len = move_rng.uniform(cfg.movement_min_s, cfg.movement_max_s);
    if (coin >= p || start < free_from || start + len > dur) continue;
    truth.movement_intervals_s.emplace_back(start, start + len);
    free_from = start + len + cfg.movement_min_gap_s;
  }

  // Beat waveforms; the degraded sensor misses some of them.
  Eigen::VectorXd beats_clean = Eigen::VectorXd::Zero(n), beats_degraded = Eigen::VectorXd::Zero(n);
  KeyedRng miss_rng = root.split("missed");
  const double half = 4 * cfg.beat_width_s;
  for (double tb : truth.beat_times_s) {
    const bool missed = miss_rng.uniform() < cfg.missed_beat_probability;
    const auto lo = std::max<Eigen::Index>(0, static_cast<Eigen::Index>(std::ceil((tb - half) * fs)));
    const auto hi = std::min<Eigen::Index>(n - 1, static_cast<Eigen::Index>(std::floor((tb + half) * fs)));
    for (Eigen::Index i = lo; i <= hi; ++i) {
      const double d = static_cast<double>(i) / fs - tb;
      const double v = cfg.beat_amplitude * std::exp(-0.5 * d * d / (cfg.beat_width_s * cfg.beat_width_s)) *
                       std::cos(2 * std::numbers::pi * cfg.beat_frequency_hz * d);
      beats_clean[i] += v;
      if (!missed) beats_degraded[i] += v;
    }
  }

  auto noise_sd = [](const Eigen::VectorXd& s, double snr_db) {
    return std::sqrt(s.squaredNorm() / static_cast<double>(s.size()) / std::pow(10.0, snr_db / 10.0));
  };
  auto add_bursts = [&](Eigen::VectorXd& x, KeyedRng rng) {
    for (const auto& [a, b] : truth.movement_intervals_s) {
      const double scale = cfg.movement_amplitude * rng.uniform(0.7, 1.3);
      const auto lo = static_cast<Eigen::Index>(std::ceil(a * fs));
      const auto hi = std::min<Eigen::Index>(n - 1, static_cast<Eigen::Index>(std::floor(b * fs)));
      for (Eigen::Index i = lo; i <= hi; ++i) x[i] += scale * rng.normal();
    }
  };

  Eigen::VectorXd clean = beats_clean + volume;
  {
    KeyedRng r = root.split("clean-noise");
    const double sd = noise_sd(clean, cfg.clean_snr_db);
    for (auto& v : clean) v += sd * r.normal();
    add_bursts(clean, root.split("clean-bursts"));
  }

  Eigen::VectorXd degraded = beats_degraded + flux;
  {
    KeyedRng r = root.split("degraded-noise");
    const double sd = noise_sd(degraded, cfg.degraded_snr_db);
    for (auto& v : degraded) v += sd * r.normal();
    add_bursts(degraded, root.split("degraded-bursts"));
    const double drift_phase = r.uniform(0, 2 * std::numbers::pi);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) / fs;
      degraded[i] *= 1 + cfg.drift_depth * std::sin(2 * std::numbers::pi * t / cfg.drift_period_s + drift_phase);
    }
  }

  const std::string id = "synth-" + std::to_string(cfg.seed);
  SynthRecords out;
  out.clean = RawRecord{id + "-clean", SourceKind::respiratory_effort, {Waveform{std::move(clean), fs, "raw"}}, truth.stages};
  out.degraded = RawRecord{id + "-degraded", SourceKind::bed_sensor, {Waveform{std::move(degraded), fs, "raw"}}, truth.stages};
  out.truth = std::move(truth);
  return out;
}

}  // namespace snz
