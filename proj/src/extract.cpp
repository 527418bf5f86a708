#include <algorithm>
#include <cmath>
#include <limits>

#include "snz/error.hpp"
#include "snz/extract.hpp"

namespace snz {

std::string to_string(SourceKind s) {
  return s == SourceKind::bed_sensor ? "bed-sensor" : "respiratory-effort";
}

SourceKind source_from_string(const std::string& s) {
  if (s == "bed-sensor") return SourceKind::bed_sensor;
  if (s == "respiratory-effort") return SourceKind::respiratory_effort;
  fail(ErrorCode::invalid_input, "unknown source kind '" + s + "'");
}

// ---- breath ----------------------------------------------------------------------------

namespace {

Eigen::VectorXd cumulative_trapezoid(const Eigen::VectorXd& x, double dt) {
  Eigen::VectorXd out(x.size());
  double acc = 0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (i > 0) acc += 0.5 * dt * (x[i - 1] + x[i]);
    out[i] = acc;
  }
  return out;
}

void remove_linear_trend(Eigen::VectorXd& x) {
  const Eigen::Index n = x.size();
  if (n < 2) return;
  const Eigen::VectorXd t = Eigen::VectorXd::LinSpaced(n, 0.0, static_cast<double>(n - 1));
  const double t_mean = t.mean();
  const double x_mean = x.mean();
  const Eigen::VectorXd tc = t.array() - t_mean;
  const double slope = tc.dot(x) / tc.squaredNorm();
  x = x.array() - x_mean - slope * tc.array();
}

}  // namespace

Waveform extract_breath(const Waveform& w, SourceKind source, const BreathConfig& cfg, bool* degenerate) {
  if (w.empty() || w.duration_s() < cfg.min_duration_s) {
    fail(ErrorCode::invalid_input, "extract_breath: need at least " + std::to_string(cfg.min_duration_s) + " s of signal");
  }
  const FilterCoeffs band = design_bessel_bandpass(cfg.low_hz, cfg.high_hz, cfg.order, w.sample_rate_hz);
  Waveform breath = resample_linear(apply_filter(band, w), kComponentRateHz);
  if (source == SourceKind::bed_sensor) {
    // Bed sensors see breathing flux; integrate to a volume-like signal.
    breath.samples = cumulative_trapezoid(breath.samples, 1.0 / kComponentRateHz);
    remove_linear_trend(breath.samples);
  }
  Normalized z = zscore(breath);
  if (degenerate) *degenerate = z.degenerate;
  z.signal.label = "breath";
  return z.signal;
}

// ---- movement --------------------------------------------------------------------------

Eigen::VectorXd window_peak_to_peak(const Waveform& w, double window_s) {
  const Eigen::Index windows = floor_count(w.duration_s() / window_s);
  Eigen::VectorXd p2p(windows);
  const double per_window = window_s * w.sample_rate_hz;
  for (Eigen::Index k = 0; k < windows; ++k) {
    const auto lo = static_cast<Eigen::Index>(std::llround(static_cast<double>(k) * per_window));
    const auto hi = std::min(w.size(), static_cast<Eigen::Index>(std::llround(static_cast<double>(k + 1) * per_window)));
    const auto seg = w.samples.segment(lo, hi - lo);
    p2p[k] = seg.maxCoeff() - seg.minCoeff();
  }
  return p2p;
}

BinaryMask detect_movement(const Waveform& w, const MovementConfig& cfg) {
  const double min_s = cfg.window_s * (cfg.baseline_windows + 1);
  if (w.empty() || w.duration_s() < min_s) {
    fail(ErrorCode::invalid_input, "detect_movement: need at least " + std::to_string(min_s) + " s of signal");
  }
  const Eigen::VectorXd p2p = window_peak_to_peak(w, cfg.window_s);
  const Eigen::Index windows = p2p.size();
  const Eigen::Index nb = cfg.baseline_windows;
  std::vector<std::uint8_t> flagged(static_cast<std::size_t>(windows), 0);
  Eigen::VectorXd baseline(nb);

  for (Eigen::Index k = nb; k < windows; ++k) {
    // The 15 most recent unflagged windows within a 2x look-back; fall back to the
    // plain trailing windows after a sustained level change.
    Eigen::Index found = 0;
    for (Eigen::Index j = k - 1; j >= 0 && j >= k - 2 * nb && found < nb; --j) {
      if (!flagged[static_cast<std::size_t>(j)]) baseline[found++] = p2p[j];
    }
    if (found < nb) baseline = p2p.segment(k - nb, nb);

    const double mu = baseline.mean();
    const double sigma_raw = std::sqrt((baseline.array() - mu).square().mean());
    const double sigma = std::max(sigma_raw, cfg.sigma_floor_rel * std::max(mu, std::numeric_limits<double>::min()));
    flagged[static_cast<std::size_t>(k)] = p2p[k] > mu + cfg.multiplier * sigma ? 1 : 0;
  }

  const Eigen::Index n_out = floor_count(w.duration_s() * kComponentRateHz);
  const auto per_window = static_cast<Eigen::Index>(std::llround(cfg.window_s * kComponentRateHz));
  BinaryMask mask{MaskVector::Zero(n_out), kComponentRateHz};
  for (Eigen::Index k = 0; k < windows; ++k) {
    if (!flagged[static_cast<std::size_t>(k)]) continue;
    const Eigen::Index lo = k * per_window;
    const Eigen::Index len = std::min(per_window, n_out - lo);
    if (len > 0) mask.values.segment(lo, len).setOnes();
  }
  return mask;
}

// ---- whole record ----------------------------------------------------------------------

const Waveform* RawRecord::find(const std::string& name) const noexcept {
  for (const auto& c : channels) {
    if (c.label == name) return &c;
  }
  return nullptr;
}

const Waveform& RawRecord::channel(const std::string& name) const {
  const Waveform* w = find(name);
  if (!w) fail(ErrorCode::missing_channel, "record '" + id + "' has no channel '" + name + "'");
  return *w;
}

Extraction extract_components(const RawRecord& record, const ExtractConfig& cfg) {
  const Waveform& cardiac = record.channel(cfg.cardiac_channel);
  const Waveform& breath_raw = record.channel(cfg.breath_channel);
  const Waveform& move_raw = record.channel(cfg.movement_channel);

  const double d_min = std::min({cardiac.duration_s(), breath_raw.duration_s(), move_raw.duration_s()});
  const double d_max = std::max({cardiac.duration_s(), breath_raw.duration_s(), move_raw.duration_s()});
  if (d_max - d_min > kEpochSeconds) {
    fail(ErrorCode::inconsistent_record, "record '" + record.id + "': channel durations differ by more than 30 s");
  }

  int epochs = static_cast<int>(floor_count(d_min / kEpochSeconds));
  if (record.stages) {
    const int labelled = static_cast<int>(record.stages->size());
    if (labelled < epochs - 1) {
      fail(ErrorCode::inconsistent_record, "record '" + record.id + "': " + std::to_string(labelled) +
                                               " stage labels for " + std::to_string(epochs) + " epochs");
    }
    epochs = std::min(epochs, labelled);
  }
  if (epochs < 1) fail(ErrorCode::record_too_short, "record '" + record.id + "' is shorter than one epoch");

  Extraction out;
  out.beats = clean_nn_intervals(detect_beats(cardiac, cfg.beats), cfg.cleaning);
  Waveform heartbeat = interpolate_ibi(out.beats, cardiac.duration_s());
  Waveform breath = extract_breath(breath_raw, record.source, cfg.breath, &out.breath_degenerate);
  BinaryMask movement = detect_movement(move_raw, cfg.movement);

  const Eigen::Index len = static_cast<Eigen::Index>(epochs) * kSamplesPerEpoch;
  if (heartbeat.size() < len || breath.size() < len || movement.size() < len) {
    fail(ErrorCode::inconsistent_record, "record '" + record.id + "': component shorter than 120 * T samples");
  }
  heartbeat.samples.conservativeResize(len);
  breath.samples.conservativeResize(len);
  movement.values.conservativeResize(len);
  out.components = ComponentSet{std::move(heartbeat), std::move(breath), std::move(movement)};
  if (record.stages) out.stages = slice_epochs(*record.stages, 0, epochs);
  return out;
}

}  // namespace snz
