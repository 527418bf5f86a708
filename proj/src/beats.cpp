#include <algorithm>
#include <cmath>
#include <vector>

#include "snz/error.hpp"
#include "snz/extract.hpp"

namespace snz {
namespace {

Eigen::VectorXd moving_average(const Eigen::VectorXd& x, Eigen::Index width) {
  width = std::max<Eigen::Index>(1, width | 1);  // odd, centered
  const Eigen::Index half = width / 2;
  const Eigen::Index n = x.size();
  Eigen::VectorXd prefix(n + 1);
  prefix[0] = 0;
  for (Eigen::Index i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + x[i];
  Eigen::VectorXd out(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index lo = std::max<Eigen::Index>(0, i - half);
    const Eigen::Index hi = std::min(n, i + half + 1);
    out[i] = (prefix[hi] - prefix[lo]) / static_cast<double>(hi - lo);
  }
  return out;
}

// Per-sample detection threshold from running order statistics, evaluated on a coarse grid.
Eigen::VectorXd adaptive_threshold(const Eigen::VectorXd& env, double fs, const BeatDetectorConfig& cfg) {
  const Eigen::Index n = env.size();
  const auto half = static_cast<Eigen::Index>(std::lround(cfg.median_window_s * fs / 2));
  const Eigen::Index step = std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::lround(0.25 * fs)));
  Eigen::VectorXd thr(n);
  std::vector<double> buf;
  for (Eigen::Index g = 0; g < n; g += step) {
    const Eigen::Index center = std::min(n - 1, g + step / 2);
    const Eigen::Index lo = std::max<Eigen::Index>(0, center - half);
    const Eigen::Index hi = std::min(n, center + half + 1);
    buf.assign(env.data() + lo, env.data() + hi);
    const auto mid = buf.begin() + static_cast<std::ptrdiff_t>(buf.size() / 2);
    std::nth_element(buf.begin(), mid, buf.end());
    const double median = *mid;
    const auto p90 = buf.begin() + static_cast<std::ptrdiff_t>(0.9 * static_cast<double>(buf.size() - 1));
    std::nth_element(buf.begin(), p90, buf.end());
    const double value = std::max(cfg.threshold_factor * median, cfg.min_peak_fraction * *p90);
    thr.segment(g, std::min(step, n - g)).setConstant(value);
  }
  return thr;
}

}  // namespace

BeatSeries detect_beats(const Waveform& w, const BeatDetectorConfig& cfg, std::vector<double>* peaks_s) {
  if (w.empty() || w.duration_s() < 10.0) fail(ErrorCode::invalid_input, "detect_beats: need at least 10 s of signal");
  const double fs = w.sample_rate_hz;
  const FilterCoeffs band = design_bessel_bandpass(cfg.band_low_hz, cfg.band_high_hz, cfg.band_order, fs);
  const Waveform cardiac = apply_filter_zero_phase(band, w);
  const Eigen::VectorXd env = moving_average(cardiac.samples.array().square().matrix(),
                                             static_cast<Eigen::Index>(std::lround(cfg.smoothing_s * fs)));
  const Eigen::VectorXd thr = adaptive_threshold(env, fs, cfg);

  std::vector<Eigen::Index> picked;
  const auto refractory = static_cast<Eigen::Index>(std::lround(cfg.refractory_s * fs));
  for (Eigen::Index i = 1; i + 1 < env.size(); ++i) {
    if (!(env[i] > env[i - 1] && env[i] >= env[i + 1] && env[i] > thr[i] && env[i] > 0)) continue;
    if (!picked.empty() && i - picked.back() < refractory) {
      if (env[i] > env[picked.back()]) picked.back() = i;
      continue;
    }
    picked.push_back(i);
  }

  // Refine each envelope peak to the energy maximum of the band-passed signal nearby;
  // the smoothed envelope can be flat-topped or twin-lobed around a beat.
  const Eigen::VectorXd energy = cardiac.samples.array().square();
  const auto reach = static_cast<Eigen::Index>(std::lround(0.1 * fs));
  std::vector<double> times;
  times.reserve(picked.size());
  for (Eigen::Index i : picked) {
    const Eigen::Index lo = std::max<Eigen::Index>(1, i - reach);
    const Eigen::Index hi = std::min(energy.size() - 2, i + reach);
    Eigen::Index best = lo;
    for (Eigen::Index j = lo; j <= hi; ++j) {
      if (energy[j] > energy[best]) best = j;
    }
    const double l = energy[best - 1], c = energy[best], r = energy[best + 1];
    const double denom = l - 2 * c + r;
    const double offset = denom < 0 ? std::clamp(0.5 * (l - r) / denom, -0.5, 0.5) : 0.0;
    const double t = (static_cast<double>(best) + offset) / fs;
    if (times.empty() || t > times.back()) times.push_back(t);
  }
  if (peaks_s) *peaks_s = times;
  if (times.size() < 2) fail(ErrorCode::insufficient_beats, "detect_beats: found " + std::to_string(times.size()) + " peaks");

  BeatSeries out;
  const auto n = static_cast<Eigen::Index>(times.size() - 1);
  out.end_times_s.resize(n);
  out.intervals_ms.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out.end_times_s[i] = times[static_cast<std::size_t>(i + 1)];
    out.intervals_ms[i] = (times[static_cast<std::size_t>(i + 1)] - times[static_cast<std::size_t>(i)]) * 1000.0;
  }
  return out;
}

BeatSeries clean_nn_intervals(const BeatSeries& b, const CleaningConfig& cfg) {
  if (b.size() < 1) fail(ErrorCode::invalid_input, "clean_nn_intervals: empty beat series");
  const Eigen::Index n = b.size();
  std::vector<bool> keep(static_cast<std::size_t>(n), false);
  auto differs = [&](double t, double ref) { return std::abs(t - ref) > cfg.ectopic_fraction * ref; };
  double prev_valid = -1;
  std::vector<Eigen::Index> run;  // consecutive rejected intervals that agree with each other
  for (Eigen::Index i = 0; i < n; ++i) {
    const double t = b.intervals_ms[i];
    if (!(t >= cfg.low_ms && t <= cfg.high_ms)) {
      run.clear();
      continue;
    }
    if (prev_valid > 0 && differs(t, prev_valid)) {
      if (!run.empty() && differs(t, b.intervals_ms[run.back()])) run.clear();
      run.push_back(i);
      if (cfg.reanchor_count > 0 && static_cast<int>(run.size()) >= cfg.reanchor_count) {
        for (Eigen::Index j : run) keep[static_cast<std::size_t>(j)] = true;
        prev_valid = t;
        run.clear();
      }
      continue;
    }
    run.clear();
    keep[static_cast<std::size_t>(i)] = true;
    prev_valid = t;
  }

  Eigen::Index first = 0;
  while (first < n && !keep[static_cast<std::size_t>(first)]) ++first;
  if (first == n) fail(ErrorCode::empty_after_cleaning, "clean_nn_intervals: every interval was removed");
  Eigen::Index last = n - 1;
  while (!keep[static_cast<std::size_t>(last)]) --last;

  BeatSeries out;
  out.end_times_s = b.end_times_s.segment(first, last - first + 1);
  out.intervals_ms = b.intervals_ms.segment(first, last - first + 1);
  // Interior removals: interpolate by index between the surviving neighbours.
  Eigen::Index left = first;
  for (Eigen::Index i = first + 1; i <= last; ++i) {
    if (!keep[static_cast<std::size_t>(i)]) continue;
    if (i - left > 1) {
      const double a = b.intervals_ms[left], c = b.intervals_ms[i];
      for (Eigen::Index j = left + 1; j < i; ++j) {
        const double frac = static_cast<double>(j - left) / static_cast<double>(i - left);
        out.intervals_ms[j - first] = a + frac * (c - a);
      }
    }
    left = i;
  }
  return out;
}

Waveform interpolate_ibi(const BeatSeries& b, double duration_s) {
  if (b.empty()) fail(ErrorCode::invalid_input, "interpolate_ibi: empty beat series");
  const Eigen::Index n_out = floor_count(duration_s * kComponentRateHz);
  Waveform out{Eigen::VectorXd(n_out), kComponentRateHz, "heartbeat"};
  const Eigen::Index n = b.size();
  Eigen::Index seg = 0;
  for (Eigen::Index j = 0; j < n_out; ++j) {
    const double t = static_cast<double>(j) / kComponentRateHz;
    if (t <= b.end_times_s[0]) {
      out.samples[j] = b.intervals_ms[0];
    } else if (t >= b.end_times_s[n - 1]) {
      out.samples[j] = b.intervals_ms[n - 1];
    } else {
      while (b.end_times_s[seg + 1] < t) ++seg;
      const double t0 = b.end_times_s[seg], t1 = b.end_times_s[seg + 1];
      const double v0 = b.intervals_ms[seg], v1 = b.intervals_ms[seg + 1];
      out.samples[j] = t == t1 ? v1 : v0 + (v1 - v0) * (t - t0) / (t1 - t0);
    }
  }
  return out;
}

}  // namespace snz
