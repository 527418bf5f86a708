#include "snz/augment.hpp"

#include <cmath>
#include <complex>
#include <numbers>

#include <unsupported/Eigen/FFT>

#include "snz/error.hpp"

namespace snz {

void AugmentConfig::validate() const {
  if (!(amp_low > 0 && amp_low <= amp_high)) fail(ErrorCode::invalid_config, "augment: need 0 < amp_low <= amp_high");
  if (!(speed_low > 0 && speed_low <= speed_high)) fail(ErrorCode::invalid_config, "augment: need 0 < speed_low <= speed_high");
}

ComponentSet amplify(const ComponentSet& c, double heartbeat_gain, double breath_gain) {
  c.validate();
  ComponentSet out = c;
  out.heartbeat.samples *= heartbeat_gain;
  out.breath.samples *= breath_gain;
  return out;
}

ComponentSet amplify(const ComponentSet& c, KeyedRng& rng, const AugmentConfig& cfg) {
  cfg.validate();
  const double a1 = rng.uniform(cfg.amp_low, cfg.amp_high);
  const double a2 = rng.uniform(cfg.amp_low, cfg.amp_high);
  return amplify(c, a1, a2);
}

std::vector<int> resample_labels(int source_epochs, int target_epochs) {
  if (source_epochs < 1 || target_epochs < 1) fail(ErrorCode::invalid_input, "resample_labels: epoch counts must be positive");
  std::vector<int> map(static_cast<std::size_t>(target_epochs));
  const auto t = static_cast<std::int64_t>(source_epochs);
  const auto tp = static_cast<std::int64_t>(target_epochs);
  for (std::int64_t i = 1; i <= tp; ++i) {
    // floor(T (i - 1/2) / T') in exact integer arithmetic.
    map[static_cast<std::size_t>(i - 1)] = static_cast<int>((t * (2 * i - 1)) / (2 * tp) + 1);
  }
  return map;
}

Perturbed speed_perturb(const ComponentSet& c, const StageSequence& y, double beta) {
  const int epochs = c.epochs();
  if (static_cast<int>(y.size()) != epochs) {
    fail(ErrorCode::invalid_input, "speed_perturb: " + std::to_string(y.size()) + " labels for " + std::to_string(epochs) + " epochs");
  }
  if (!(beta > 0)) fail(ErrorCode::invalid_input, "speed_perturb: beta must be positive");
  const auto new_epochs = static_cast<int>(floor_count(static_cast<double>(epochs) / beta));
  if (new_epochs < 1) fail(ErrorCode::record_too_short, "speed_perturb: record shorter than 30 * beta seconds");

  Perturbed out;
  out.beta = beta;
  const Eigen::Index len = static_cast<Eigen::Index>(new_epochs) * kSamplesPerEpoch;
  // Resampling at 4 / beta Hz reads the original at t * beta; relabel the result as 4 Hz.
  const double read_rate = kComponentRateHz / beta;
  auto stretch = [&](const Waveform& w) {
    Waveform r = resample_linear(w, read_rate);
    r.sample_rate_hz = kComponentRateHz;
    if (r.size() < len) r.samples.conservativeResizeLike(Eigen::VectorXd::Constant(len, r.samples[r.size() - 1]));
    r.samples.conservativeResize(len);
    return r;
  };
  out.components.heartbeat = stretch(c.heartbeat);
  out.components.breath = stretch(c.breath);
  BinaryMask m = mask_resample_nearest(c.movement, read_rate);
  m.sample_rate_hz = kComponentRateHz;
  if (m.size() < len) m.values.conservativeResizeLike(MaskVector::Constant(len, m.values[m.size() - 1]));
  m.values.conservativeResize(len);
  out.components.movement = std::move(m);

  out.stages.stages.reserve(static_cast<std::size_t>(new_epochs));
  for (int t : resample_labels(epochs, new_epochs)) out.stages.stages.push_back(y.stages[static_cast<std::size_t>(t - 1)]);
  return out;
}

Perturbed speed_perturb(const ComponentSet& c, const StageSequence& y, KeyedRng& rng, const AugmentConfig& cfg) {
  cfg.validate();
  return speed_perturb(c, y, rng.uniform(cfg.speed_low, cfg.speed_high));
}

Perturbed augment(const ComponentSet& c, const StageSequence& y, KeyedRng& rng, const AugmentConfig& cfg) {
  return speed_perturb(amplify(c, rng, cfg), y, rng, cfg);
}

Eigen::VectorXd welch_psd(const Eigen::VectorXd& x, double fs, Eigen::Index segment) {
  if (x.size() < segment || segment < 2) fail(ErrorCode::invalid_input, "welch_psd: signal shorter than one segment");
  const Eigen::Index step = segment / 2;
  const Eigen::Index bins = segment / 2 + 1;
  Eigen::VectorXd window(segment);
  for (Eigen::Index i = 0; i < segment; ++i) {
    // Periodic Hann.
    window[i] = 0.5 - 0.5 * std::cos(2 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(segment));
  }
  const double scale = 1.0 / (fs * window.squaredNorm());

  Eigen::FFT<double> fft;
  std::vector<double> buf(static_cast<std::size_t>(segment));
  std::vector<std::complex<double>> spec;
  Eigen::VectorXd psd = Eigen::VectorXd::Zero(bins);
  Eigen::Index count = 0;
  for (Eigen::Index start = 0; start + segment <= x.size(); start += step, ++count) {
    const auto seg = x.segment(start, segment);
    const double mean = seg.mean();
    for (Eigen::Index i = 0; i < segment; ++i) buf[static_cast<std::size_t>(i)] = (seg[i] - mean) * window[i];
    fft.fwd(spec, buf);
    for (Eigen::Index k = 0; k < bins; ++k) psd[k] += std::norm(spec[static_cast<std::size_t>(k)]);
  }
  psd *= scale / static_cast<double>(count);
  // Fold negative frequencies, except DC and Nyquist.
  psd.segment(1, bins - 2) *= 2.0;
  return psd;
}

Eigen::VectorXd spectral_signature(const ComponentSet& c) {
  c.validate();
  if (c.heartbeat.size() < 512) fail(ErrorCode::invalid_input, "spectral_signature: need at least 512 samples");
  const Eigen::VectorXd h = welch_psd(c.heartbeat.samples, kComponentRateHz);
  const Eigen::VectorXd b = welch_psd(c.breath.samples, kComponentRateHz);
  Eigen::VectorXd out(h.size() + b.size());
  out << h, b;
  return out;
}

}  // namespace snz
