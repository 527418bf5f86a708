#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "snz/random.hpp"
#include "snz/signal.hpp"

namespace snz {

struct AugmentConfig {
  double amp_low = 0.9;
  double amp_high = 1.1;
  double speed_low = 0.75;
  double speed_high = 1.25;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Scale heartbeat and breath by independent factors; the movement mask is untouched.
ComponentSet amplify(const ComponentSet& c, double heartbeat_gain, double breath_gain);
ComponentSet amplify(const ComponentSet& c, KeyedRng& rng, const AugmentConfig& cfg = {});

/// Label index map t(i) = floor(T (i - 0.5) / T') + 1 for i = 1..T' (1-based, as written).
std::vector<int> resample_labels(int source_epochs, int target_epochs);

struct Perturbed {
  ComponentSet components;
  StageSequence stages;
  double beta = 1.0;
};

/// Stretch/compress all components and labels by `beta`; beta > 1 speeds up (L' = L / beta).
Perturbed speed_perturb(const ComponentSet& c, const StageSequence& y, double beta);
Perturbed speed_perturb(const ComponentSet& c, const StageSequence& y, KeyedRng& rng, const AugmentConfig& cfg = {});

/// Both augmentations in order (amplify, then speed perturbation).
Perturbed augment(const ComponentSet& c, const StageSequence& y, KeyedRng& rng, const AugmentConfig& cfg = {});

/// One-sided Welch PSD (Hann window, 50 % overlap, per-segment mean removal), density scaling.
Eigen::VectorXd welch_psd(const Eigen::VectorXd& x, double fs, Eigen::Index segment = 256);

/// Concatenated Welch PSDs of heartbeat and breath.
Eigen::VectorXd spectral_signature(const ComponentSet& c);

}  // namespace snz
