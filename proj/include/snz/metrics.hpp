#pragma once

// Epoch-level sleep-staging agreement metrics and row-normalized confusion.

#include <array>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "snz/signal.hpp"

namespace snz {

using ConfusionCounts = Eigen::Matrix<long, kNumStages, kNumStages, Eigen::RowMajor>;
using ConfusionMatrix = Eigen::Matrix<double, kNumStages, kNumStages, Eigen::RowMajor>;

/// counts(true, predicted). Length mismatch is a shape error.
ConfusionCounts confusion_counts(const StageSequence& y, const StageSequence& y_hat);

double accuracy(const StageSequence& y, const StageSequence& y_hat);
/// Class-count form of kappa; 1 when both sequences are the same constant class.
double cohen_kappa(const StageSequence& y, const StageSequence& y_hat);
/// Mean of the five per-class F1 values (undefined F1 counts as 0).
double macro_f1(const StageSequence& y, const StageSequence& y_hat);
/// Per-class F1 weighted by the class frequency in `y`.
double weighted_f1(const StageSequence& y, const StageSequence& y_hat);

struct MetricsReport {
  double acc = 0, kappa = 0, mf1 = 0, wf1 = 0;
  ConfusionCounts counts = ConfusionCounts::Zero();
  ConfusionMatrix confusion = ConfusionMatrix::Zero();  // rows sum to 1 unless zero_support
  std::array<bool, kNumStages> zero_support{};
  std::array<double, kNumStages> precision{}, recall{}, f1{};
  long epochs = 0;

  /// Everything derived from raw counts.
  static MetricsReport from_counts(const ConfusionCounts& counts);
  static MetricsReport from(const StageSequence& y, const StageSequence& y_hat);

  std::string to_csv() const;
  std::string pretty() const;
};

enum class Aggregation { pooled, per_record };

/// Pooled: one report over all epochs of all records. Per-record: the scalar metrics
/// are averaged over records; counts and confusion stay pooled.
MetricsReport aggregate(const std::vector<StageSequence>& truth, const std::vector<StageSequence>& predicted,
                        Aggregation mode = Aggregation::pooled);

}  // namespace snz
