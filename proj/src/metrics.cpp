#include "snz/metrics.hpp"

#include <cstdio>
#include <sstream>

#include "snz/error.hpp"

namespace snz {

ConfusionCounts confusion_counts(const StageSequence& y, const StageSequence& y_hat) {
  if (y.stages.size() != y_hat.stages.size()) {
    fail(ErrorCode::shape, "label sequences differ in length: " + std::to_string(y.stages.size()) + " vs " +
                               std::to_string(y_hat.stages.size()));
  }
  ConfusionCounts c = ConfusionCounts::Zero();
  for (std::size_t t = 0; t < y.stages.size(); ++t) ++c(stage_code(y.stages[t]), stage_code(y_hat.stages[t]));
  return c;
}

namespace {

void require_nonempty(const StageSequence& y) {
  if (y.stages.empty()) fail(ErrorCode::invalid_input, "metrics need at least one epoch");
}

double kappa_from_counts(const ConfusionCounts& c) {
  const double t = static_cast<double>(c.sum());
  const double matches = static_cast<double>(c.trace());
  // sum_i sum_j 1[y_i = yhat_j] = sum_c n_true(c) n_pred(c)
  const double chance = (c.rowwise().sum().cast<double>().array() * c.colwise().sum().transpose().cast<double>().array()).sum();
  const double denom = t * t - chance;
  if (denom == 0) return 1.0;
  return (t * matches - chance) / denom;
}

}  // namespace

MetricsReport MetricsReport::from_counts(const ConfusionCounts& counts) {
  MetricsReport r;
  r.counts = counts;
  r.epochs = counts.sum();
  if (r.epochs == 0) fail(ErrorCode::invalid_input, "metrics need at least one epoch");
  const double total = static_cast<double>(r.epochs);
  r.acc = static_cast<double>(counts.trace()) / total;
  r.kappa = kappa_from_counts(counts);
  for (int c = 0; c < kNumStages; ++c) {
    const double tp = static_cast<double>(counts(c, c));
    const double support = static_cast<double>(counts.row(c).sum());
    const double predicted = static_cast<double>(counts.col(c).sum());
    r.precision[c] = predicted > 0 ? tp / predicted : 0.0;
    r.recall[c] = support > 0 ? tp / support : 0.0;
    const double pr = r.precision[c] + r.recall[c];
    r.f1[c] = pr > 0 ? 2 * r.precision[c] * r.recall[c] / pr : 0.0;
    r.mf1 += r.f1[c] / kNumStages;
    r.wf1 += r.f1[c] * support / total;
    r.zero_support[c] = support == 0;
    if (support > 0) r.confusion.row(c) = counts.row(c).cast<double>() / support;
  }
  return r;
}

MetricsReport MetricsReport::from(const StageSequence& y, const StageSequence& y_hat) {
  require_nonempty(y);
  return from_counts(confusion_counts(y, y_hat));
}

double accuracy(const StageSequence& y, const StageSequence& y_hat) {
  require_nonempty(y);
  const ConfusionCounts c = confusion_counts(y, y_hat);
  return static_cast<double>(c.trace()) / static_cast<double>(c.sum());
}

double cohen_kappa(const StageSequence& y, const StageSequence& y_hat) {
  require_nonempty(y);
  return kappa_from_counts(confusion_counts(y, y_hat));
}

double macro_f1(const StageSequence& y, const StageSequence& y_hat) { return MetricsReport::from(y, y_hat).mf1; }
double weighted_f1(const StageSequence& y, const StageSequence& y_hat) { return MetricsReport::from(y, y_hat).wf1; }

std::string MetricsReport::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "metric,value\n";
  os << "acc," << acc << "\nkappa," << kappa << "\nmf1," << mf1 << "\nwf1," << wf1 << "\nepochs," << epochs << "\n";
  for (int c = 0; c < kNumStages; ++c) {
    const std::string n(stage_name(stage_from_code(c)));
    os << "precision_" << n << ',' << precision[c] << "\nrecall_" << n << ',' << recall[c] << "\nf1_" << n << ',' << f1[c] << "\n";
  }
  for (int i = 0; i < kNumStages; ++i) {
    for (int j = 0; j < kNumStages; ++j) {
      os << "confusion_" << stage_name(stage_from_code(i)) << '_' << stage_name(stage_from_code(j)) << ',' << confusion(i, j) << "\n";
    }
  }
  return os.str();
}

std::string MetricsReport::pretty() const {
  std::ostringstream os;
  char buf[160];
  std::snprintf(buf, sizeof buf, "epochs %ld  ACC %.3f  kappa %.3f  MF1 %.3f  WF1 %.3f\n", epochs, acc, kappa, mf1, wf1);
  os << buf << "true\\pred     W     N1     N2     N3      R   support\n";
  for (int i = 0; i < kNumStages; ++i) {
    std::snprintf(buf, sizeof buf, "%-8s", std::string(stage_name(stage_from_code(i))).c_str());
    os << buf;
    for (int j = 0; j < kNumStages; ++j) {
      std::snprintf(buf, sizeof buf, " %6.3f", confusion(i, j));
      os << buf;
    }
    std::snprintf(buf, sizeof buf, " %8ld%s\n", counts.row(i).sum(), zero_support[i] ? "  (no support)" : "");
    os << buf;
  }
  return os.str();
}

MetricsReport aggregate(const std::vector<StageSequence>& truth, const std::vector<StageSequence>& predicted, Aggregation mode) {
  if (truth.size() != predicted.size()) fail(ErrorCode::shape, "truth and prediction record counts differ");
  if (truth.empty()) fail(ErrorCode::no_data, "no records to evaluate");
  ConfusionCounts total = ConfusionCounts::Zero();
  double acc = 0, kappa = 0, mf1 = 0, wf1 = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const ConfusionCounts c = confusion_counts(truth[i], predicted[i]);
    total += c;
    if (mode == Aggregation::per_record) {
      const MetricsReport r = MetricsReport::from_counts(c);
      acc += r.acc;
      kappa += r.kappa;
      mf1 += r.mf1;
      wf1 += r.wf1;
    }
  }
  MetricsReport r = MetricsReport::from_counts(total);
  if (mode == Aggregation::per_record) {
    const double n = static_cast<double>(truth.size());
    r.acc = acc / n;
    r.kappa = kappa / n;
    r.mf1 = mf1 / n;
    r.wf1 = wf1 / n;
  }
  return r;
}

}  // namespace snz
