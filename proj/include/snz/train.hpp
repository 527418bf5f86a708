#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "snz/augment.hpp"
#include "snz/metrics.hpp"
#include "snz/model.hpp"
#include "snz/signal.hpp"

namespace snz {

struct LabeledRecord {
  std::string id;
  ComponentSet components;
  StageSequence stages;
};

struct TrainConfig {
  int epochs = 50;
  int steps_per_epoch = 300;
  int batch_size = 32;
  double lr = 1.1e-4;
  double weight_decay = 1e-5;
  double dropout = 0.05;
  int crop_epochs = 120;
  std::uint64_t seed = 0;
  bool augment = true;
  AugmentConfig augmentation;

  void validate() const;
};

struct EpochLog {
  int epoch = 0;
  long step = 0;      // optimizer steps completed
  double loss = 0;    // mean per-crop loss over the epoch's steps
  std::optional<MetricsReport> validation;
};

struct TrainResult {
  std::vector<EpochLog> log;
  int best_epoch = -1;  // -1 without validation data
  double best_kappa = 0;
  std::size_t skipped_records = 0;
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// One optimizer step per batch of random crops (augmented when enabled). Loss per
/// crop is the summed per-epoch cross-entropy; the batch loss is the mean over crops.
/// With validation data the best-kappa parameters are restored into `model` at the end.
TrainResult train(SleepNet<float>& model, const std::vector<LabeledRecord>& data, const std::vector<LabeledRecord>& validation,
                  const TrainConfig& cfg, const EpochCallback& on_epoch = {});

/// Whole-record eval-mode prediction.
StageSequence infer(SleepNet<float>& model, const ComponentSet& c);

MetricsReport evaluate(SleepNet<float>& model, const std::vector<LabeledRecord>& data, Aggregation mode = Aggregation::pooled);

/// "epoch,step,loss,val_acc,val_kappa,val_mf1,val_wf1" rows; empty fields without validation.
std::string training_log_csv(const std::vector<EpochLog>& log);

}  // namespace snz
