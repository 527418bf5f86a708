#include "snz/train.hpp"

#include <cmath>
#include <iostream>
#include <sstream>

#include "snz/error.hpp"
#include "snz/optim.hpp"

namespace snz {

void TrainConfig::validate() const {
  auto bad = [](const std::string& m) { fail(ErrorCode::invalid_config, "train config: " + m); };
  if (epochs < 1 || steps_per_epoch < 1 || batch_size < 1) bad("epochs, steps_per_epoch and batch_size must be positive");
  if (!(lr >= 0) || !(weight_decay >= 0)) bad("lr and weight_decay must be non-negative");
  if (!(dropout >= 0 && dropout < 1)) bad("dropout must be in [0, 1)");
  if (crop_epochs < 2) bad("crop_epochs must be at least 2");
  augmentation.validate();
}

namespace {

struct Crop {
  ComponentSet components;
  StageSequence stages;
};

Crop sample_crop(const LabeledRecord& r, const TrainConfig& cfg, KeyedRng& rng) {
  const int total = static_cast<int>(r.stages.stages.size());
  // Enough source epochs that the slowest perturbation still yields a full crop.
  const int want = cfg.augment ? static_cast<int>(std::ceil(cfg.crop_epochs * cfg.augmentation.speed_high)) : cfg.crop_epochs;
  const int window = std::min(total, want);
  const int first = static_cast<int>(rng.uniform() * (total - window + 1));
  Crop c{r.components.slice_epochs(first, window), slice_epochs(r.stages, first, window)};
  if (cfg.augment) {
    Perturbed p = augment(c.components, c.stages, rng, cfg.augmentation);
    c.components = std::move(p.components);
    c.stages = std::move(p.stages);
  }
  return c;
}

std::vector<std::pair<std::string, Tensor<float>>> named_trainable(SleepNet<float>& model) {
  std::vector<std::pair<std::string, Tensor<float>>> out;
  for (const auto& e : model.params().entries()) {
    if (e.trainable) out.emplace_back(e.name, e.tensor);
  }
  return out;
}

}  // namespace

TrainResult train(SleepNet<float>& model, const std::vector<LabeledRecord>& data, const std::vector<LabeledRecord>& validation,
                  const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  TrainResult result;
  std::vector<const LabeledRecord*> usable;
  for (const auto& r : data) {
    if (static_cast<int>(r.stages.stages.size()) < cfg.crop_epochs) {
      std::cerr << "warning: skipping record " << r.id << " (" << r.stages.stages.size() << " epochs < crop " << cfg.crop_epochs
                << ")\n";
      ++result.skipped_records;
    } else {
      usable.push_back(&r);
    }
  }
  if (usable.empty()) fail(ErrorCode::no_data, "no training record has at least " + std::to_string(cfg.crop_epochs) + " epochs");

  AdamW<float> opt(named_trainable(model), {cfg.lr, cfg.weight_decay});
  const KeyedRng root = KeyedRng(cfg.seed).split("train");
  std::vector<typename Tensor<float>::Vector> best;
  long step = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    double loss_sum = 0;
    for (int s = 0; s < cfg.steps_per_epoch; ++s, ++step) {
      KeyedRng rng = root.split(static_cast<std::uint64_t>(step));
      std::vector<Crop> crops;
      int len = cfg.crop_epochs;
      for (int b = 0; b < cfg.batch_size; ++b) {
        const auto pick = static_cast<std::size_t>(rng.uniform() * static_cast<double>(usable.size()));
        crops.push_back(sample_crop(*usable[pick], cfg, rng));
        len = std::min(len, crops.back().components.epochs());
      }
      std::vector<const ComponentSet*> batch;
      std::vector<int> labels;
      for (Crop& c : crops) {
        c.components = c.components.slice_epochs(0, len);
        batch.push_back(&c.components);
        for (int t = 0; t < len; ++t) labels.push_back(stage_code(c.stages.stages[static_cast<std::size_t>(t)]));
      }
      model.params().zero_grad();
      KeyedRng dropout_rng = rng.split("dropout");
      Tensor<float> logits = model.logits(make_input<float>(batch), true, &dropout_rng);
      Tensor<float> loss = scale(cross_entropy_logits(logits, labels), 1.0f / static_cast<float>(cfg.batch_size));
      const double value = loss.item();
      if (!std::isfinite(value)) {
        fail(ErrorCode::non_finite_loss, "non-finite loss at epoch " + std::to_string(epoch) + " step " + std::to_string(step) +
                                             " (batch " + std::to_string(cfg.batch_size) + " x " + std::to_string(len) + " epochs)");
      }
      backward(loss);
      opt.step();
      loss_sum += value;
    }
    EpochLog entry{epoch, step, loss_sum / cfg.steps_per_epoch, std::nullopt};
    if (!validation.empty()) {
      entry.validation = evaluate(model, validation);
      if (result.best_epoch < 0 || entry.validation->kappa > result.best_kappa) {
        result.best_epoch = epoch;
        result.best_kappa = entry.validation->kappa;
        best.clear();
        for (const auto& e : model.params().entries()) best.push_back(e.tensor.value());
      }
    }
    result.log.push_back(entry);
    if (on_epoch) on_epoch(entry);
  }
  model.params().zero_grad();
  if (!best.empty()) {
    auto& entries = model.params().entries();
    for (std::size_t i = 0; i < entries.size(); ++i) entries[i].tensor.value() = best[i];
  }
  return result;
}

StageSequence infer(SleepNet<float>& model, const ComponentSet& c) {
  NoGradGuard guard;
  return predict(model.logits(make_input<float>(c), false));
}

MetricsReport evaluate(SleepNet<float>& model, const std::vector<LabeledRecord>& data, Aggregation mode) {
  std::vector<StageSequence> truth, pred;
  for (const auto& r : data) {
    truth.push_back(r.stages);
    pred.push_back(infer(model, r.components));
  }
  return aggregate(truth, pred, mode);
}

std::string training_log_csv(const std::vector<EpochLog>& log) {
  std::ostringstream os;
  os.precision(10);
  os << "epoch,step,loss,val_acc,val_kappa,val_mf1,val_wf1\n";
  for (const auto& e : log) {
    os << e.epoch << ',' << e.step << ',' << e.loss;
    if (e.validation) {
      os << ',' << e.validation->acc << ',' << e.validation->kappa << ',' << e.validation->mf1 << ',' << e.validation->wf1 << '\n';
    } else {
      os << ",,,,\n";
    }
  }
  return os.str();
}

}  // namespace snz
