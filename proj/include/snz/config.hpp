#pragma once

// Pipeline configuration as one JSON document. Every section is optional and
// starts from the built-in defaults; unknown keys are rejected.
//
// {
//   "extract":  {"cardiac_channel": "raw", ..., "beats": {...}, "cleaning": {...},
//                "breath": {...}, "movement": {...}},
//   "augment":  {"amp_low": 0.9, "amp_high": 1.1, "speed_low": 0.75, "speed_high": 1.25, "seed": 0},
//   "model":    {"preset": "default", ...overrides},
//   "train":    {"epochs": 50, "steps_per_epoch": 300, "batch_size": 32, "lr": 1.1e-4, ...},
//   "model_seed": 0
// }

#include <cstdint>
#include <filesystem>

#include "json.hpp"
#include "snz/augment.hpp"
#include "snz/extract.hpp"
#include "snz/model.hpp"
#include "snz/train.hpp"

namespace snz {

struct PipelineConfig {
  ExtractConfig extract;
  ModelConfig model = ModelConfig::default_preset();
  TrainConfig train;  // train.augmentation mirrors the "augment" section
  std::uint64_t model_seed = 0;

  static PipelineConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

PipelineConfig load_pipeline_config(const std::filesystem::path& path);

/// Preset first, then any listed field overrides it.
ModelConfig model_config_from_json(const nlohmann::json& j);
nlohmann::json model_config_to_json(const ModelConfig& c);

}  // namespace snz
