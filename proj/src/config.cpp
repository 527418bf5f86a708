#include "snz/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "snz/error.hpp"

namespace snz {

using nlohmann::json;

namespace {

// Reads known keys from a JSON object; anything left over is an error.
class Strict {
 public:
  Strict(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(ErrorCode::invalid_config, where() + " must be an object");
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    auto it = j_.find(key);
    if (it == j_.end()) return;
    seen_.insert(key);
    try {
      out = it->get<T>();
    } catch (const json::exception&) {
      fail(ErrorCode::invalid_config, path_ + "." + key + " has the wrong type");
    }
  }

  const json* sub(const std::string& key) {
    auto it = j_.find(key);
    if (it == j_.end()) return nullptr;
    seen_.insert(key);
    return &*it;
  }

  std::string child(const std::string& key) const { return path_ + "." + key; }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) fail(ErrorCode::invalid_config, "unknown key " + path_ + "." + it.key());
    }
  }

 private:
  std::string where() const { return path_; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_extract(const json& j, ExtractConfig& c) {
  Strict s(j, "config.extract");
  s.get("cardiac_channel", c.cardiac_channel);
  s.get("breath_channel", c.breath_channel);
  s.get("movement_channel", c.movement_channel);
  if (const json* b = s.sub("beats")) {
    Strict t(*b, s.child("beats"));
    t.get("band_low_hz", c.beats.band_low_hz);
    t.get("band_high_hz", c.beats.band_high_hz);
    t.get("band_order", c.beats.band_order);
    t.get("smoothing_s", c.beats.smoothing_s);
    t.get("refractory_s", c.beats.refractory_s);
    t.get("threshold_factor", c.beats.threshold_factor);
    t.get("median_window_s", c.beats.median_window_s);
    t.get("min_peak_fraction", c.beats.min_peak_fraction);
    t.finish();
  }
  if (const json* b = s.sub("cleaning")) {
    Strict t(*b, s.child("cleaning"));
    t.get("low_ms", c.cleaning.low_ms);
    t.get("high_ms", c.cleaning.high_ms);
    t.get("ectopic_fraction", c.cleaning.ectopic_fraction);
    t.get("reanchor_count", c.cleaning.reanchor_count);
    t.finish();
  }
  if (const json* b = s.sub("breath")) {
    Strict t(*b, s.child("breath"));
    t.get("low_hz", c.breath.low_hz);
    t.get("high_hz", c.breath.high_hz);
    t.get("order", c.breath.order);
    t.get("min_duration_s", c.breath.min_duration_s);
    t.finish();
  }
  if (const json* b = s.sub("movement")) {
    Strict t(*b, s.child("movement"));
    t.get("window_s", c.movement.window_s);
    t.get("baseline_windows", c.movement.baseline_windows);
    t.get("multiplier", c.movement.multiplier);
    t.get("sigma_floor_rel", c.movement.sigma_floor_rel);
    t.finish();
  }
  s.finish();
}

void read_augment(const json& j, AugmentConfig& c) {
  Strict s(j, "config.augment");
  s.get("amp_low", c.amp_low);
  s.get("amp_high", c.amp_high);
  s.get("speed_low", c.speed_low);
  s.get("speed_high", c.speed_high);
  s.get("seed", c.seed);
  s.finish();
}

void read_train(const json& j, TrainConfig& c) {
  Strict s(j, "config.train");
  s.get("epochs", c.epochs);
  s.get("steps_per_epoch", c.steps_per_epoch);
  s.get("batch_size", c.batch_size);
  s.get("lr", c.lr);
  s.get("weight_decay", c.weight_decay);
  s.get("dropout", c.dropout);
  s.get("crop_epochs", c.crop_epochs);
  s.get("seed", c.seed);
  s.get("augment", c.augment);
  s.finish();
}

}  // namespace

ModelConfig model_config_from_json(const json& j) {
  if (!j.is_object()) fail(ErrorCode::invalid_config, "model config must be an object");
  std::string preset = "default";
  if (j.contains("preset")) {
    if (!j["preset"].is_string()) fail(ErrorCode::invalid_config, "config.model.preset must be a string");
    preset = j["preset"].get<std::string>();
  }
  ModelConfig c = ModelConfig::from_preset(preset);
  Strict s(j, "config.model");
  s.get("preset", c.preset);
  s.get("conv1_channels", c.conv1_channels);
  s.get("conv1_kernel", c.conv1_kernel);
  s.get("conv1_stride", c.conv1_stride);
  s.get("pool_kernel", c.pool_kernel);
  s.get("pool_stride", c.pool_stride);
  if (const json* b = s.sub("blocks")) {
    if (!b->is_array()) fail(ErrorCode::invalid_config, "config.model.blocks must be a list of [channels, stride]");
    c.blocks.clear();
    for (const json& e : *b) {
      if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() || !e[1].is_number_integer()) {
        fail(ErrorCode::invalid_config, "config.model.blocks entries must be [channels, stride]");
      }
      c.blocks.push_back({e[0].get<int>(), e[1].get<int>()});
    }
  }
  s.get("out_dims", c.out_dims);
  s.get("d_model", c.d_model);
  s.get("layers", c.layers);
  s.get("feedforward", c.feedforward);
  s.get("heads", c.heads);
  s.get("dropout", c.dropout);
  s.get("classes", c.classes);
  s.get("hidden", c.hidden);
  s.finish();
  c.validate();
  return c;
}

json model_config_to_json(const ModelConfig& c) {
  json blocks = json::array();
  for (const auto& b : c.blocks) blocks.push_back({b.channels, b.stride});
  return {{"preset", c.preset},       {"conv1_channels", c.conv1_channels}, {"conv1_kernel", c.conv1_kernel},
          {"conv1_stride", c.conv1_stride}, {"pool_kernel", c.pool_kernel},   {"pool_stride", c.pool_stride},
          {"blocks", blocks},         {"out_dims", c.out_dims},             {"d_model", c.d_model},
          {"layers", c.layers},       {"feedforward", c.feedforward},       {"heads", c.heads},
          {"dropout", c.dropout},     {"classes", c.classes},               {"hidden", c.hidden}};
}

PipelineConfig PipelineConfig::from_json(const json& j) {
  PipelineConfig c;
  Strict s(j, "config");
  if (const json* e = s.sub("extract")) read_extract(*e, c.extract);
  if (const json* e = s.sub("augment")) read_augment(*e, c.train.augmentation);
  if (const json* e = s.sub("model")) c.model = model_config_from_json(*e);
  if (const json* e = s.sub("train")) read_train(*e, c.train);
  s.get("model_seed", c.model_seed);
  s.finish();
  c.train.validate();
  c.model.validate();
  return c;
}

json PipelineConfig::to_json() const {
  const ExtractConfig& e = extract;
  const AugmentConfig& a = train.augmentation;
  return {
      {"extract",
       {{"cardiac_channel", e.cardiac_channel},
        {"breath_channel", e.breath_channel},
        {"movement_channel", e.movement_channel},
        {"beats",
         {{"band_low_hz", e.beats.band_low_hz},
          {"band_high_hz", e.beats.band_high_hz},
          {"band_order", e.beats.band_order},
          {"smoothing_s", e.beats.smoothing_s},
          {"refractory_s", e.beats.refractory_s},
          {"threshold_factor", e.beats.threshold_factor},
          {"median_window_s", e.beats.median_window_s},
          {"min_peak_fraction", e.beats.min_peak_fraction}}},
        {"cleaning",
         {{"low_ms", e.cleaning.low_ms},
          {"high_ms", e.cleaning.high_ms},
          {"ectopic_fraction", e.cleaning.ectopic_fraction},
          {"reanchor_count", e.cleaning.reanchor_count}}},
        {"breath",
         {{"low_hz", e.breath.low_hz}, {"high_hz", e.breath.high_hz}, {"order", e.breath.order}, {"min_duration_s", e.breath.min_duration_s}}},
        {"movement",
         {{"window_s", e.movement.window_s},
          {"baseline_windows", e.movement.baseline_windows},
          {"multiplier", e.movement.multiplier},
          {"sigma_floor_rel", e.movement.sigma_floor_rel}}}}},
      {"augment", {{"amp_low", a.amp_low}, {"amp_high", a.amp_high}, {"speed_low", a.speed_low}, {"speed_high", a.speed_high}, {"seed", a.seed}}},
      {"model", model_config_to_json(model)},
      {"train",
       {{"epochs", train.epochs},
        {"steps_per_epoch", train.steps_per_epoch},
        {"batch_size", train.batch_size},
        {"lr", train.lr},
        {"weight_decay", train.weight_decay},
        {"dropout", train.dropout},
        {"crop_epochs", train.crop_epochs},
        {"seed", train.seed},
        {"augment", train.augment}}},
      {"model_seed", model_seed}};
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::invalid_config, "config " + path.string() + " is not valid JSON: " + e.what());
  }
  return PipelineConfig::from_json(j);
}

}  // namespace snz
