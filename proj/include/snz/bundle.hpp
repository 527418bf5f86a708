#pragma once

// Single-file record container:
//   "SNZ0" | u32 LE header length | JSON header | f32 LE channel payloads.
// The header lists channels in payload order; stage codes and free-form
// metadata live in the header.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "json.hpp"
#include "snz/config.hpp"
#include "snz/extract.hpp"
#include "snz/model.hpp"
#include "snz/signal.hpp"
#include "snz/synth.hpp"

namespace snz {

inline constexpr int kBundleVersion = 1;

struct BundleChannel {
  std::string name;
  double sample_rate_hz = 0;  // 0 for channels that are not time series
  Shape shape;                // product = sample count; a plain vector has shape {count}
  Eigen::VectorXf data;
};

struct Bundle {
  int format_version = kBundleVersion;
  std::string record_id;
  std::vector<BundleChannel> channels;
  std::optional<std::vector<int>> stage_codes;
  nlohmann::json meta = nlohmann::json::object();

  const BundleChannel* find(std::string_view name) const noexcept;
  /// Throws missing-channel.
  const BundleChannel& channel(std::string_view name) const;
  void add(std::string name, double sample_rate_hz, const Eigen::Ref<const Eigen::VectorXd>& values, Shape shape = {});
};

std::string serialize_bundle(const Bundle& b);
/// `origin` names the source in diagnostics.
Bundle parse_bundle(std::string_view bytes, const std::string& origin = "bundle");

/// Atomic: writes a sibling temporary file, then renames it over `path`.
void write_bundle(const Bundle& b, const std::filesystem::path& path);
Bundle read_bundle(const std::filesystem::path& path);
void write_text_atomic(const std::string& text, const std::filesystem::path& path);

// ---- typed views ---------------------------------------------------------------------------

/// meta.kind = "raw", meta.source = source kind.
Bundle to_bundle(const RawRecord& r);
RawRecord raw_record_from_bundle(const Bundle& b);

/// meta.kind = "components": heartbeat, breath, movement at 4 Hz.
Bundle to_bundle(const std::string& id, const ComponentSet& c, const std::optional<StageSequence>& stages);
ComponentSet components_from_bundle(const Bundle& b);
std::optional<StageSequence> stages_from_bundle(const Bundle& b);

/// meta.kind = "truth": beat_times [n], movement_intervals [k, 2], breath_phase (raw rate).
Bundle to_bundle(const std::string& id, const GroundTruth& t, double raw_rate_hz);

/// meta.kind = "checkpoint": every named tensor with its shape; meta.model holds the config.
Bundle checkpoint_bundle(const SleepNet<float>& model, const nlohmann::json& extra = nlohmann::json::object());
/// Builds the network described by the checkpoint and loads its tensors.
SleepNet<float> model_from_checkpoint(const Bundle& b);

/// Human-readable header summary plus invariant checks; `ok` is false if any check failed.
struct InspectReport {
  std::string text;
  bool ok = true;
};
InspectReport inspect(const Bundle& b);

}  // namespace snz
