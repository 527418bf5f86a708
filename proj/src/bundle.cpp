#include "snz/bundle.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>
#include <system_error>

#include "snz/error.hpp"

namespace snz {

using nlohmann::json;

namespace {

constexpr std::string_view kMagic = "SNZ0";

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

std::uint32_t get_u32(const char* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  return v;
}

Shape plain_shape(Eigen::Index n) { return Shape{n}; }

std::string fmt(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

}  // namespace

// ---- Bundle ------------------------------------------------------------------------------------

const BundleChannel* Bundle::find(std::string_view name) const noexcept {
  for (const auto& c : channels) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

const BundleChannel& Bundle::channel(std::string_view name) const {
  const BundleChannel* c = find(name);
  if (!c) fail(ErrorCode::missing_channel, "bundle " + record_id + " has no channel '" + std::string(name) + "'");
  return *c;
}

void Bundle::add(std::string name, double sample_rate_hz, const Eigen::Ref<const Eigen::VectorXd>& values, Shape shape) {
  if (shape.empty()) shape = plain_shape(values.size());
  if (shape_numel(shape) != values.size()) {
    fail(ErrorCode::count_mismatch, "channel " + name + ": shape " + shape_string(shape) + " does not hold " + std::to_string(values.size()) + " values");
  }
  channels.push_back({std::move(name), sample_rate_hz, std::move(shape), values.cast<float>()});
}

// ---- wire format -------------------------------------------------------------------------------

std::string serialize_bundle(const Bundle& b) {
  json table = json::array();
  std::size_t total = 0;
  for (const auto& c : b.channels) {
    const Shape shape = c.shape.empty() ? plain_shape(c.data.size()) : c.shape;
    if (shape_numel(shape) != c.data.size()) {
      fail(ErrorCode::count_mismatch, "channel " + c.name + ": shape " + shape_string(shape) + " does not match " + std::to_string(c.data.size()) + " samples");
    }
    table.push_back({{"name", c.name}, {"sample_rate_hz", c.sample_rate_hz}, {"sample_count", c.data.size()}, {"dtype", "f32"}, {"shape", shape}});
    total += static_cast<std::size_t>(c.data.size());
  }
  json header = {{"format_version", b.format_version}, {"record_id", b.record_id}, {"channels", table}, {"meta", b.meta}};
  if (b.stage_codes) {
    for (int code : *b.stage_codes) stage_from_code(code);
    header["stages"] = {{"epoch_s", kEpochSeconds}, {"codes", *b.stage_codes}};
  }
  const std::string text = header.dump();

  std::string out;
  out.reserve(8 + text.size() + 4 * total);
  out.append(kMagic);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.append(text);
  for (const auto& c : b.channels) {
    for (float v : c.data) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

Bundle parse_bundle(std::string_view bytes, const std::string& origin) {
  if (bytes.size() < kMagic.size() || bytes.substr(0, kMagic.size()) != kMagic) {
    fail(ErrorCode::bad_magic, origin + ": not a record bundle (bad magic)");
  }
  if (bytes.size() < 8) fail(ErrorCode::truncated_payload, origin + ": file ends inside the header length");
  const std::size_t header_len = get_u32(bytes.data() + 4);
  if (bytes.size() - 8 < header_len) fail(ErrorCode::truncated_payload, origin + ": file ends inside the header");

  json header;
  try {
    header = json::parse(bytes.substr(8, header_len));
  } catch (const json::exception& e) {
    fail(ErrorCode::invalid_input, origin + ": malformed header: " + e.what());
  }

  Bundle b;
  try {
    b.format_version = header.at("format_version").get<int>();
    if (b.format_version != kBundleVersion) {
      fail(ErrorCode::unsupported_version, origin + ": format version " + std::to_string(b.format_version) + " is not supported");
    }
    b.record_id = header.at("record_id").get<std::string>();
    if (header.contains("meta")) b.meta = header.at("meta");
    if (header.contains("stages")) {
      const json& st = header.at("stages");
      if (st.at("epoch_s").get<int>() != kEpochSeconds) fail(ErrorCode::invalid_input, origin + ": stage epochs must be 30 s");
      std::vector<int> codes = st.at("codes").get<std::vector<int>>();
      for (int code : codes) {
        if (code < 0 || code >= kNumStages) fail(ErrorCode::invalid_input, origin + ": stage code out of range: " + std::to_string(code));
      }
      b.stage_codes = std::move(codes);
    }

    std::string_view payload = bytes.substr(8 + header_len);
    if (payload.size() % 4 != 0) fail(ErrorCode::truncated_payload, origin + ": payload length is not a whole number of samples");
    std::size_t offset = 0;
    std::string last;
    for (const json& entry : header.at("channels")) {
      BundleChannel c;
      c.name = entry.at("name").get<std::string>();
      c.sample_rate_hz = entry.at("sample_rate_hz").get<double>();
      const std::string dtype = entry.at("dtype").get<std::string>();
      if (dtype != "f32") fail(ErrorCode::unsupported_version, origin + ": channel " + c.name + " has unsupported dtype " + dtype);
      const auto count = entry.at("sample_count").get<std::int64_t>();
      if (count < 0) fail(ErrorCode::count_mismatch, origin + ": channel " + c.name + " declares a negative sample count");
      c.shape = entry.contains("shape") ? entry.at("shape").get<Shape>() : plain_shape(count);
      if (shape_numel(c.shape) != count) {
        fail(ErrorCode::count_mismatch, origin + ": channel " + c.name + " shape " + shape_string(c.shape) + " does not match its " + std::to_string(count) + " samples");
      }
      const std::size_t available = (payload.size() - offset) / 4;
      if (static_cast<std::size_t>(count) > available) {
        fail(ErrorCode::count_mismatch, origin + ": channel " + c.name + " declares " + std::to_string(count) + " samples but the payload holds " +
                                            std::to_string(available));
      }
      c.data.resize(count);
      for (std::int64_t i = 0; i < count; ++i) c.data[i] = std::bit_cast<float>(get_u32(payload.data() + offset + 4 * i));
      offset += 4 * static_cast<std::size_t>(count);
      last = c.name;
      b.channels.push_back(std::move(c));
    }
    if (offset != payload.size()) {
      fail(ErrorCode::count_mismatch, origin + ": " + std::to_string((payload.size() - offset) / 4) + " undeclared samples after " +
                                          (last.empty() ? std::string("the header") : "channel " + last));
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::invalid_input, origin + ": malformed header: " + e.what());
  }
  return b;
}

void write_text_atomic(const std::string& text, const std::filesystem::path& path) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::io, "cannot write " + tmp.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.flush();
    if (!out) fail(ErrorCode::io, "write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    fail(ErrorCode::io, "cannot move into place: " + path.string());
  }
}

void write_bundle(const Bundle& b, const std::filesystem::path& path) { write_text_atomic(serialize_bundle(b), path); }

Bundle read_bundle(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_bundle(bytes, path.string());
}

// ---- typed views -------------------------------------------------------------------------------

namespace {

std::vector<int> codes_of(const StageSequence& y) {
  std::vector<int> codes;
  codes.reserve(y.size());
  for (Stage s : y.stages) codes.push_back(stage_code(s));
  return codes;
}

std::string kind_of(const Bundle& b) { return b.meta.is_object() && b.meta.contains("kind") && b.meta["kind"].is_string() ? b.meta["kind"].get<std::string>() : ""; }

void expect_kind(const Bundle& b, const std::string& kind) {
  const std::string k = kind_of(b);
  if (k != kind) fail(ErrorCode::invalid_input, "bundle " + b.record_id + " holds '" + k + "' data, expected '" + kind + "'");
}

}  // namespace

Bundle to_bundle(const RawRecord& r) {
  Bundle b;
  b.record_id = r.id;
  b.meta = {{"kind", "raw"}, {"source", to_string(r.source)}};
  for (const auto& w : r.channels) b.add(w.label, w.sample_rate_hz, w.samples);
  if (r.stages) b.stage_codes = codes_of(*r.stages);
  return b;
}

RawRecord raw_record_from_bundle(const Bundle& b) {
  expect_kind(b, "raw");
  RawRecord r;
  r.id = b.record_id;
  if (!b.meta.contains("source") || !b.meta["source"].is_string()) fail(ErrorCode::invalid_input, "bundle " + b.record_id + " has no source kind");
  r.source = source_from_string(b.meta["source"].get<std::string>());
  for (const auto& c : b.channels) {
    if (!(c.sample_rate_hz > 0)) fail(ErrorCode::invalid_input, "channel " + c.name + " has no sample rate");
    r.channels.push_back({c.data.cast<double>(), c.sample_rate_hz, c.name});
  }
  r.stages = stages_from_bundle(b);
  return r;
}

Bundle to_bundle(const std::string& id, const ComponentSet& c, const std::optional<StageSequence>& stages) {
  c.validate();
  Bundle b;
  b.record_id = id;
  b.meta = {{"kind", "components"}};
  b.add("heartbeat", c.heartbeat.sample_rate_hz, c.heartbeat.samples);
  b.add("breath", c.breath.sample_rate_hz, c.breath.samples);
  b.add("movement", c.movement.sample_rate_hz, c.movement.values.cast<double>());
  if (stages) b.stage_codes = codes_of(*stages);
  return b;
}

ComponentSet components_from_bundle(const Bundle& b) {
  expect_kind(b, "components");
  const BundleChannel& hb = b.channel("heartbeat");
  const BundleChannel& br = b.channel("breath");
  const BundleChannel& mv = b.channel("movement");
  ComponentSet c{{hb.data.cast<double>(), hb.sample_rate_hz, "heartbeat"}, {br.data.cast<double>(), br.sample_rate_hz, "breath"}, {MaskVector(mv.data.size()), mv.sample_rate_hz}};
  for (Eigen::Index i = 0; i < mv.data.size(); ++i) {
    const float v = mv.data[i];
    if (v != 0.0f && v != 1.0f) fail(ErrorCode::invalid_input, "bundle " + b.record_id + ": movement channel is not binary");
    c.movement.values[i] = static_cast<std::uint8_t>(v);
  }
  c.validate();
  return c;
}

std::optional<StageSequence> stages_from_bundle(const Bundle& b) {
  if (!b.stage_codes) return std::nullopt;
  StageSequence y;
  for (int code : *b.stage_codes) y.stages.push_back(stage_from_code(code));
  return y;
}

Bundle to_bundle(const std::string& id, const GroundTruth& t, double raw_rate_hz) {
  Bundle b;
  b.record_id = id;
  b.meta = {{"kind", "truth"}, {"hr_scale", t.hr_scale}, {"breath_scale", t.breath_scale}};
  b.add("beat_times", 0, Eigen::Map<const Eigen::VectorXd>(t.beat_times_s.data(), static_cast<Eigen::Index>(t.beat_times_s.size())));
  Eigen::VectorXd iv(2 * static_cast<Eigen::Index>(t.movement_intervals_s.size()));
  for (std::size_t i = 0; i < t.movement_intervals_s.size(); ++i) {
    iv[2 * static_cast<Eigen::Index>(i)] = t.movement_intervals_s[i].first;
    iv[2 * static_cast<Eigen::Index>(i) + 1] = t.movement_intervals_s[i].second;
  }
  b.add("movement_intervals", 0, iv, Shape{static_cast<Eigen::Index>(t.movement_intervals_s.size()), 2});
  b.add("breath_phase", raw_rate_hz, t.breath_phase);
  b.stage_codes = codes_of(t.stages);
  return b;
}

Bundle checkpoint_bundle(const SleepNet<float>& model, const json& extra) {
  Bundle b;
  b.record_id = "checkpoint";
  b.meta = {{"kind", "checkpoint"}, {"model", model_config_to_json(model.config())}};
  if (!extra.is_null() && !extra.empty()) b.meta["extra"] = extra;
  for (const auto& e : model.params().entries()) {
    b.channels.push_back({e.name, 0, e.tensor.shape(), e.tensor.value()});
  }
  return b;
}

SleepNet<float> model_from_checkpoint(const Bundle& b) {
  expect_kind(b, "checkpoint");
  SleepNet<float> net(model_config_from_json(b.meta.at("model")), 0);
  if (b.channels.size() != net.params().entries().size()) {
    fail(ErrorCode::count_mismatch, "checkpoint holds " + std::to_string(b.channels.size()) + " tensors, model expects " +
                                        std::to_string(net.params().entries().size()));
  }
  for (auto& e : net.params().entries()) {
    const BundleChannel& c = b.channel(e.name);
    if (c.shape != e.tensor.shape()) {
      fail(ErrorCode::shape, "checkpoint tensor " + e.name + " has shape " + shape_string(c.shape) + ", model expects " + shape_string(e.tensor.shape()));
    }
    e.tensor.value() = c.data;
  }
  return net;
}

// ---- inspect -----------------------------------------------------------------------------------

InspectReport inspect(const Bundle& b) {
  InspectReport r;
  std::ostringstream out;
  const std::string kind = kind_of(b);
  out << "record_id: " << b.record_id << "\n";
  out << "format_version: " << b.format_version << "\n";
  out << "kind: " << (kind.empty() ? "unknown" : kind) << "\n";
  out << "channels: " << b.channels.size() << "\n";
  for (const auto& c : b.channels) {
    out << "  " << c.name << "  rate=" << fmt(c.sample_rate_hz) << " Hz  samples=" << c.data.size() << "  shape=" << shape_string(c.shape);
    if (c.sample_rate_hz > 0) out << "  duration=" << fmt(static_cast<double>(c.data.size()) / c.sample_rate_hz) << " s";
    out << "\n";
  }
  if (b.stage_codes) {
    std::array<int, kNumStages> counts{};
    for (int code : *b.stage_codes) ++counts[static_cast<std::size_t>(code)];
    out << "epochs: " << b.stage_codes->size() << "  (";
    for (int k = 0; k < kNumStages; ++k) out << (k ? " " : "") << kStageNames[static_cast<std::size_t>(k)] << "=" << counts[static_cast<std::size_t>(k)];
    out << ")\n";
  } else if (kind == "components" && b.find("heartbeat")) {
    out << "epochs: " << b.channel("heartbeat").data.size() / kSamplesPerEpoch << "  (unlabeled)\n";
  }

  auto check = [&](const std::string& name, auto&& body) {
    std::string detail;
    bool ok = true;
    try {
      ok = body(detail);
    } catch (const std::exception& e) {
      ok = false;
      detail = e.what();
    }
    out << "check " << name << ": " << (ok ? "ok" : "FAIL");
    if (!ok && !detail.empty()) out << " (" << detail << ")";
    out << "\n";
    r.ok = r.ok && ok;
  };

  check("channel shapes match sample counts", [&](std::string& d) {
    for (const auto& c : b.channels) {
      if (shape_numel(c.shape) != c.data.size()) return d = c.name, false;
    }
    return true;
  });
  check("stage codes in 0..4", [&](std::string& d) {
    if (!b.stage_codes) return true;
    for (int code : *b.stage_codes) {
      if (code < 0 || code >= kNumStages) return d = std::to_string(code), false;
    }
    return true;
  });

  if (kind == "raw") {
    check("samples finite", [&](std::string& d) {
      for (const auto& c : b.channels) {
        if (!c.data.allFinite()) return d = c.name, false;
      }
      return true;
    });
    check("source kind known", [&](std::string&) {
      source_from_string(b.meta.at("source").get<std::string>());
      return true;
    });
    check("channels are time series", [&](std::string& d) {
      for (const auto& c : b.channels) {
        if (!(c.sample_rate_hz > 0) || c.shape.size() != 1) return d = c.name, false;
      }
      return true;
    });
    if (b.stage_codes) {
      check("one stage per whole 30 s epoch", [&](std::string& d) {
        for (const auto& c : b.channels) {
          const auto whole = static_cast<std::size_t>(floor_count(c.data.size() / c.sample_rate_hz / kEpochSeconds));
          if (whole != b.stage_codes->size()) return d = c.name + " has " + std::to_string(whole) + " whole epochs", false;
        }
        return true;
      });
    }
  } else if (kind == "components") {
    check("component set invariants (4 Hz, aligned, 120 samples per epoch, binary movement)", [&](std::string&) {
      components_from_bundle(b);
      return true;
    });
    check("heartbeat and breath finite", [&](std::string&) { return b.channel("heartbeat").data.allFinite() && b.channel("breath").data.allFinite(); });
    if (b.stage_codes) {
      check("one stage per epoch", [&](std::string& d) {
        const auto epochs = static_cast<std::size_t>(b.channel("heartbeat").data.size() / kSamplesPerEpoch);
        if (epochs != b.stage_codes->size()) return d = std::to_string(epochs) + " epochs vs " + std::to_string(b.stage_codes->size()) + " stages", false;
        return true;
      });
    }
  } else if (kind == "truth") {
    check("beat times increasing", [&](std::string&) {
      const Eigen::VectorXf& t = b.channel("beat_times").data;
      for (Eigen::Index i = 1; i < t.size(); ++i) {
        if (!(t[i] > t[i - 1])) return false;
      }
      return true;
    });
    check("movement intervals ordered", [&](std::string&) {
      const BundleChannel& c = b.channel("movement_intervals");
      if (c.shape.size() != 2 || c.shape[1] != 2) return false;
      for (Eigen::Index i = 0; i < c.shape[0]; ++i) {
        if (!(c.data[2 * i + 1] > c.data[2 * i])) return false;
      }
      return true;
    });
  } else if (kind == "checkpoint") {
    check("tensors match the model configuration", [&](std::string&) {
      const SleepNet<float> net = model_from_checkpoint(b);
      out << "  (" << net.params().trainable_count() << " trainable parameters, preset " << net.config().preset << ")\n";
      return true;
    });
    check("parameters finite", [&](std::string& d) {
      for (const auto& c : b.channels) {
        if (!c.data.allFinite()) return d = c.name, false;
      }
      return true;
    });
  } else {
    check("known bundle kind", [&](std::string& d) { return d = kind, false; });
  }
  r.text = out.str();
  return r;
}

}  // namespace snz
