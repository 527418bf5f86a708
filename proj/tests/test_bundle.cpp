#include <doctest.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>

#include "snz/bundle.hpp"
#include "snz/config.hpp"
#include "snz/error.hpp"

using namespace snz;
namespace fs = std::filesystem;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::invalid_input;
}

Bundle sample_bundle() {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd;
  Eigen::VectorXd a(240), b(6);
  for (auto& v : a) v = nd(rng);
  for (auto& v : b) v = nd(rng);
  Bundle x;
  x.record_id = "sample";
  x.add("a", 4.0, a);
  x.add("w", 0, b, Shape{2, 3});
  x.stage_codes = std::vector<int>{0, 4};
  x.meta = {{"kind", "test"}, {"note", "x"}};
  return x;
}

void put_u32(std::string& s, std::size_t at, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s[at + i] = static_cast<char>((v >> (8 * i)) & 0xffu);
}

// Bundle with one channel declaring `declared` samples over `actual` payload samples.
std::string forged(int declared, int actual) {
  nlohmann::json h = {{"format_version", 1},
                      {"record_id", "forged"},
                      {"channels", {{{"name", "raw"}, {"sample_rate_hz", 100.0}, {"sample_count", declared}, {"dtype", "f32"}}}}};
  const std::string text = h.dump();
  std::string s = "SNZ0";
  s.append(4, '\0');
  put_u32(s, 4, static_cast<std::uint32_t>(text.size()));
  s += text;
  s.append(static_cast<std::size_t>(4 * actual), '\0');
  return s;
}

}  // namespace

TEST_CASE("bundle round trip is byte identical") {
  const Bundle x = sample_bundle();
  const std::string bytes = serialize_bundle(x);
  CHECK(bytes.substr(0, 4) == "SNZ0");
  const Bundle y = parse_bundle(bytes);
  CHECK(serialize_bundle(y) == bytes);
  CHECK(y.record_id == "sample");
  REQUIRE(y.channels.size() == 2);
  CHECK(y.channels[0].data == x.channels[0].data);
  CHECK(y.channels[1].shape == Shape{2, 3});
  CHECK(*y.stage_codes == std::vector<int>{0, 4});
  CHECK(y.meta["note"] == "x");

  const fs::path p = fs::temp_directory_path() / "snz_test_roundtrip.snz";
  write_bundle(x, p);
  CHECK(serialize_bundle(read_bundle(p)) == bytes);
  CHECK_FALSE(fs::exists(p.string() + ".tmp"));
  fs::remove(p);
}

TEST_CASE("bundle rejects malformed files") {
  std::string bytes = serialize_bundle(sample_bundle());
  SUBCASE("bad magic") {
    bytes.replace(0, 4, "XXXX");
    CHECK(code_of([&] { parse_bundle(bytes); }) == ErrorCode::bad_magic);
  }
  SUBCASE("declared count exceeds payload") {
    try {
      parse_bundle(forged(100, 50), "f.snz");
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::count_mismatch);
      CHECK(std::string(e.what()).find("channel raw") != std::string::npos);
    }
  }
  SUBCASE("undeclared trailing samples") { CHECK(code_of([&] { parse_bundle(forged(50, 51)); }) == ErrorCode::count_mismatch); }
  SUBCASE("partial sample") {
    bytes.pop_back();
    CHECK(code_of([&] { parse_bundle(bytes); }) == ErrorCode::truncated_payload);
  }
  SUBCASE("file ends inside the header") {
    CHECK(code_of([&] { parse_bundle(bytes.substr(0, 20)); }) == ErrorCode::truncated_payload);
    CHECK(code_of([&] { parse_bundle(bytes.substr(0, 6)); }) == ErrorCode::truncated_payload);
  }
  SUBCASE("unsupported version") {
    Bundle b = sample_bundle();
    b.format_version = 2;
    CHECK(code_of([&] { parse_bundle(serialize_bundle(b)); }) == ErrorCode::unsupported_version);
  }
  SUBCASE("stage code out of range") {
    Bundle b = sample_bundle();
    b.stage_codes = std::vector<int>{5};
    CHECK(code_of([&] { serialize_bundle(b); }) == ErrorCode::invalid_input);
  }
  SUBCASE("missing channel") { CHECK(code_of([&] { sample_bundle().channel("raw"); }) == ErrorCode::missing_channel); }
}

TEST_CASE("typed views round trip") {
  SynthConfig cfg;
  cfg.seed = 3;
  cfg.duration_s = 300;
  const SynthRecords rec = generate(cfg);

  const Bundle raw = to_bundle(rec.degraded);
  const RawRecord back = raw_record_from_bundle(parse_bundle(serialize_bundle(raw)));
  CHECK(back.id == rec.degraded.id);
  CHECK(back.source == SourceKind::bed_sensor);
  CHECK(back.stages->stages == rec.degraded.stages->stages);
  CHECK(back.channel("raw").samples.isApprox(rec.degraded.channel("raw").samples, 1e-6));
  CHECK(inspect(raw).ok);

  const Extraction ex = extract_components(rec.clean);
  const Bundle comp = to_bundle("c", ex.components, ex.stages);
  const ComponentSet c = components_from_bundle(parse_bundle(serialize_bundle(comp)));
  CHECK(c.epochs() == 10);
  CHECK(c.movement.values == ex.components.movement.values);
  CHECK(inspect(comp).ok);
  CHECK(inspect(comp).text.find("epochs: 10") != std::string::npos);

  CHECK(inspect(to_bundle("t", rec.truth, cfg.raw_rate_hz)).ok);
  CHECK(code_of([&] { components_from_bundle(raw); }) == ErrorCode::invalid_input);
}

TEST_CASE("inspect flags broken invariants") {
  SynthConfig cfg;
  cfg.duration_s = 120;
  const Extraction ex = extract_components(generate(cfg).clean);
  Bundle comp = to_bundle("c", ex.components, ex.stages);
  comp.stage_codes->push_back(1);
  CHECK_FALSE(inspect(comp).ok);
  Bundle mv = to_bundle("c", ex.components, ex.stages);
  mv.channels[2].data[0] = 0.5f;
  CHECK_FALSE(inspect(mv).ok);
}

TEST_CASE("checkpoint round trip") {
  SleepNet<float> net(ModelConfig::tiny(), 11);
  const Bundle b = checkpoint_bundle(net, {{"tag", 1}});
  const std::string bytes = serialize_bundle(b);
  const Bundle parsed = parse_bundle(bytes);
  SleepNet<float> back = model_from_checkpoint(parsed);
  CHECK(serialize_bundle(checkpoint_bundle(back, {{"tag", 1}})) == bytes);
  REQUIRE(back.params().entries().size() == net.params().entries().size());
  for (std::size_t i = 0; i < net.params().entries().size(); ++i) {
    CHECK(back.params().entries()[i].tensor.value() == net.params().entries()[i].tensor.value());
  }
  CHECK(inspect(parsed).ok);

  Bundle wrong = parsed;
  wrong.channels[0].shape = {static_cast<Eigen::Index>(wrong.channels[0].data.size())};
  CHECK(code_of([&] { model_from_checkpoint(wrong); }) == ErrorCode::shape);
}

TEST_CASE("pipeline config") {
  const PipelineConfig d = PipelineConfig::from_json(nlohmann::json::object());
  CHECK(d.extract.beats.band_low_hz == 0.7);
  CHECK(d.extract.breath.low_hz == 0.1);
  CHECK(d.extract.cleaning.high_ms == 2000.0);
  CHECK(d.extract.movement.multiplier == 5.0);
  CHECK(d.train.lr == 1.1e-4);
  CHECK(d.train.weight_decay == 1e-5);
  CHECK(d.train.augmentation.speed_low == 0.75);
  CHECK(d.model.d_model == 512);

  SUBCASE("round trip through JSON") {
    PipelineConfig c;
    c.model = ModelConfig::tiny();
    c.train.batch_size = 8;
    c.extract.cleaning.low_ms = 250;
    const PipelineConfig back = PipelineConfig::from_json(c.to_json());
    CHECK(back.to_json() == c.to_json());
  }
  SUBCASE("model preset with an override") {
    const PipelineConfig c = PipelineConfig::from_json({{"model", {{"preset", "tiny"}, {"heads", 2}}}});
    CHECK(c.model.d_model == 64);
    CHECK(c.model.heads == 2);
  }
  SUBCASE("unknown keys name their path") {
    try {
      PipelineConfig::from_json({{"extract", {{"beats", {{"band_lo_hz", 1}}}}}});
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::invalid_config);
      CHECK(std::string(e.what()).find("config.extract.beats.band_lo_hz") != std::string::npos);
    }
    CHECK(code_of([] { PipelineConfig::from_json({{"seed", 1}}); }) == ErrorCode::invalid_config);
  }
  SUBCASE("wrong types and bad values") {
    CHECK(code_of([] { PipelineConfig::from_json({{"train", {{"lr", "fast"}}}}); }) == ErrorCode::invalid_config);
    CHECK(code_of([] { PipelineConfig::from_json({{"train", {{"batch_size", 0}}}}); }) == ErrorCode::invalid_config);
  }
}
