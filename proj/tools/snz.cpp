// snz: synth -> extract -> augment -> train -> infer -> eval, plus inspect.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "snz/augment.hpp"
#include "snz/bundle.hpp"
#include "snz/config.hpp"
#include "snz/error.hpp"
#include "snz/extract.hpp"
#include "snz/metrics.hpp"
#include "snz/synth.hpp"
#include "snz/train.hpp"

namespace fs = std::filesystem;
using namespace snz;

namespace {

constexpr int kUsageExit = 2;
constexpr int kInternalExit = 1;
constexpr int kCheckFailedExit = static_cast<int>(ErrorCode::inconsistent_record);

std::string one_line(std::string s) {
  for (char& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

std::string exit_code_table() {
  std::ostringstream s;
  s << "Exit codes:\n  0  success\n  1  internal error\n  2  bad command line\n";
  for (int v : {10, 11, 12, 13, 14, 15, 16, 20, 21, 22, 23, 24, 30, 31, 40, 41, 42, 43, 44}) {
    s << "  " << v << " " << error_name(static_cast<ErrorCode>(v)) << "\n";
  }
  s << "Failures print one line to stderr: error code=<n> kind=<name> message=<text>";
  return s.str();
}

PipelineConfig load_config(const std::string& path) { return path.empty() ? PipelineConfig{} : load_pipeline_config(path); }

LabeledRecord labeled_from_file(const std::string& path) {
  const Bundle b = read_bundle(path);
  auto stages = stages_from_bundle(b);
  if (!stages) fail(ErrorCode::invalid_input, path + " has no stage annotations");
  LabeledRecord r{b.record_id, components_from_bundle(b), *stages};
  if (static_cast<int>(r.stages.size()) != r.components.epochs()) {
    fail(ErrorCode::inconsistent_record, path + ": " + std::to_string(r.stages.size()) + " stages for " + std::to_string(r.components.epochs()) + " epochs");
  }
  return r;
}

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

// Hypnogram CSV: "epoch,stage_code,stage".
std::string hypnogram_csv(const StageSequence& y) {
  std::string out = "epoch,stage_code,stage\n";
  for (std::size_t i = 0; i < y.size(); ++i) {
    out += std::to_string(i) + "," + std::to_string(stage_code(y[i])) + "," + std::string(stage_name(y[i])) + "\n";
  }
  return out;
}

StageSequence read_hypnogram(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != "epoch,stage_code,stage") fail(ErrorCode::invalid_input, path + ": not a hypnogram CSV");
  StageSequence y;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto a = line.find(',');
    const auto b = line.find(',', a + 1);
    if (a == std::string::npos || b == std::string::npos) fail(ErrorCode::invalid_input, path + ": malformed row '" + line + "'");
    const std::string code = line.substr(a + 1, b - a - 1);
    if (code.size() != 1 || code[0] < '0' || code[0] > '9') fail(ErrorCode::invalid_input, path + ": bad stage code '" + code + "'");
    y.stages.push_back(stage_from_code(code[0] - '0'));
  }
  return y;
}

// ---- subcommands ----------------------------------------------------------------------------

struct SynthArgs {
  std::uint64_t seed = 0;
  double duration = 3600;
  double raw_rate = 100;
  std::string out = ".";
};

int run_synth(const SynthArgs& a) {
  SynthConfig cfg;
  cfg.seed = a.seed;
  cfg.duration_s = a.duration;
  cfg.raw_rate_hz = a.raw_rate;
  const SynthRecords rec = generate(cfg);
  fs::create_directories(a.out);
  const std::string stem = "synth-" + std::to_string(a.seed);
  write_bundle(to_bundle(rec.clean), fs::path(a.out) / (stem + "-clean.snz"));
  write_bundle(to_bundle(rec.degraded), fs::path(a.out) / (stem + "-degraded.snz"));
  write_bundle(to_bundle(stem + "-truth", rec.truth, cfg.raw_rate_hz), fs::path(a.out) / (stem + "-truth.snz"));
  std::cout << "wrote " << stem << "-{clean,degraded,truth}.snz (" << rec.truth.stages.size() << " epochs)\n";
  return 0;
}

struct IoArgs {
  std::string in, out, config;
};

int run_extract(const IoArgs& a) {
  const PipelineConfig cfg = load_config(a.config);
  const RawRecord raw = raw_record_from_bundle(read_bundle(a.in));
  const Extraction ex = extract_components(raw, cfg.extract);
  if (ex.breath_degenerate) std::cerr << "warning: breath channel of " << raw.id << " has zero variance\n";
  write_bundle(to_bundle(raw.id, ex.components, ex.stages), a.out);
  std::cout << "wrote " << a.out << " (" << ex.components.epochs() << " epochs, " << ex.beats.size() << " clean beats)\n";
  return 0;
}

struct AugmentArgs {
  IoArgs io;
  std::uint64_t seed = 0;
};

int run_augment(const AugmentArgs& a) {
  const PipelineConfig cfg = load_config(a.io.config);
  const Bundle b = read_bundle(a.io.in);
  const ComponentSet c = components_from_bundle(b);
  const auto stages = stages_from_bundle(b);
  if (!stages) fail(ErrorCode::invalid_input, a.io.in + " has no stage annotations to resample");
  AugmentConfig acfg = cfg.train.augmentation;
  acfg.seed = a.seed;
  acfg.validate();
  KeyedRng rng(acfg.seed);
  const Perturbed p = augment(c, *stages, rng, acfg);
  Bundle out = to_bundle(b.record_id + "-aug" + std::to_string(a.seed), p.components, p.stages);
  out.meta["augment"] = {{"seed", a.seed}, {"beta", p.beta}};
  write_bundle(out, a.io.out);
  std::cout << "wrote " << a.io.out << " (beta " << fixed(p.beta) << ", " << p.components.epochs() << " epochs)\n";
  return 0;
}

struct TrainArgs {
  std::vector<std::string> train, val;
  std::string out, log, config, preset;
  std::optional<int> epochs, steps, batch, crop;
  std::optional<double> lr;
  std::optional<std::uint64_t> seed;
  bool no_augment = false;
};

int run_train(const TrainArgs& a) {
  PipelineConfig cfg = load_config(a.config);
  if (!a.preset.empty()) cfg.model = ModelConfig::from_preset(a.preset);
  if (a.epochs) cfg.train.epochs = *a.epochs;
  if (a.steps) cfg.train.steps_per_epoch = *a.steps;
  if (a.batch) cfg.train.batch_size = *a.batch;
  if (a.crop) cfg.train.crop_epochs = *a.crop;
  if (a.lr) cfg.train.lr = *a.lr;
  if (a.seed) cfg.train.seed = *a.seed;
  if (a.no_augment) cfg.train.augment = false;
  cfg.model.dropout = cfg.train.dropout;
  cfg.train.validate();

  std::vector<LabeledRecord> data, val;
  for (const auto& p : a.train) data.push_back(labeled_from_file(p));
  for (const auto& p : a.val) val.push_back(labeled_from_file(p));

  SleepNet<float> model(cfg.model, cfg.model_seed);
  std::cerr << "training " << model.params().trainable_count() << " parameters on " << data.size() << " records\n";
  const TrainResult res = train(model, data, val, cfg.train, [](const EpochLog& e) {
    std::cerr << "epoch " << e.epoch << " step " << e.step << " loss " << fixed(e.loss);
    if (e.validation) std::cerr << " val_kappa " << fixed(e.validation->kappa);
    std::cerr << "\n";
  });
  if (res.skipped_records) std::cerr << "skipped " << res.skipped_records << " records shorter than the crop\n";

  nlohmann::json extra = cfg.to_json();
  extra["best_epoch"] = res.best_epoch;
  write_bundle(checkpoint_bundle(model, extra), a.out);
  if (!a.log.empty()) write_text_atomic(training_log_csv(res.log), a.log);
  std::cout << "wrote " << a.out << "\n";
  return 0;
}

struct InferArgs {
  std::string model, in, out;
};

int run_infer(const InferArgs& a) {
  SleepNet<float> model = model_from_checkpoint(read_bundle(a.model));
  const ComponentSet c = components_from_bundle(read_bundle(a.in));
  write_text_atomic(hypnogram_csv(infer(model, c)), a.out);
  std::cout << "wrote " << a.out << " (" << c.epochs() << " epochs)\n";
  return 0;
}

struct EvalArgs {
  std::string model, out;
  std::vector<std::string> in, pred;
  bool per_record = false;
};

int run_eval(const EvalArgs& a) {
  if (a.model.empty() == a.pred.empty()) fail(ErrorCode::invalid_config, "eval needs exactly one of --model or --pred");
  if (!a.pred.empty() && a.pred.size() != a.in.size()) fail(ErrorCode::invalid_config, "--pred and --in must list the same number of files");
  std::vector<StageSequence> truth, pred;
  std::optional<SleepNet<float>> model;
  if (!a.model.empty()) model.emplace(model_from_checkpoint(read_bundle(a.model)));
  for (std::size_t i = 0; i < a.in.size(); ++i) {
    LabeledRecord r = labeled_from_file(a.in[i]);
    StageSequence p = model ? infer(*model, r.components) : read_hypnogram(a.pred[i]);
    if (p.size() != r.stages.size()) {
      fail(ErrorCode::inconsistent_record, a.in[i] + ": " + std::to_string(p.size()) + " predictions for " + std::to_string(r.stages.size()) + " epochs");
    }
    truth.push_back(std::move(r.stages));
    pred.push_back(std::move(p));
  }
  const MetricsReport rep = aggregate(truth, pred, a.per_record ? Aggregation::per_record : Aggregation::pooled);
  if (!a.out.empty()) write_text_atomic(rep.to_csv(), a.out);
  std::cout << "acc=" << fixed(rep.acc) << " kappa=" << fixed(rep.kappa) << " mf1=" << fixed(rep.mf1) << " wf1=" << fixed(rep.wf1) << "\n";
  return 0;
}

int run_inspect(const std::string& path) {
  const InspectReport r = inspect(read_bundle(path));
  std::cout << r.text;
  if (!r.ok) fail(ErrorCode::inconsistent_record, path + " failed one or more invariant checks");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sleep staging from heartbeat, breath and movement components"};
  app.footer(exit_code_table());
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate a clean and a degraded synthetic night plus ground truth");
  s->add_option("--seed", synth.seed, "Generator seed");
  s->add_option("--duration", synth.duration, "Record length in seconds")->check(CLI::PositiveNumber);
  s->add_option("--raw-rate", synth.raw_rate, "Raw sample rate in Hz")->check(CLI::PositiveNumber);
  s->add_option("--out", synth.out, "Output directory");

  IoArgs ext;
  auto* e = app.add_subcommand("extract", "Raw bundle to component bundle");
  e->add_option("--in", ext.in, "Raw record bundle")->required();
  e->add_option("--out", ext.out, "Component bundle to write")->required();
  e->add_option("--config", ext.config, "Pipeline configuration (JSON)");

  AugmentArgs aug;
  auto* g = app.add_subcommand("augment", "Amplitude scaling and speed perturbation of a component bundle");
  g->add_option("--in", aug.io.in, "Component bundle")->required();
  g->add_option("--out", aug.io.out, "Augmented bundle to write")->required();
  g->add_option("--seed", aug.seed, "Augmentation seed");
  g->add_option("--config", aug.io.config, "Pipeline configuration (JSON)");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a model on labeled component bundles");
  t->add_option("--train", tr.train, "Training component bundles")->required();
  t->add_option("--val", tr.val, "Validation component bundles");
  t->add_option("--out", tr.out, "Checkpoint to write")->required();
  t->add_option("--log", tr.log, "Training log CSV");
  t->add_option("--config", tr.config, "Pipeline configuration (JSON)");
  t->add_option("--preset", tr.preset, "Model preset")->check(CLI::IsMember({"default", "tiny"}));
  t->add_option("--epochs", tr.epochs, "Training epochs");
  t->add_option("--steps", tr.steps, "Optimizer steps per epoch");
  t->add_option("--batch", tr.batch, "Crops per step");
  t->add_option("--crop", tr.crop, "Crop length in 30 s epochs");
  t->add_option("--lr", tr.lr, "Learning rate");
  t->add_option("--seed", tr.seed, "Training seed");
  t->add_flag("--no-augment", tr.no_augment, "Disable augmentation");

  InferArgs inf;
  auto* i = app.add_subcommand("infer", "Write a hypnogram CSV for one component bundle");
  i->add_option("--model", inf.model, "Checkpoint")->required();
  i->add_option("--in", inf.in, "Component bundle")->required();
  i->add_option("--out", inf.out, "Hypnogram CSV to write")->required();

  EvalArgs ev;
  auto* v = app.add_subcommand("eval", "Score predictions against annotated component bundles");
  v->add_option("--in", ev.in, "Annotated component bundles")->required();
  v->add_option("--model", ev.model, "Checkpoint to predict with");
  v->add_option("--pred", ev.pred, "Hypnogram CSVs, one per --in file");
  v->add_option("--out", ev.out, "Metrics CSV to write");
  v->add_flag("--per-record", ev.per_record, "Average metrics over records instead of pooling epochs");

  std::string inspect_path;
  auto* n = app.add_subcommand("inspect", "Print a bundle header and check its invariants");
  n->add_option("path", inspect_path, "Bundle")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int rc = app.exit(err);
    return rc == 0 ? 0 : kUsageExit;
  }

  try {
    if (*s) return run_synth(synth);
    if (*e) return run_extract(ext);
    if (*g) return run_augment(aug);
    if (*t) return run_train(tr);
    if (*i) return run_infer(inf);
    if (*v) return run_eval(ev);
    if (*n) return run_inspect(inspect_path);
  } catch (const Error& err) {
    std::cerr << "error code=" << static_cast<int>(err.code()) << " kind=" << error_name(err.code()) << " message=" << one_line(err.what()) << "\n";
    return static_cast<int>(err.code());
  } catch (const std::exception& err) {
    std::cerr << "error code=" << kInternalExit << " kind=internal message=" << one_line(err.what()) << "\n";
    return kInternalExit;
  }
  return kUsageExit;
}
