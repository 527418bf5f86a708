// Acceptance run: one PASS/FAIL line per criterion. Optional arguments select
// criteria by number, e.g. `acceptance 1 4 7`.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <functional>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "metric_oracles.hpp"
#include "snz/augment.hpp"
#include "snz/bundle.hpp"
#include "snz/error.hpp"
#include "snz/extract.hpp"
#include "snz/gradcheck.hpp"
#include "snz/metrics.hpp"
#include "snz/model.hpp"
#include "snz/synth.hpp"
#include "snz/train.hpp"

using namespace snz;
using T = Tensor<double>;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---- 1. parameter count --------------------------------------------------------------------

Outcome architecture() {
  SleepNet<float> net(ModelConfig::default_preset(), 1);
  const Eigen::Index n = net.params().trainable_count();
  return {n >= 26'500'000 && n <= 32'500'000, fmt("default preset has %ld trainable parameters (range 26.5M..32.5M)", static_cast<long>(n))};
}

// ---- 2. stride arithmetic ------------------------------------------------------------------

Outcome strides() {
  long checked = 0, bad = 0;
  for (const char* preset : {"tiny", "default"}) {
    SleepNet<float> net(ModelConfig::from_preset(preset), 2);
    NoGradGuard guard;
    for (int k = 0; k < 3; ++k) {
      const Eigen::Index channels = k == 2 ? 3 : 2;
      for (Eigen::Index t = 1; t <= 64; ++t) {
        const auto y = net.resfeat(k, Tensor<float>::constant({1, channels, 120 * t}, 0.3f), false);
        ++checked;
        bad += y.shape() != Shape{1, t, net.config().out_dims[static_cast<std::size_t>(k)]};
      }
    }
  }
  return {bad == 0, fmt("%ld extractor/length combinations, %ld wrong", checked, bad)};
}

// ---- 3. gradients --------------------------------------------------------------------------

T randn(Shape shape, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, scale);
  Eigen::VectorXd v(shape_numel(shape));
  for (auto& x : v) x = nd(rng);
  return T::from(std::move(shape), std::move(v), true);
}

T probe(const T& out) {
  T w = randn(out.shape(), 99);
  w.set_requires_grad(false);
  return sum(mul(out, w));
}

Outcome gradients() {
  std::vector<std::pair<std::string, GradcheckResult>> results;
  auto run = [&](const std::string& name, const std::function<T()>& f, const std::vector<T>& in, GradcheckOptions opt = {}) {
    results.emplace_back(name, gradcheck(f, in, opt));
  };
  T a = randn({2, 3, 4}, 11), b = randn({2, 3, 4}, 12), c = randn({2, 5, 4}, 13);
  run("add", [&] { return probe(add(a, b)); }, {a, b});
  run("mul", [&] { return probe(mul(a, b)); }, {a, b});
  run("scale", [&] { return probe(scale(a, 1.7)); }, {a});
  run("sum", [&] { return sum(mul(a, a)); }, {a});
  run("relu", [&] { return probe(relu(a)); }, {a});
  run("reshape", [&] { return probe(reshape(a, {6, 4})); }, {a});
  run("transpose12", [&] { return probe(transpose12(a)); }, {a});
  run("concat", [&] { return probe(concat<double>({a, c}, 1)); }, {a, c});
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> table = Eigen::MatrixXd::Random(3, 4);
  run("add_broadcast_constant", [&] { return probe(add_broadcast_constant(a, table)); }, {a});

  T x = randn({2, 3, 10}, 15), w = randn({4, 3, 3}, 16, 0.5), bias = randn({4}, 17), w7 = randn({2, 3, 7}, 20, 0.4);
  run("conv1d", [&] { return probe(conv1d(x, w, bias, 1, 1)); }, {x, w, bias});
  run("conv1d strided", [&] { return probe(conv1d(x, w7, T{}, 2, 3)); }, {x, w7});

  T bx = randn({3, 4, 5}, 21, 2.0), g = randn({4}, 22), be = randn({4}, 23);
  BatchNormStats<double> stats{T::zeros({4}), T::constant({4}, 1.0)};
  run("batchnorm1d train", [&] { return probe(batchnorm1d(bx, g, be, stats, true)); }, {bx, g, be});
  run("batchnorm1d eval", [&] { return probe(batchnorm1d(bx, g, be, stats, false)); }, {bx, g, be});

  Eigen::VectorXd distinct = Eigen::VectorXd::LinSpaced(66, -3, 3);
  std::shuffle(distinct.begin(), distinct.end(), std::mt19937_64(26));
  T px = T::from({2, 3, 11}, distinct, true);
  run("maxpool1d", [&] { return probe(maxpool1d(px, 3, 2, 1)); }, {px});

  T lx = randn({2, 3, 5}, 27), lw = randn({4, 5}, 28), lb = randn({4}, 29), lg = randn({5}, 30), lbeta = randn({5}, 31);
  run("linear", [&] { return probe(linear(lx, lw, lb)); }, {lx, lw, lb});
  run("layer_norm", [&] { return probe(layer_norm(lx, lg, lbeta)); }, {lx, lg, lbeta});
  run("softmax", [&] { return probe(softmax(a, -1)); }, {a});
  T dx = randn({3, 8}, 33);
  run("dropout", [&] {
    KeyedRng rng(7);
    return probe(dropout(dx, 0.3, true, rng));
  }, {dx});
  T q = randn({2, 5, 6}, 34), k = randn({2, 5, 6}, 35), v = randn({2, 5, 6}, 36);
  run("attention", [&] {
    KeyedRng rng(2);
    return probe(attention(q, k, v, 3, 0.2, true, rng));
  }, {q, k, v});
  const std::vector<int> labels{0, 4, 2, 2, 1, 3};
  T cx = randn({6, 5}, 40), cl = randn({2, 3, 5}, 41);
  run("cross_entropy", [&] { return cross_entropy(softmax(cx, -1), labels); }, {cx});
  run("cross_entropy_logits", [&] { return cross_entropy_logits(cl, labels); }, {cl});

  // Whole tiny network, T = 4, training mode with dropout.
  SleepNet<double> net(ModelConfig::tiny(), 14);
  KeyedRng jitter(15);
  for (auto& e : net.params().entries()) {
    if (e.trainable && e.name.find("bn") != std::string::npos) {
      for (auto& val : e.tensor.value()) val += 0.2 * jitter.normal();
    }
  }
  const Eigen::Index n = 4 * kSamplesPerEpoch;
  ComponentSet comp{{Eigen::VectorXd(n), 4.0, "heartbeat"}, {Eigen::VectorXd(n), 4.0, "breath"}, {MaskVector::Zero(n), 4.0}};
  for (Eigen::Index i = 0; i < n; ++i) {
    comp.heartbeat.samples[i] = 900 + 40 * std::sin(i / 37.0);
    comp.breath.samples[i] = std::sin(2 * 3.141592653589793 * 0.25 * i / 4.0);
    comp.movement.values[i] = i % 97 < 5;
  }
  const auto in = make_input<double>(comp);
  const std::vector<int> y{0, 2, 2, 4};
  GradcheckOptions opt;
  opt.max_elements = 6;
  run("tiny model (T = 4)", [&] {
    KeyedRng drop(17);
    return cross_entropy(net.forward(in, true, &drop), y);
  }, net.params().trainable(), opt);

  double worst = 0;
  std::string worst_name;
  long elements = 0;
  for (const auto& [name, r] : results) {
    elements += r.checked;
    if (r.max_rel_error >= worst) {
      worst = r.max_rel_error;
      worst_name = name;
    }
  }
  return {worst < 1e-4, fmt("%zu checks, %ld elements, max rel error %.2e (%s)", results.size(), elements, worst, worst_name.c_str())};
}

// ---- 4. metrics ----------------------------------------------------------------------------

Outcome metrics() {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> len(1, 50), cls(0, 4), span_pick(0, 2);
  double worst = 0;
  bool self_ok = true;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = len(rng);
    const int span = 1 + 2 * span_pick(rng);
    std::vector<int> y(static_cast<std::size_t>(n)), p(static_cast<std::size_t>(n));
    for (int t = 0; t < n; ++t) {
      y[static_cast<std::size_t>(t)] = cls(rng) % span;
      p[static_cast<std::size_t>(t)] = rng() % 3 == 0 ? y[static_cast<std::size_t>(t)] : cls(rng) % span;
    }
    const auto ys = oracle::to_stages(y), ps = oracle::to_stages(p);
    const MetricsReport r = MetricsReport::from(ys, ps);
    const auto f = oracle::f1(y, p);
    worst = std::max({worst, std::abs(r.acc - oracle::accuracy(y, p)), std::abs(r.kappa - oracle::kappa(y, p)), std::abs(r.mf1 - f.macro),
                      std::abs(r.wf1 - f.weighted)});
    for (int i = 0; i < kNumStages; ++i) {
      for (int j = 0; j < kNumStages; ++j) worst = std::max(worst, std::abs(r.confusion(i, j) - oracle::confusion(y, p, i, j)));
    }
    self_ok = self_ok && cohen_kappa(ys, ys) == 1.0;
  }
  return {worst <= 1e-12 && self_ok, fmt("1000 random pairs, max deviation %.1e, kappa(y, y) == 1: %s", worst, self_ok ? "yes" : "no")};
}

// ---- 5. filter -----------------------------------------------------------------------------

Outcome filter_response() {
  const FilterCoeffs c = design_bessel_bandpass(0.1, 1.0 / 3.0, 3, 100.0);
  const std::size_t n = 1u << 18;
  Waveform imp{Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n)), c.sample_rate_hz, "impulse"};
  imp.samples[0] = 1;
  const Waveform h = apply_filter(c, imp);
  std::vector<double> time(h.samples.data(), h.samples.data() + h.size());
  std::vector<std::complex<double>> bins;
  Eigen::FFT<double> fft;
  fft.fwd(bins, time);
  auto at = [&](double f) { return std::abs(bins[static_cast<std::size_t>(std::llround(f * static_cast<double>(n) / c.sample_rate_hz))]); };
  double peak = 0;
  for (std::size_t k = 0; k < n / 2; ++k) peak = std::max(peak, std::abs(bins[k]));
  const double g_mid = at(0.1826) / peak, g_lo = at(0.01) / peak, g_hi = at(1.5) / peak;
  return {c.is_stable() && g_mid >= 0.9 && g_lo <= 0.1 && g_hi <= 0.1,
          fmt("gain/peak %.4f at 0.1826 Hz, %.4f at 0.01 Hz, %.4f at 1.5 Hz", g_mid, g_lo, g_hi)};
}

// ---- 6. extraction -------------------------------------------------------------------------

double beat_f1(const std::vector<double>& truth, const std::vector<double>& found, double tol_s) {
  std::size_t i = 0, j = 0, tp = 0;
  while (i < truth.size() && j < found.size()) {
    if (std::abs(truth[i] - found[j]) <= tol_s) {
      ++tp;
      ++i;
      ++j;
    } else if (truth[i] < found[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  const double p = static_cast<double>(tp) / static_cast<double>(found.size());
  const double r = static_cast<double>(tp) / static_cast<double>(truth.size());
  return p + r > 0 ? 2 * p * r / (p + r) : 0.0;
}

Outcome extraction() {
  double min_f1 = 1, max_mae = 0;
  long burst = 0, burst_hit = 0, quiet = 0, quiet_hit = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SynthConfig cfg;
    cfg.seed = seed;
    const SynthRecords s = generate(cfg);
    const Waveform& raw = s.clean.channel("raw");
    std::vector<double> peaks;
    detect_beats(raw, {}, &peaks);
    min_f1 = std::min(min_f1, beat_f1(s.truth.beat_times_s, peaks, 0.05));

    // Ground-truth RR series interpolated the same way as the extracted one.
    const auto& tb = s.truth.beat_times_s;
    BeatSeries truth;
    truth.end_times_s.resize(static_cast<Eigen::Index>(tb.size()) - 1);
    truth.intervals_ms.resize(truth.end_times_s.size());
    for (std::size_t k = 1; k < tb.size(); ++k) {
      truth.end_times_s[static_cast<Eigen::Index>(k) - 1] = tb[k];
      truth.intervals_ms[static_cast<Eigen::Index>(k) - 1] = 1000 * (tb[k] - tb[k - 1]);
    }
    const Extraction ex = extract_components(s.clean);
    const Eigen::Index n = ex.components.heartbeat.size();
    const Waveform ref = interpolate_ibi(truth, raw.duration_s());
    max_mae = std::max(max_mae, (ref.samples.head(n) - ex.components.heartbeat.samples).cwiseAbs().mean());

    // 2 s detector windows: "burst" overlaps a true movement interval, "quiet" does not.
    const MaskVector& mv = ex.components.movement.values;
    for (Eigen::Index w = 0; 8 * w < n; ++w) {
      const double a = 2.0 * static_cast<double>(w), b = a + 2.0;
      bool in_burst = false;
      for (const auto& [lo, hi] : s.truth.movement_intervals_s) in_burst = in_burst || (lo < b && hi > a);
      const bool flagged = mv[8 * w] != 0;
      if (in_burst) {
        ++burst;
        burst_hit += flagged;
      } else {
        ++quiet;
        quiet_hit += flagged;
      }
    }
  }
  const double recall = static_cast<double>(burst_hit) / static_cast<double>(burst);
  const double false_rate = static_cast<double>(quiet_hit) / static_cast<double>(quiet);
  return {min_f1 >= 0.95 && max_mae <= 30 && recall >= 0.9 && false_rate < 0.02,
          fmt("10 records: min beat F1 %.4f, max heartbeat MAE %.2f ms, burst windows flagged %.3f (%ld), quiet windows flagged %.4f (%ld)",
              min_f1, max_mae, recall, burst, false_rate, quiet)};
}

// ---- 7. augmentation -----------------------------------------------------------------------

Outcome augmentation() {
  // Label map against the formula in exact integer arithmetic: floor((2 T i - T) / (2 T')) + 1.
  long pairs = 0, map_bad = 0;
  for (int t = 1; t <= 200; ++t) {
    for (int tp = 1; tp <= 200; ++tp) {
      const std::vector<int> map = resample_labels(t, tp);
      ++pairs;
      bool ok = map.size() == static_cast<std::size_t>(tp);
      for (int i = 1; ok && i <= tp; ++i) ok = map[static_cast<std::size_t>(i) - 1] == (2 * t * i - t) / (2 * tp) + 1;
      map_bad += !ok;
    }
  }

  std::mt19937_64 rng(7);
  std::normal_distribution<double> nd;
  std::bernoulli_distribution coin(0.05);
  std::uniform_int_distribution<int> cls(0, 4);
  auto random_record = [&](int epochs) {
    const Eigen::Index n = static_cast<Eigen::Index>(epochs) * kSamplesPerEpoch;
    ComponentSet c{{Eigen::VectorXd(n), 4.0, "heartbeat"}, {Eigen::VectorXd(n), 4.0, "breath"}, {MaskVector(n), 4.0}};
    for (Eigen::Index i = 0; i < n; ++i) {
      c.heartbeat.samples[i] = 900 + 30 * nd(rng);
      c.breath.samples[i] = nd(rng);
      c.movement.values[i] = coin(rng);
    }
    StageSequence y;
    for (int e = 0; e < epochs; ++e) y.stages.push_back(stage_from_code(cls(rng)));
    return std::pair{c, y};
  };

  bool identity = true;
  long augmented = 0, invariant_bad = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto [c, y] = random_record(2 + trial % 40);
    const Perturbed same = speed_perturb(c, y, 1.0);
    identity = identity && same.components.heartbeat.samples == c.heartbeat.samples && same.components.breath.samples == c.breath.samples &&
               same.components.movement.values == c.movement.values && same.stages.stages == y.stages;
    KeyedRng r(static_cast<std::uint64_t>(trial));
    const Perturbed p = augment(c, y, r);
    ++augmented;
    try {
      p.components.validate();
      const bool ok = static_cast<int>(p.stages.size()) == p.components.epochs() && p.components.movement.is_binary() &&
                      p.beta >= 0.75 && p.beta <= 1.25;
      invariant_bad += !ok;
    } catch (const Error&) {
      ++invariant_bad;
    }
  }

  // Movement detection is unchanged by any positive rescaling of the input.
  Waveform w{Eigen::VectorXd(100 * 600), 100.0, "raw"};
  for (auto& v : w.samples) v = nd(rng);
  w.samples.segment(9000, 500) *= 15;
  w.samples.segment(30000, 300) *= 8;
  const BinaryMask base = detect_movement(w);
  bool scale_ok = base.values.cast<int>().sum() > 0;
  for (double a : {1e-6, 0.37, 2.0, 3.14159, 1e5}) {
    Waveform s = w;
    s.samples *= a;
    scale_ok = scale_ok && detect_movement(s).values == base.values;
  }

  return {map_bad == 0 && identity && invariant_bad == 0 && scale_ok,
          fmt("label map %ld/%ld pairs match, beta = 1 identity: %s, %ld/%ld augmented records valid, scale invariance: %s", pairs - map_bad,
              pairs, identity ? "yes" : "no", augmented - invariant_bad, augmented, scale_ok ? "yes" : "no")};
}

// ---- 8 / 9. learning -----------------------------------------------------------------------

struct Corpus {
  std::vector<LabeledRecord> train, clean, degraded;
  Stage majority = Stage::W;
  double majority_acc = 0;
};

LabeledRecord labeled(const RawRecord& r) {
  const Extraction ex = extract_components(r);
  return {r.id, ex.components, *ex.stages};
}

const Corpus& corpus() {
  static const Corpus c = [] {
    Corpus out;
    std::array<long, kNumStages> counts{};
    for (std::uint64_t s = 0; s < 16; ++s) {
      SynthConfig cfg;
      cfg.seed = s;
      out.train.push_back(labeled(generate(cfg).clean));
      for (Stage st : out.train.back().stages.stages) ++counts[static_cast<std::size_t>(stage_code(st))];
    }
    for (std::uint64_t s = 1000; s < 1008; ++s) {
      SynthConfig cfg;
      cfg.seed = s;
      const SynthRecords g = generate(cfg);
      out.clean.push_back(labeled(g.clean));
      out.degraded.push_back(labeled(g.degraded));
    }
    out.majority = stage_from_code(static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin()));
    std::vector<StageSequence> truth, pred;
    for (const auto& r : out.clean) {
      truth.push_back(r.stages);
      pred.push_back(StageSequence{std::vector<Stage>(r.stages.size(), out.majority)});
    }
    out.majority_acc = aggregate(truth, pred).acc;
    return out;
  }();
  return c;
}

TrainConfig learning_config(std::uint64_t seed, bool augment) {
  TrainConfig tc;
  tc.epochs = 20;
  tc.steps_per_epoch = 100;  // 2000 steps
  tc.batch_size = 8;
  tc.crop_epochs = 30;
  tc.lr = 1.1e-4;
  tc.seed = seed;
  tc.augment = augment;
  return tc;
}

struct Trained {
  MetricsReport train, clean, degraded;
};

Trained train_and_score(std::uint64_t seed, bool augment) {
  const Corpus& c = corpus();
  SleepNet<float> net(ModelConfig::tiny(), seed);
  train(net, c.train, {}, learning_config(seed, augment));
  return {evaluate(net, c.train), evaluate(net, c.clean), evaluate(net, c.degraded)};
}

std::optional<Trained> reference_model;

const Trained& reference() {
  if (!reference_model) reference_model = train_and_score(0, true);
  return *reference_model;
}

Outcome learnability() {
  const Trained& r = reference();
  const double base = corpus().majority_acc;
  return {r.train.acc >= 0.95 && r.clean.acc - base >= 0.15 && r.clean.kappa >= 0.3,
          fmt("2000 steps: train acc %.4f, held-out clean acc %.4f (majority %.4f, margin %.4f), kappa %.4f", r.train.acc, r.clean.acc, base,
              r.clean.acc - base, r.clean.kappa)};
}

Outcome zero_shot() {
  const Trained& r = reference();
  const double base = corpus().majority_acc;
  const bool between = r.degraded.acc > base && r.degraded.acc < r.clean.acc;
  std::string per_seed;
  double diff_sum = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const double with = train_and_score(seed, true).degraded.kappa;
    const double without = train_and_score(seed, false).degraded.kappa;
    diff_sum += with - without;
    per_seed += fmt(" s%lu %.3f/%.3f", static_cast<unsigned long>(seed), with, without);
    std::fprintf(stderr, "  seed %lu degraded kappa with/without augmentation %.4f / %.4f\n", static_cast<unsigned long>(seed), with, without);
  }
  const double mean_diff = diff_sum / 5;
  return {between && mean_diff >= 0,
          fmt("degraded acc %.4f between majority %.4f and clean %.4f: %s; degraded kappa aug/no-aug%s, mean diff %+.4f", r.degraded.acc, base,
              r.clean.acc, between ? "yes" : "no", per_seed.c_str(), mean_diff)};
}

// ---- 10. format and determinism -------------------------------------------------------------

// synth -> extract -> augment -> train -> infer -> eval; every artifact serialized.
std::vector<std::string> pipeline_artifacts() {
  std::vector<std::string> out;
  std::vector<LabeledRecord> train_set, test_set;
  for (std::uint64_t seed : {21, 22}) {
    SynthConfig cfg;
    cfg.seed = seed;
    cfg.duration_s = 1200;
    const SynthRecords s = generate(cfg);
    out.push_back(serialize_bundle(to_bundle(s.clean)));
    out.push_back(serialize_bundle(to_bundle(s.degraded)));
    out.push_back(serialize_bundle(to_bundle("truth", s.truth, cfg.raw_rate_hz)));
    for (const RawRecord* r : {&s.clean, &s.degraded}) {
      const Extraction ex = extract_components(*r);
      out.push_back(serialize_bundle(to_bundle(r->id, ex.components, ex.stages)));
      (r == &s.clean ? train_set : test_set).push_back({r->id, ex.components, *ex.stages});
    }
  }
  KeyedRng rng(3);
  const Perturbed p = augment(train_set[0].components, train_set[0].stages, rng);
  out.push_back(serialize_bundle(to_bundle("aug", p.components, p.stages)));
  train_set.push_back({"aug", p.components, p.stages});

  SleepNet<float> net(ModelConfig::tiny(), 5);
  TrainConfig tc;
  tc.epochs = 2;
  tc.steps_per_epoch = 5;
  tc.batch_size = 3;
  tc.crop_epochs = 12;
  tc.seed = 5;
  const TrainResult res = train(net, train_set, test_set, tc);
  const std::string checkpoint = serialize_bundle(checkpoint_bundle(net));
  out.push_back(checkpoint);
  out.push_back(training_log_csv(res.log));
  SleepNet<float> loaded = model_from_checkpoint(parse_bundle(checkpoint));
  std::string hyp;
  for (Stage s : infer(loaded, test_set[0].components).stages) hyp += std::to_string(stage_code(s));
  out.push_back(hyp);
  out.push_back(evaluate(loaded, test_set).to_csv());
  return out;
}

Outcome determinism() {
  const std::vector<std::string> a = pipeline_artifacts();
  const std::vector<std::string> b = pipeline_artifacts();
  long identical = 0;
  for (std::size_t i = 0; i < a.size(); ++i) identical += a[i] == b[i];

  long round_trips = 0, round_ok = 0;
  for (const std::string& bytes : a) {
    if (bytes.rfind("SNZ0", 0) != 0) continue;
    ++round_trips;
    round_ok += serialize_bundle(parse_bundle(bytes)) == bytes;
  }
  return {identical == static_cast<long>(a.size()) && round_ok == round_trips && round_trips > 0,
          fmt("%ld/%ld bundle round trips byte identical, %ld/%zu pipeline artifacts identical across reruns", round_ok, round_trips, identical, a.size())};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, Outcome (*)()>> criteria{
      {"architecture", architecture}, {"stride arithmetic", strides},   {"gradient correctness", gradients}, {"metric oracles", metrics},
      {"filter response", filter_response}, {"extraction fidelity", extraction}, {"augmentation contracts", augmentation},
      {"learnability", learnability}, {"zero-shot direction", zero_shot}, {"format and determinism", determinism}};
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s %d %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first, o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}
