#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "snz/augment.hpp"
#include "snz/error.hpp"

using namespace snz;

namespace {

ComponentSet random_components(int epochs, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  std::bernoulli_distribution coin(0.05);
  const Eigen::Index n = static_cast<Eigen::Index>(epochs) * kSamplesPerEpoch;
  ComponentSet c{{Eigen::VectorXd(n), 4.0, "heartbeat"}, {Eigen::VectorXd(n), 4.0, "breath"}, {MaskVector(n), 4.0}};
  for (Eigen::Index i = 0; i < n; ++i) {
    c.heartbeat.samples[i] = 900 + 30 * nd(rng);
    c.breath.samples[i] = nd(rng);
    c.movement.values[i] = coin(rng);
  }
  return c;
}

StageSequence random_stages(int epochs, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> ud(0, 4);
  StageSequence y;
  for (int i = 0; i < epochs; ++i) y.stages.push_back(stage_from_code(ud(rng)));
  return y;
}

}  // namespace

TEST_CASE("amplify") {
  const ComponentSet c = random_components(3, 1);
  SUBCASE("unit gains are the identity") {
    const ComponentSet out = amplify(c, 1.0, 1.0);
    CHECK(out.heartbeat.samples == c.heartbeat.samples);
    CHECK(out.breath.samples == c.breath.samples);
    CHECK(out.movement.values == c.movement.values);
  }
  SUBCASE("heartbeat gain only") {
    const ComponentSet out = amplify(c, 1.1, 1.0);
    CHECK(out.heartbeat.samples == (c.heartbeat.samples * 1.1).eval());
    CHECK(out.breath.samples == c.breath.samples);
  }
  SUBCASE("seeded determinism and range") {
    KeyedRng a(42), b(42), other(43);
    const ComponentSet x = amplify(c, a);
    const ComponentSet y = amplify(c, b);
    const ComponentSet z = amplify(c, other);
    CHECK(x.heartbeat.samples == y.heartbeat.samples);
    CHECK(x.breath.samples == y.breath.samples);
    CHECK(x.heartbeat.samples != z.heartbeat.samples);
    CHECK(x.movement.values == c.movement.values);
    const double g1 = x.heartbeat.samples[0] / c.heartbeat.samples[0];
    const double g2 = x.breath.samples[0] / c.breath.samples[0];
    CHECK(g1 >= 0.9);
    CHECK(g1 <= 1.1);
    CHECK(g2 >= 0.9);
    CHECK(g2 <= 1.1);
    CHECK(g1 != doctest::Approx(g2));
  }
}

TEST_CASE("resample_labels examples") {
  CHECK(resample_labels(10, 8) == std::vector<int>{1, 2, 4, 5, 6, 7, 9, 10});
  for (int t = 1; t <= 30; ++t) {
    std::vector<int> identity(static_cast<std::size_t>(t));
    for (int i = 0; i < t; ++i) identity[static_cast<std::size_t>(i)] = i + 1;
    CHECK(resample_labels(t, t) == identity);
  }
  for (int tp : {1, 2, 7, 100}) {
    for (int v : resample_labels(1, tp)) CHECK(v == 1);
  }
}

TEST_CASE("resample_labels stays in range and is monotone") {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> ud(1, 10000);
  for (int trial = 0; trial < 300; ++trial) {
    const int t = ud(rng), tp = ud(rng);
    const std::vector<int> map = resample_labels(t, tp);
    REQUIRE(map.size() == static_cast<std::size_t>(tp));
    bool ok = map.front() >= 1 && map.back() <= t;
    for (std::size_t i = 1; i < map.size(); ++i) ok &= map[i] >= map[i - 1];
    CHECK(ok);
  }
}

TEST_CASE("speed_perturb") {
  const ComponentSet c = random_components(10, 2);
  const StageSequence y = random_stages(10, 3);
  SUBCASE("beta = 1 is the identity") {
    const Perturbed p = speed_perturb(c, y, 1.0);
    CHECK(p.components.heartbeat.samples == c.heartbeat.samples);
    CHECK(p.components.breath.samples == c.breath.samples);
    CHECK(p.components.movement.values == c.movement.values);
    CHECK(p.stages.stages == y.stages);
  }
  SUBCASE("beta = 1.25 on 10 epochs") {
    const Perturbed p = speed_perturb(c, y, 1.25);
    CHECK(p.components.epochs() == 8);
    CHECK(p.components.heartbeat.size() == 960);
    const std::vector<int> map{1, 2, 4, 5, 6, 7, 9, 10};
    for (std::size_t i = 0; i < map.size(); ++i) CHECK(p.stages[i] == y[static_cast<std::size_t>(map[i] - 1)]);
    // Output sample j reads the input at t = 1.25 j / 4.
    CHECK(p.components.heartbeat.samples[4] == c.heartbeat.samples[5]);
  }
  SUBCASE("beta = 0.75 on constant components") {
    ComponentSet k = c;
    k.heartbeat.samples.setConstant(850);
    k.breath.samples.setConstant(-0.5);
    const Perturbed p = speed_perturb(k, y, 0.75);
    CHECK(p.components.epochs() == 13);
    CHECK((p.components.heartbeat.samples.array() == 850).all());
    CHECK((p.components.breath.samples.array() == -0.5).all());
    const std::vector<int> map = resample_labels(10, 13);
    for (std::size_t i = 0; i < map.size(); ++i) CHECK(p.stages[i] == y[static_cast<std::size_t>(map[i] - 1)]);
  }
  SUBCASE("too short for the factor") {
    const ComponentSet one = random_components(1, 4);
    try {
      speed_perturb(one, random_stages(1, 5), 1.2);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::record_too_short);
    }
  }
}

TEST_CASE("augmentation preserves ComponentSet invariants and is seed-deterministic") {
  for (int trial = 0; trial < 40; ++trial) {
    const int epochs = 1 + trial % 13;
    const ComponentSet c = random_components(epochs, 100 + trial);
    const StageSequence y = random_stages(epochs, 200 + trial);
    KeyedRng r1(trial), r2(trial);
    Perturbed a, b;
    try {
      a = augment(c, y, r1);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::record_too_short);
      continue;
    }
    b = augment(c, y, r2);
    CHECK_NOTHROW(a.components.validate());
    CHECK(a.components.heartbeat.size() % 120 == 0);
    CHECK(static_cast<int>(a.stages.size()) == a.components.epochs());
    CHECK(a.components.heartbeat.samples == b.components.heartbeat.samples);
    CHECK(a.components.movement.values == b.components.movement.values);
    CHECK(a.beta >= 0.75);
    CHECK(a.beta <= 1.25);
  }
}

TEST_CASE("spectral_signature") {
  const int epochs = 10;
  const Eigen::Index n = epochs * kSamplesPerEpoch;
  ComponentSet c{{Eigen::VectorXd::Zero(n), 4.0, "heartbeat"}, {Eigen::VectorXd(n), 4.0, "breath"}, {MaskVector::Zero(n), 4.0}};
  for (Eigen::Index i = 0; i < n; ++i) c.breath.samples[i] = std::sin(2 * std::numbers::pi * 0.25 * i / 4.0);
  const Eigen::VectorXd sig = spectral_signature(c);
  REQUIRE(sig.size() == 2 * 129);
  CHECK(sig.head(129).isZero(0));
  Eigen::Index arg;
  sig.tail(129).maxCoeff(&arg);
  const double df = 4.0 / 256;
  CHECK(std::abs(arg * df - 0.25) <= df);

  SUBCASE("Parseval on white noise") {
    std::mt19937_64 rng(31);
    std::normal_distribution<double> nd(0, 2.0);
    Eigen::VectorXd x(4 * 3600);
    for (auto& v : x) v = nd(rng);
    const Eigen::VectorXd psd = welch_psd(x, 4.0);
    const double power = psd.sum() * df;
    const double var = (x.array() - x.mean()).square().mean();
    CHECK(std::abs(power / var - 1.0) < 0.05);
  }
  SUBCASE("short input") {
    ComponentSet s = c.slice_epochs(0, 4);
    CHECK_THROWS_AS(spectral_signature(s), Error);
  }
}
