#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "snz/bundle.hpp"

using namespace snz;
namespace fs = std::filesystem;

namespace {

struct Run {
  int status = -1;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class Sandbox {
 public:
  explicit Sandbox(const std::string& name) : dir_(fs::temp_directory_path() / ("snz_cli_" + name)) {
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  ~Sandbox() { fs::remove_all(dir_); }

  fs::path operator/(const std::string& f) const { return dir_ / f; }

  Run run(const std::string& args) const {
    const fs::path out = dir_ / ".stdout", err = dir_ / ".stderr";
    const std::string cmd = "cd '" + dir_.string() + "' && '" SNZ_CLI_PATH "' " + args + " >'" + out.string() + "' 2>'" + err.string() + "'";
    const int raw = std::system(cmd.c_str());
    Run r;
    r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
  }

 private:
  fs::path dir_;
};

bool contains(const std::string& s, const std::string& what) { return s.find(what) != std::string::npos; }

// synth -> extract -> augment -> train -> infer -> eval, all inside `box`.
void pipeline(const Sandbox& box) {
  for (int seed : {1, 2}) {
    REQUIRE(box.run("synth --seed " + std::to_string(seed) + " --duration 1800 --out .").status == 0);
    for (const char* kind : {"clean", "degraded"}) {
      const std::string stem = "synth-" + std::to_string(seed) + "-" + kind;
      REQUIRE(box.run("extract --in " + stem + ".snz --out " + stem + ".comp.snz").status == 0);
    }
  }
  REQUIRE(box.run("augment --in synth-1-clean.comp.snz --out aug.snz --seed 4").status == 0);
  const Run t = box.run(
      "train --preset tiny --train synth-1-clean.comp.snz synth-2-clean.comp.snz aug.snz --val synth-2-degraded.comp.snz "
      "--epochs 2 --steps 4 --batch 3 --crop 12 --seed 5 --out model.snz --log train.csv");
  REQUIRE_MESSAGE(t.status == 0, t.err);
  REQUIRE(box.run("infer --model model.snz --in synth-1-degraded.comp.snz --out hyp.csv").status == 0);
  const Run e = box.run("eval --model model.snz --in synth-1-degraded.comp.snz synth-2-degraded.comp.snz --out report.csv");
  REQUIRE(e.status == 0);
  for (const char* m : {"acc=", "kappa=", "mf1=", "wf1="}) CHECK(contains(e.out, m));
}

}  // namespace

TEST_CASE("synth then inspect reports 120 epochs") {
  Sandbox box("inspect");
  REQUIRE(box.run("synth --seed 7 --duration 3600 --out out").status == 0);
  for (const char* f : {"out/synth-7-clean.snz", "out/synth-7-degraded.snz", "out/synth-7-truth.snz"}) CHECK(fs::exists(box / f));
  const Run r = box.run("inspect out/synth-7-clean.snz");
  CHECK(r.status == 0);
  CHECK(contains(r.out, "raw  rate=100 Hz"));
  CHECK(contains(r.out, "epochs: 120"));
  CHECK_FALSE(contains(r.out, "FAIL"));
}

TEST_CASE("errors are one machine-parsable line with a distinct exit code") {
  Sandbox box("errors");
  Bundle b;
  b.record_id = "no-raw";
  b.meta = {{"kind", "raw"}, {"source", "bed-sensor"}};
  b.add("ecg", 100, Eigen::VectorXd::Zero(12000));
  write_bundle(b, box / "noraw.snz");

  const Run r = box.run("extract --in noraw.snz --out x.snz");
  CHECK(r.status == 16);
  CHECK(r.err.rfind("error code=16 kind=missing-channel message=", 0) == 0);
  CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);
  CHECK_FALSE(fs::exists(box / "x.snz"));

  std::ofstream(box / "bad.snz") << "XXXXabcdefgh";
  CHECK(box.run("inspect bad.snz").status == 40);
  std::ofstream(box / "cfg.json") << R"({"train": {"lrate": 0.1}})";
  const Run c = box.run("extract --in noraw.snz --out x.snz --config cfg.json");
  CHECK(c.status == 30);
  CHECK(contains(c.err, "config.train.lrate"));
  CHECK(box.run("inspect missing.snz").status == 44);
  CHECK(box.run("synth --duration 10").status == 30);
  CHECK(box.run("frobnicate").status == 2);
  CHECK(box.run("train --out m.snz").status == 2);
  const Run h = box.run("--help");
  CHECK(h.status == 0);
  CHECK(contains(h.out, "16 missing-channel"));
}

TEST_CASE("tiny pipeline runs end to end and reruns byte identically") {
  Sandbox a("pipe_a"), b("pipe_b");
  pipeline(a);
  pipeline(b);
  int compared = 0;
  for (const auto& entry : fs::directory_iterator(a / "")) {
    const std::string name = entry.path().filename().string();
    if (name.front() == '.') continue;
    INFO(name);
    CHECK(slurp(entry.path()) == slurp(b / name));
    ++compared;
  }
  CHECK(compared == 15);
  CHECK(slurp(a / "report.csv").rfind("metric,value\nacc,", 0) == 0);
  CHECK(slurp(a / "hyp.csv").rfind("epoch,stage_code,stage\n0,", 0) == 0);
}
