#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <map>
#include <sstream>

#include <json.hpp>

#include "orchard/counting.h"
#include "orchard/io.h"

namespace fs = std::filesystem;
using namespace orchard;

namespace {

const fs::path kWork = fs::path(TEST_WORK_DIR) / "cli";

struct Outcome {
  int code = -1;
  std::string out;
  std::string err;
};

Outcome Cli(const std::string& args) {
  fs::create_directories(kWork);
  const fs::path out = kWork / "stdout.txt", err = kWork / "stderr.txt";
  const std::string cmd = std::string(ORCHARD_COUNT_EXE) + " " + args + " >" +
                          out.string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  Outcome o;
  o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  o.out = ReadTextFile(out);
  o.err = ReadTextFile(err);
  return o;
}

fs::path Fresh(const std::string& name) {
  const fs::path dir = kWork / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path WriteConfig(const std::string& name, const std::string& json) {
  const fs::path path = kWork / name;
  WriteTextFile(path, json);
  return path;
}

const char* kSmallScene =
    R"({"seed": 5, "scene": {"fruits_per_tree": [30], "frames_per_pass": 30}})";

std::map<std::string, std::string> KeyValues(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string key, value;
  while (in >> key >> value) kv[key] = value;
  return kv;
}

}  // namespace

TEST_CASE("simulate writes the scene, observations and log") {
  const fs::path config = WriteConfig("small.json", kSmallScene);
  const fs::path dir = Fresh("sim");
  const Outcome o = Cli("simulate --config " + config.string() + " --out " + dir.string());
  REQUIRE(o.code == 0);
  CHECK(fs::exists(dir / "scene.json"));
  CHECK(fs::exists(dir / "east_observations.jsonl"));
  CHECK(fs::exists(dir / "correspondence.log"));
  CHECK(!fs::exists(dir / "west_observations.jsonl"));
  CHECK(ParseObservations(ReadTextFile(dir / "east_observations.jsonl")).size() == 30);
  CHECK(ParseSceneGroundTruth(ReadTextFile(dir / "scene.json")).at(0) == 30);

  const fs::path again = Fresh("sim_again");
  REQUIRE(Cli("simulate --config " + config.string() + " --out " + again.string()).code == 0);
  for (const char* f : {"scene.json", "east_observations.jsonl", "correspondence.log"}) {
    CHECK(ReadTextFile(dir / f) == ReadTextFile(again / f));
  }
}

TEST_CASE("configuration errors exit with code 2") {
  const fs::path bad = WriteConfig("bad.json", R"({"noise": {"missed_detection_rate": -0.2}})");
  const Outcome a = Cli("simulate --config " + bad.string() + " --out " + Fresh("bad").string());
  CHECK(a.code == 2);
  CHECK(a.err.find("noise.missed_detection_rate") != std::string::npos);

  const fs::path broken = WriteConfig("broken.json", "{\n\"seed\": ,\n}");
  const Outcome b = Cli("run --config " + broken.string());
  CHECK(b.code == 2);
  CHECK(b.err.find("line 2") != std::string::npos);

  CHECK(Cli("frobnicate").code == 2);
  CHECK(Cli("evaluate --report x.json").code == 2);
}

TEST_CASE("run is deterministic and reports counts") {
  const fs::path config = WriteConfig("small.json", kSmallScene);
  const fs::path sim = Fresh("run_sim");
  REQUIRE(Cli("simulate --config " + config.string() + " --out " + sim.string()).code == 0);
  const std::string inputs = " --east " + (sim / "east_observations.jsonl").string() +
                             " --scene " + (sim / "scene.json").string();
  const fs::path a = Fresh("run_a"), b = Fresh("run_b");
  const Outcome ra = Cli("run --config " + config.string() + inputs + " --threads 1 --out " + a.string());
  REQUIRE(ra.code == 0);
  REQUIRE(Cli("run --config " + config.string() + inputs + " --threads 1 --out " + b.string()).code == 0);
  for (const char* f : {"landmarks.json", "counts.csv", "report.json"}) {
    REQUIRE(fs::exists(a / f));
    CHECK(ReadTextFile(a / f) == ReadTextFile(b / f));
  }
  const CountReport report = ParseReport(ReadTextFile(a / "report.json"));
  CHECK(report.total_ground_truth == 30);
  CHECK(report.single_side);
  const auto kv = KeyValues(ra.out);
  CHECK(kv.at("total_estimated") == std::to_string(report.total_estimated));
  CHECK(kv.at("single_side") == "true");
  // The west file was never simulated: single-side with a warning.
  const Outcome missing = Cli("run --config " + config.string() + inputs + " --west " +
                              (sim / "west_observations.jsonl").string() + " --out " +
                              Fresh("run_missing").string());
  CHECK(missing.code == 0);
  CHECK(missing.err.find("west") != std::string::npos);
}

TEST_CASE("malformed observation input exits with code 3") {
  const fs::path config = WriteConfig("small.json", kSmallScene);
  const fs::path sim = Fresh("trunc_sim");
  REQUIRE(Cli("simulate --config " + config.string() + " --out " + sim.string()).code == 0);
  std::string text = ReadTextFile(sim / "east_observations.jsonl");
  const std::size_t second = text.find('\n') + 1;
  WriteTextFile(sim / "truncated.jsonl", text.substr(0, second + 25));
  const Outcome o = Cli("run --config " + config.string() + " --east " +
                        (sim / "truncated.jsonl").string() + " --out " + Fresh("trunc").string());
  CHECK(o.code == 3);
  CHECK(o.err.find("line 2") != std::string::npos);

  const fs::path strict = WriteConfig("strict.json", R"({"allow_single_side": false, "scene": {"simulate_west": true}})");
  const Outcome s = Cli("run --config " + strict.string() + " --east " +
                        (sim / "east_observations.jsonl").string() + " --west " +
                        (kWork / "nowhere.jsonl").string() + " --out " + Fresh("strict").string());
  CHECK(s.code == 3);
}

TEST_CASE("evaluate scores a report against a scene") {
  const fs::path config =
      WriteConfig("trees.json", R"({"scene": {"fruits_per_tree": [10, 20, 30], "frames_per_pass": 10}})");
  const fs::path sim = Fresh("eval_sim");
  REQUIRE(Cli("simulate --config " + config.string() + " --out " + sim.string()).code == 0);

  CountReport perfect;
  perfect.per_tree[0].estimated = 10;
  perfect.per_tree[1].estimated = 20;
  perfect.per_tree[2].estimated = 30;
  perfect.total_estimated = 60;
  WriteTextFile(sim / "perfect.json", WriteReport(perfect));
  const fs::path out = Fresh("eval");
  const Outcome o = Cli("evaluate --report " + (sim / "perfect.json").string() + " --scene " +
                        (sim / "scene.json").string() + " --out " + out.string());
  REQUIRE(o.code == 0);
  for (const char* f : {"evaluation.json", "counts.csv", "count_bars.svg", "count_scatter.svg"}) {
    CHECK(fs::exists(out / f));
  }
  const CountReport scored = ParseReport(ReadTextFile(out / "evaluation.json"));
  CHECK(scored.l1_loss == 0);
  REQUIRE(scored.regression);
  CHECK(scored.regression->slope == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(scored.regression->r2 == doctest::Approx(1.0).epsilon(1e-12));

  // Printed values are the ones in the written document.
  const auto doc = nlohmann::ordered_json::parse(ReadTextFile(out / "evaluation.json"));
  const auto kv = KeyValues(o.out);
  CHECK(kv.at("l1_loss") == doc.at("l1_loss").dump());
  CHECK(kv.at("slope") == doc.at("regression").at("slope").dump());
  CHECK(kv.at("r2") == doc.at("regression").at("r2").dump());
  CHECK(kv.at("abs_error_mean") == doc.at("abs_error").at("mean").dump());

  CountReport partial = perfect;
  partial.per_tree.erase(2);
  partial.total_estimated = 30;
  WriteTextFile(sim / "partial.json", WriteReport(partial));
  const Outcome m = Cli("evaluate --report " + (sim / "partial.json").string() + " --scene " +
                        (sim / "scene.json").string() + " --out " + Fresh("eval_bad").string());
  CHECK(m.code == 4);
  WriteTextFile(sim / "garbage.json", "{\"per_tree\": 7");
  CHECK(Cli("evaluate --report " + (sim / "garbage.json").string() + " --scene " +
            (sim / "scene.json").string() + " --out " + Fresh("eval_bad").string())
            .code == 4);
}
