// orchard-count: simulate scenes, count fruit from observation files, and
// evaluate count reports against ground truth.
//
// Exit codes: 0 ok, 2 configuration or usage, 3 pipeline or input, 4
// evaluation.

#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "orchard/config.h"
#include "orchard/counting.h"
#include "orchard/io.h"
#include "orchard/plots.h"
#include "orchard/scene_sim.h"

namespace fs = std::filesystem;
using namespace orchard;

namespace {

constexpr int kOk = 0;
constexpr int kConfigFailure = 2;
constexpr int kPipelineFailure = 3;
constexpr int kEvaluationFailure = 4;

struct Args {
  std::string config;
  std::string east;
  std::string west;
  std::string scene;
  std::string report;
  std::string out = ".";
  std::optional<int> threads;
  std::optional<std::uint64_t> seed;
};

// Loads and applies the command-line overrides; nullopt after reporting.
std::optional<PipelineConfig> LoadWithOverrides(const Args& args) {
  try {
    PipelineConfig config = args.config.empty() ? PipelineConfig{} : LoadConfig(args.config);
    if (args.seed) config.seed = *args.seed;
    if (args.threads) config.pipeline.threads = *args.threads;
    config.Validate();
    return config;
  } catch (const Error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return std::nullopt;
  }
}

int Simulate(const Args& args) {
  const auto config = LoadWithOverrides(args);
  if (!config) return kConfigFailure;
  try {
    const OrchardScene scene = GenerateScene(config->simulation, config->seed);
    const fs::path out(args.out);
    std::vector<CorrespondenceEntry> log;
    for (Pass pass : {Pass::kEast, Pass::kWest}) {
      if (!scene.HasPass(pass)) continue;
      const std::vector<SynthesizedFrame> frames = SynthesizePass(scene, pass);
      WriteTextFile(out / (std::string(PassName(pass)) + "_observations.jsonl"),
                    WriteObservations(Observations(frames)));
      const auto entries = CorrespondencesOf(pass, frames);
      log.insert(log.end(), entries.begin(), entries.end());
    }
    WriteTextFile(out / "scene.json", WriteScene(scene));
    WriteTextFile(out / "correspondence.log", WriteCorrespondenceLog(log));
  } catch (const Error& e) {
    std::cerr << "simulation error: " << e.what() << "\n";
    return e.code() == ErrorCode::kInvalidConfig ? kConfigFailure : kPipelineFailure;
  }
  return kOk;
}

std::optional<SideInput> LoadSide(const std::string& path, const std::string& mask,
                                  const std::string& name) {
  if (path.empty()) return std::nullopt;
  SideInput side;
  try {
    side.frames = ParseObservations(ReadTextFile(path));
  } catch (const Error& e) {
    throw Error(e.code(), name + " observations " + path + ", " + e.message());
  }
  if (!mask.empty()) {
    try {
      side.tree_mask = ParseTreeMask(ReadTextFile(mask));
    } catch (const Error& e) {
      throw Error(e.code(), name + " tree mask " + mask + ", " + e.message());
    }
  }
  return side;
}

void PrintStageTimes(const PipelineResult& result) {
  for (const SideResult& s : result.sides) {
    for (const auto& [stage, seconds] : s.stage_seconds) {
      std::cerr << "stage " << PassName(s.side) << "/" << stage << " " << seconds
                << " s\n";
    }
  }
}

int Run(const Args& args) {
  const auto config = LoadWithOverrides(args);
  if (!config) return kConfigFailure;
  std::string east_path = args.east.empty() ? config->paths.east : args.east;
  std::string west_path = args.west.empty() ? config->paths.west : args.west;
  const std::string scene_path = args.scene.empty() ? config->paths.scene : args.scene;
  for (auto* path : {&east_path, &west_path}) {
    if (path->empty() || fs::exists(*path)) continue;
    if (!config->allow_single_side) {
      std::cerr << "input error: missing observation file " << *path << "\n";
      return kPipelineFailure;
    }
    std::cerr << "warning: " << *path << " not found, running single-side\n";
    path->clear();
  }
  try {
    std::optional<SideInput> east, west;
    std::optional<OrchardScene> scene;
    std::map<int, int> truth;
    if (east_path.empty() && west_path.empty()) {
      if (config->input_mode != InputMode::kSimulate) {
        std::cerr << "input error: no observation files given\n";
        return kPipelineFailure;
      }
      scene = GenerateScene(config->simulation, config->seed);
      east = SideInput{Observations(SynthesizePass(*scene, Pass::kEast)), std::nullopt};
      if (scene->HasPass(Pass::kWest)) {
        west = SideInput{Observations(SynthesizePass(*scene, Pass::kWest)), std::nullopt};
      }
      truth = GroundTruthCounts(*scene);
    } else {
      east = LoadSide(east_path, config->paths.east_tree_mask, "east");
      west = LoadSide(west_path, config->paths.west_tree_mask, "west");
      if (!scene_path.empty()) truth = ParseSceneGroundTruth(ReadTextFile(scene_path));
    }
    if (!(east && west) && !config->allow_single_side) {
      std::cerr << "input error: both sides are required\n";
      return kPipelineFailure;
    }
    PipelineResult result = CountPipeline(east, west, config->pipeline);
    PrintStageTimes(result);
    if (!truth.empty()) AttachGroundTruth(result.report, truth);
    const fs::path out(args.out);
    WriteTextFile(out / "landmarks.json", WriteFruitMap(result.fruits));
    WriteTextFile(out / "counts.csv", WriteCountsCsv(result.report));
    WriteTextFile(out / "report.json", WriteReport(result.report));
    std::cout << "total_estimated " << result.report.total_estimated << "\n";
    if (result.report.total_ground_truth) {
      std::cout << "total_ground_truth " << *result.report.total_ground_truth << "\n";
    }
    if (result.report.single_side) std::cout << "single_side true\n";
  } catch (const StageError& e) {
    std::cerr << "pipeline error: " << e.what() << "\n";
    return kPipelineFailure;
  } catch (const Error& e) {
    std::cerr << "pipeline error: " << e.what() << "\n";
    return kPipelineFailure;
  }
  return kOk;
}

int Evaluate(const Args& args) {
  try {
    CountReport report = ParseReport(ReadTextFile(args.report));
    const std::map<int, int> truth = ParseSceneGroundTruth(ReadTextFile(args.scene));
    std::set<int> report_trees, scene_trees;
    for (const auto& [tree, tc] : report.per_tree) report_trees.insert(tree);
    for (const auto& [tree, n] : truth) scene_trees.insert(tree);
    if (report_trees != scene_trees) {
      std::cerr << "evaluation error: report trees do not match scene trees\n";
      return kEvaluationFailure;
    }
    AttachGroundTruth(report, truth);
    const std::string text = WriteReport(report);
    const fs::path out(args.out);
    WriteTextFile(out / "evaluation.json", text);
    WriteTextFile(out / "counts.csv", WriteCountsCsv(report));
    WriteTextFile(out / "count_bars.svg", CountBarChartSvg(report));
    WriteTextFile(out / "count_scatter.svg", CountScatterSvg(report));
    // Printed from the written document so both agree exactly.
    const auto doc = nlohmann::ordered_json::parse(text);
    std::cout << "l1_loss " << doc.at("l1_loss").dump() << "\n";
    for (const char* key : {"abs_error", "signed_error"}) {
      const auto& s = doc.at(key);
      std::cout << key << "_mean " << (s.is_null() ? "null" : s.at("mean").dump()) << "\n";
      std::cout << key << "_std " << (s.is_null() ? "null" : s.at("std").dump()) << "\n";
    }
    const auto& reg = doc.at("regression");
    for (const char* key : {"slope", "intercept", "r2"}) {
      std::cout << key << " " << (reg.is_null() ? "null" : reg.at(key).dump()) << "\n";
    }
  } catch (const Error& e) {
    std::cerr << "evaluation error: " << e.what() << "\n";
    return kEvaluationFailure;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fruit counting from per-frame detections along orchard rows"};
  app.require_subcommand(1);
  Args args;

  CLI::App* simulate = app.add_subcommand("simulate", "Generate a synthetic scene and its observations");
  simulate->add_option("--config", args.config, "Configuration JSON")->check(CLI::ExistingFile);
  simulate->add_option("--out", args.out, "Output directory");
  simulate->add_option("--seed", args.seed, "Scene seed, overrides the config");
  simulate->add_option("--threads", args.threads, "Worker threads");

  CLI::App* run = app.add_subcommand("run", "Count fruit from observation files");
  run->add_option("--config", args.config, "Configuration JSON")->check(CLI::ExistingFile);
  run->add_option("--east", args.east, "East pass observations.jsonl");
  run->add_option("--west", args.west, "West pass observations.jsonl");
  run->add_option("--scene", args.scene, "Scene JSON with ground truth");
  run->add_option("--out", args.out, "Output directory");
  run->add_option("--threads", args.threads, "Worker threads (1 is deterministic)");
  run->add_option("--seed", args.seed, "Seed, overrides the config");

  CLI::App* evaluate = app.add_subcommand("evaluate", "Score a count report against a scene");
  evaluate->add_option("--report", args.report, "report.json from run")->required();
  evaluate->add_option("--scene", args.scene, "scene.json from simulate")->required();
  evaluate->add_option("--out", args.out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigFailure;
  }
  if (*simulate) return Simulate(args);
  if (*run) return Run(args);
  return Evaluate(args);
}
