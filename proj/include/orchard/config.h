#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "orchard/counting.h"
#include "orchard/scene_sim.h"

namespace orchard {

enum class InputMode { kSimulate, kIngest };

struct InputPaths {
  std::string east;
  std::string west;
  std::string scene;
  std::string east_tree_mask;
  std::string west_tree_mask;
};

// Everything a command needs, loaded from one JSON file. The camera section
// feeds both the simulator and the pipeline.
struct PipelineConfig {
  std::uint64_t seed = 0;
  InputMode input_mode = InputMode::kSimulate;
  // A run with only one observation file proceeds and flags the report.
  bool allow_single_side = true;
  SimulationConfig simulation;
  PipelineOptions pipeline;
  InputPaths paths;

  // Throws kInvalidConfig naming the offending "section.field".
  void Validate() const;
};

// Throws kParseError with the line and column of malformed JSON, and
// kInvalidConfig naming the field for wrong types, unknown keys or values out
// of range. Missing keys keep their defaults.
PipelineConfig ParseConfig(std::string_view text);
PipelineConfig LoadConfig(const std::filesystem::path& path);

// Complete configuration; ParseConfig(SerializeConfig(c)) reproduces c.
std::string SerializeConfig(const PipelineConfig& config);

}  // namespace orchard
