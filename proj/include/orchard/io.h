#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "orchard/core_model.h"
#include "orchard/counting.h"
#include "orchard/scene_sim.h"

namespace orchard {

// Text formats of the command-line tool. Writers quantize floating point
// values to a 1e-9 grid; parsers throw kParseError naming the line (and the
// field) at fault.

std::string ReadTextFile(const std::filesystem::path& path);
// Creates missing parent directories.
void WriteTextFile(const std::filesystem::path& path, std::string_view text);

// One JSON object per frame and line. Trunk corners may carry "du" and "dv".
std::string WriteObservations(std::span<const FrameObservation> frames);
std::vector<FrameObservation> ParseObservations(std::string_view text);

// Ground truth scene, including the configuration that generated it.
std::string WriteScene(const OrchardScene& scene);
OrchardScene ParseScene(std::string_view text);
// Per-tree counts stored in a scene file.
std::map<int, int> ParseSceneGroundTruth(std::string_view text);

// "pass frame detection fruit" per emitted detection; fruit -1 is spurious.
std::string WriteCorrespondenceLog(std::span<const CorrespondenceEntry> entries);
std::vector<CorrespondenceEntry> ParseCorrespondenceLog(std::string_view text);
std::vector<CorrespondenceEntry> CorrespondencesOf(
    Pass pass, std::span<const SynthesizedFrame> frames);

std::string WriteFruitMap(const FruitMap& fruits);
FruitMap ParseFruitMap(std::string_view text);

// tree_id,estimated,ground_truth,signed_error,abs_error; truth columns are
// empty for trees without ground truth.
std::string WriteCountsCsv(const CountReport& report);
// Per-tree rows of a counts file.
std::map<int, TreeCount> ParseCountsCsv(std::string_view text);

std::string WriteReport(const CountReport& report);
CountReport ParseReport(std::string_view text);

// One {"frame", "regions": [{"tree", "u_min", "u_max", "v_min", "v_max"}]}
// object per line.
std::string WriteTreeMask(const TreeMask& mask);
TreeMask ParseTreeMask(std::string_view text);

}  // namespace orchard
