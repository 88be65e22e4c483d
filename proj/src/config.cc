#include "orchard/config.h"

#include <fstream>
#include <sstream>

#include "json_util.h"

namespace orchard {

using detail::ExactVectorJson;
using detail::Json;
using detail::ObjectReader;

namespace {

void ReadRansac(ObjectReader& parent, std::string_view key, RansacConfig& c) {
  if (!parent.Has(key)) return;
  ObjectReader r(parent.At(key), parent.Field(key));
  r.Get("max_iterations", c.max_iterations);
  r.Get("inlier_threshold", c.inlier_threshold);
  r.Get("min_inlier_count", c.min_inlier_count);
  r.Get("confidence", c.confidence);
  r.RejectUnknown();
}

Json RansacJson(const RansacConfig& c) {
  return Json{{"max_iterations", c.max_iterations},
              {"inlier_threshold", c.inlier_threshold},
              {"min_inlier_count", c.min_inlier_count},
              {"confidence", c.confidence}};
}

void ReadCamera(ObjectReader& r, PipelineConfig& c) {
  CameraIntrinsics& k = c.pipeline.intrinsics;
  ImageSize& image = c.pipeline.image;
  r.Get("fx", k.fx);
  r.Get("fy", k.fy);
  r.Get("cx", k.cx);
  r.Get("cy", k.cy);
  r.Get("rows", image.rows);
  r.Get("cols", image.cols);
  r.RejectUnknown();
}

void ReadScene(ObjectReader& r, SceneConfig& s) {
  if (r.Has("fruits_per_tree")) {
    const Json& a = r.At("fruits_per_tree");
    if (!a.is_array()) r.Fail(r.Field("fruits_per_tree"), "expected an array");
    s.fruits_per_tree.clear();
    for (std::size_t i = 0; i < a.size(); ++i) {
      s.fruits_per_tree.push_back(r.As<int>(
          a[i], r.Field("fruits_per_tree") + "[" + std::to_string(i) + "]"));
    }
  }
  r.Get("tree_spacing", s.tree_spacing);
  r.GetVector<3>("crown_radii", s.crown_radii);
  r.Get("crown_center_height", s.crown_center_height);
  r.Get("trunk_height", s.trunk_height);
  r.Get("fruit_diameter", s.fruit_diameter);
  r.Get("min_fruit_separation", s.min_fruit_separation);
  r.Get("overlap_band", s.overlap_band);
  r.Get("overlap_fraction", s.overlap_fraction);
  r.Get("east_side_fraction", s.east_side_fraction);
  r.Get("camera_distance", s.camera_distance);
  r.Get("camera_height", s.camera_height);
  r.Get("speed", s.speed);
  r.Get("frames_per_pass", s.frames_per_pass);
  r.Get("simulate_west", s.simulate_west);
  r.Get("yaw_wobble_deg", s.yaw_wobble_deg);
  r.Get("height_wobble", s.height_wobble);
  r.Get("corners_per_trunk", s.corners_per_trunk);
  r.RejectUnknown();
}

void ReadNoise(ObjectReader& r, NoiseConfig& n) {
  r.Get("detection_center_sigma", n.detection_center_sigma);
  r.Get("missed_detection_rate", n.missed_detection_rate);
  r.Get("spurious_detection_rate", n.spurious_detection_rate);
  r.Get("occlusion_fraction", n.occlusion_fraction);
  r.Get("flow_sigma", n.flow_sigma);
  r.Get("dropout_burst_length", n.dropout_burst_length);
  r.Get("dropout_burst_min", n.dropout_burst_min);
  r.Get("dropout_fraction", n.dropout_fraction);
  r.RejectUnknown();
}

void ReadTracker(ObjectReader& r, TrackerConfig& t) {
  r.Get("gate", t.gate);
  r.Get("min_track_length", t.min_track_length);
  r.GetVector<4>("P0", t.initial_covariance);
  r.GetVector<4>("Q", t.process_noise);
  r.GetVector<6>("R", t.measurement_noise);
  r.Get("zero_flow_inflation", t.zero_flow_inflation);
  r.RejectUnknown();
}

void ReadSfm(ObjectReader& r, SfmConfig& s) {
  ReadRansac(r, "essential", s.essential);
  ReadRansac(r, "pnp", s.pnp);
  r.Get("min_triangulation_angle_deg", s.min_triangulation_angle_deg);
  r.Get("min_initial_pair_angle_deg", s.min_initial_pair_angle_deg);
  r.Get("min_shared_tracks", s.min_shared_tracks);
  r.Get("local_ba_window", s.local_ba_window);
  r.Get("global_ba_interval", s.global_ba_interval);
  r.Get("ba_max_iterations", s.ba_max_iterations);
  r.Get("ba_relative_tolerance", s.ba_relative_tolerance);
  r.Get("outlier_threshold", s.outlier_threshold);
  r.Get("min_registered_fraction", s.min_registered_fraction);
  r.Get("seed", s.seed);
  r.RejectUnknown();
}

void ReadReassoc(ObjectReader& r, PipelineOptions& p) {
  r.Get("enabled", p.enable_reassociation);
  r.Get("O0", p.reassoc.age.O0);
  r.Get("wO", p.reassoc.age.wO);
  r.Get("gate", p.reassoc.base_gate);
  r.Get("min_track_length", p.reassoc.min_track_length);
  r.RejectUnknown();
}

void ReadTrunk(ObjectReader& r, TrunkTrackConfig& t) {
  r.Get("span", t.span);
  r.Get("max_flow_error", t.max_flow_error);
  r.Get("search_radius", t.search_radius);
  r.Get("min_start_corners", t.min_start_corners);
  if (r.Has("start_frames")) {
    ObjectReader frames(r.At("start_frames"), r.Field("start_frames"));
    t.start_frames.clear();
    for (const auto& [key, value] : r.At("start_frames").items()) {
      TrunkId id = 0;
      try {
        std::size_t used = 0;
        id = std::stoi(key, &used);
        if (used != key.size()) throw std::invalid_argument(key);
      } catch (const std::exception&) {
        frames.Fail(frames.Field(key), "keys must be trunk ids");
      }
      t.start_frames[id] = frames.Require<FrameIndex>(key);
    }
  }
  r.RejectUnknown();
}

void ReadRefine(ObjectReader& r, RefineConfig& c) {
  r.Get("max_divergence", c.max_divergence);
  r.Get("search_radius", c.search_radius);
  r.RejectUnknown();
}

void ReadVote(ObjectReader& r, PipelineOptions& p) {
  r.Get("enabled", p.enable_centroid_voting);
  r.Get("window", p.vote_window);
  r.Get("single_side_skips_voting", p.single_side_skips_voting);
  r.RejectUnknown();
}

void ReadPaths(ObjectReader& r, InputPaths& p) {
  r.Get("east", p.east);
  r.Get("west", p.west);
  r.Get("scene", p.scene);
  r.Get("east_tree_mask", p.east_tree_mask);
  r.Get("west_tree_mask", p.west_tree_mask);
  r.RejectUnknown();
}

template <typename F>
void Section(ObjectReader& root, std::string_view key, F&& read) {
  if (!root.Has(key)) return;
  ObjectReader r(root.At(key), root.Field(key));
  read(r);
}

}  // namespace

void PipelineConfig::Validate() const {
  const CameraIntrinsics& k = pipeline.intrinsics;
  auto fail = [](const std::string& field, const std::string& why) {
    throw Error(ErrorCode::kInvalidConfig, "camera." + field + ": " + why);
  };
  if (!(k.fx > 0.0)) fail("fx", "must be positive");
  if (!(k.fy > 0.0)) fail("fy", "must be positive");
  if (!std::isfinite(k.cx)) fail("cx", "must be finite");
  if (!std::isfinite(k.cy)) fail("cy", "must be finite");
  if (pipeline.image.rows <= 0) fail("rows", "must be positive");
  if (pipeline.image.cols <= 0) fail("cols", "must be positive");
  simulation.scene.Validate();
  simulation.noise.Validate();
  pipeline.Validate();
}

PipelineConfig ParseConfig(std::string_view text) {
  const Json root = detail::ParseJson(text, "config");
  PipelineConfig c;
  ObjectReader r(root, "");
  r.Get("seed", c.seed);
  if (r.Has("input_mode")) {
    const std::string mode = r.Require<std::string>("input_mode");
    if (mode == "simulate") {
      c.input_mode = InputMode::kSimulate;
    } else if (mode == "ingest") {
      c.input_mode = InputMode::kIngest;
    } else {
      r.Fail("input_mode", "expected \"simulate\" or \"ingest\"");
    }
  }
  r.Get("allow_single_side", c.allow_single_side);
  r.Get("threads", c.pipeline.threads);
  Section(r, "camera", [&](ObjectReader& s) { ReadCamera(s, c); });
  Section(r, "scene", [&](ObjectReader& s) { ReadScene(s, c.simulation.scene); });
  Section(r, "noise", [&](ObjectReader& s) { ReadNoise(s, c.simulation.noise); });
  Section(r, "tracker", [&](ObjectReader& s) { ReadTracker(s, c.pipeline.tracker); });
  Section(r, "sfm", [&](ObjectReader& s) { ReadSfm(s, c.pipeline.sfm); });
  Section(r, "reassoc", [&](ObjectReader& s) { ReadReassoc(s, c.pipeline); });
  Section(r, "trunk", [&](ObjectReader& s) { ReadTrunk(s, c.pipeline.trunk); });
  Section(r, "refine", [&](ObjectReader& s) { ReadRefine(s, c.pipeline.refine); });
  Section(r, "vote", [&](ObjectReader& s) { ReadVote(s, c.pipeline); });
  Section(r, "paths", [&](ObjectReader& s) { ReadPaths(s, c.paths); });
  r.RejectUnknown();
  c.simulation.scene.intrinsics = c.pipeline.intrinsics;
  c.simulation.scene.image_size = c.pipeline.image;
  c.Validate();
  return c;
}

PipelineConfig LoadConfig(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::kInvalidConfig, "cannot read " + path.string());
  }
  std::ostringstream text;
  text << in.rdbuf();
  return ParseConfig(text.str());
}

std::string SerializeConfig(const PipelineConfig& c) {
  const PipelineOptions& p = c.pipeline;
  const SceneConfig& s = c.simulation.scene;
  const NoiseConfig& n = c.simulation.noise;
  Json start_frames = Json::object();
  for (const auto& [trunk, frame] : p.trunk.start_frames) {
    start_frames[std::to_string(trunk)] = frame;
  }
  Json root{
      {"seed", c.seed},
      {"input_mode", c.input_mode == InputMode::kSimulate ? "simulate" : "ingest"},
      {"allow_single_side", c.allow_single_side},
      {"threads", p.threads},
      {"camera",
       {{"fx", p.intrinsics.fx},
        {"fy", p.intrinsics.fy},
        {"cx", p.intrinsics.cx},
        {"cy", p.intrinsics.cy},
        {"rows", p.image.rows},
        {"cols", p.image.cols}}},
      {"scene",
       {{"fruits_per_tree", s.fruits_per_tree},
        {"tree_spacing", s.tree_spacing},
        {"crown_radii", ExactVectorJson(s.crown_radii)},
        {"crown_center_height", s.crown_center_height},
        {"trunk_height", s.trunk_height},
        {"fruit_diameter", s.fruit_diameter},
        {"min_fruit_separation", s.min_fruit_separation},
        {"overlap_band", s.overlap_band},
        {"overlap_fraction", s.overlap_fraction},
        {"east_side_fraction", s.east_side_fraction},
        {"camera_distance", s.camera_distance},
        {"camera_height", s.camera_height},
        {"speed", s.speed},
        {"frames_per_pass", s.frames_per_pass},
        {"simulate_west", s.simulate_west},
        {"yaw_wobble_deg", s.yaw_wobble_deg},
        {"height_wobble", s.height_wobble},
        {"corners_per_trunk", s.corners_per_trunk}}},
      {"noise",
       {{"detection_center_sigma", n.detection_center_sigma},
        {"missed_detection_rate", n.missed_detection_rate},
        {"spurious_detection_rate", n.spurious_detection_rate},
        {"occlusion_fraction", n.occlusion_fraction},
        {"flow_sigma", n.flow_sigma},
        {"dropout_burst_length", n.dropout_burst_length},
        {"dropout_burst_min", n.dropout_burst_min},
        {"dropout_fraction", n.dropout_fraction}}},
      {"tracker",
       {{"gate", p.tracker.gate},
        {"min_track_length", p.tracker.min_track_length},
        {"P0", ExactVectorJson(p.tracker.initial_covariance)},
        {"Q", ExactVectorJson(p.tracker.process_noise)},
        {"R", ExactVectorJson(p.tracker.measurement_noise)},
        {"zero_flow_inflation", p.tracker.zero_flow_inflation}}},
      {"sfm",
       {{"essential", RansacJson(p.sfm.essential)},
        {"pnp", RansacJson(p.sfm.pnp)},
        {"min_triangulation_angle_deg", p.sfm.min_triangulation_angle_deg},
        {"min_initial_pair_angle_deg", p.sfm.min_initial_pair_angle_deg},
        {"min_shared_tracks", p.sfm.min_shared_tracks},
        {"local_ba_window", p.sfm.local_ba_window},
        {"global_ba_interval", p.sfm.global_ba_interval},
        {"ba_max_iterations", p.sfm.ba_max_iterations},
        {"ba_relative_tolerance", p.sfm.ba_relative_tolerance},
        {"outlier_threshold", p.sfm.outlier_threshold},
        {"min_registered_fraction", p.sfm.min_registered_fraction},
        {"seed", p.sfm.seed}}},
      {"reassoc",
       {{"enabled", p.enable_reassociation},
        {"O0", p.reassoc.age.O0},
        {"wO", p.reassoc.age.wO},
        {"gate", p.reassoc.base_gate},
        {"min_track_length", p.reassoc.min_track_length}}},
      {"trunk",
       {{"span", p.trunk.span},
        {"max_flow_error", p.trunk.max_flow_error},
        {"search_radius", p.trunk.search_radius},
        {"min_start_corners", p.trunk.min_start_corners},
        {"start_frames", start_frames}}},
      {"refine",
       {{"max_divergence", p.refine.max_divergence},
        {"search_radius", p.refine.search_radius}}},
      {"vote",
       {{"enabled", p.enable_centroid_voting},
        {"window", p.vote_window},
        {"single_side_skips_voting", p.single_side_skips_voting}}},
      {"paths",
       {{"east", c.paths.east},
        {"west", c.paths.west},
        {"scene", c.paths.scene},
        {"east_tree_mask", c.paths.east_tree_mask},
        {"west_tree_mask", c.paths.west_tree_mask}}},
  };
  return root.dump(2) + "\n";
}

}  // namespace orchard
