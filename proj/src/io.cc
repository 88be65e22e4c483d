#include "orchard/io.h"

#include <charconv>
#include <fstream>
#include <optional>
#include <sstream>

#include "json_util.h"
#include "orchard/config.h"

namespace orchard {

using detail::Json;
using detail::ObjectReader;
using detail::Quantize;
using detail::VectorJson;

namespace {

constexpr ErrorCode kParse = ErrorCode::kParseError;

// Splits into lines, keeping 1-based numbers; blank lines are skipped.
std::vector<std::pair<int, std::string_view>> Lines(std::string_view text) {
  std::vector<std::pair<int, std::string_view>> out;
  int number = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    ++number;
    std::string_view line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") != std::string_view::npos) {
      out.emplace_back(number, line);
    }
    pos = end + 1;
  }
  return out;
}

// Runs `fn`, prefixing any failure with the line number.
template <typename F>
auto AtLine(int line, F&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(kParse, "line " + std::to_string(line) + ": " + e.message());
  } catch (const Json::exception& e) {
    throw Error(kParse, "line " + std::to_string(line) + ": " + e.what());
  }
}

Json ParseLine(std::string_view line) {
  try {
    return Json::parse(line.begin(), line.end());
  } catch (const Json::parse_error& e) {
    throw Error(kParse, "malformed JSON at column " + std::to_string(e.byte));
  }
}

Json Document(std::string_view text, const std::string& what) {
  return detail::ParseJson(text, what);
}

const Json& ArrayAt(ObjectReader& r, std::string_view key) {
  const Json& a = r.At(key);
  if (!a.is_array()) r.Fail(r.Field(key), "expected an array");
  return a;
}

std::string Indexed(const std::string& field, std::size_t i) {
  return field + "[" + std::to_string(i) + "]";
}

Eigen::Vector3d ReadVector3(ObjectReader& r, std::string_view key) {
  Eigen::Vector3d v = Eigen::Vector3d::Zero();
  r.GetVector<3>(key, v);
  if (!r.Has(key)) r.Fail(r.Field(key), "missing");
  return v;
}

Json PoseJson(const CameraPose& pose) {
  Json R = Json::array();
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) R.push_back(Quantize(pose.rotation()(i, j)));
  }
  return Json{{"R", R}, {"T", VectorJson(pose.translation())}};
}

CameraPose ParsePose(const Json& j, const std::string& field) {
  ObjectReader r(j, field, kParse);
  const Json& R = ArrayAt(r, "R");
  if (R.size() != 9) r.Fail(r.Field("R"), "expected 9 numbers");
  Eigen::Matrix3d rot;
  for (int i = 0; i < 9; ++i) {
    rot(i / 3, i % 3) = r.As<double>(R[i], Indexed(r.Field("R"), i));
  }
  const Eigen::Vector3d T = ReadVector3(r, "T");
  r.RejectUnknown();
  return CameraPose::FromApproximateRotation(rot, T);
}

const char* SideName(FruitSide side) {
  switch (side) {
    case FruitSide::kEast: return "east";
    case FruitSide::kBand: return "band";
    case FruitSide::kWest: return "west";
  }
  return "east";
}

FruitSide ParseFruitSide(const std::string& s, const ObjectReader& r,
                         const std::string& field) {
  if (s == "east") return FruitSide::kEast;
  if (s == "band") return FruitSide::kBand;
  if (s == "west") return FruitSide::kWest;
  r.Fail(field, "expected east, band or west");
}

Pass ParsePass(const std::string& s, const ObjectReader& r, const std::string& field) {
  if (s == "east") return Pass::kEast;
  if (s == "west") return Pass::kWest;
  r.Fail(field, "expected east or west");
}

Json OptionalInt(const std::optional<int>& v) { return v ? Json(*v) : Json(); }

std::optional<int> ReadOptionalInt(ObjectReader& r, std::string_view key) {
  if (!r.Has(key)) return std::nullopt;
  return r.Require<int>(key);
}

Json SummaryJson(const std::optional<ErrorSummary>& s) {
  if (!s) return Json();
  return Json{{"mean", Quantize(s->mean)}, {"std", Quantize(s->stddev)}};
}

std::optional<ErrorSummary> ReadSummary(ObjectReader& r, std::string_view key) {
  if (!r.Has(key)) return std::nullopt;
  ObjectReader s(r.At(key), r.Field(key), kParse);
  ErrorSummary out;
  out.mean = s.Require<double>("mean");
  out.stddev = s.Require<double>("std");
  s.RejectUnknown();
  return out;
}

}  // namespace

std::string ReadTextFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(kParse, "cannot read " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return text.str();
}

void WriteTextFile(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) {
    throw Error(ErrorCode::kInvalidArgument, "cannot write " + path.string());
  }
}

std::string WriteObservations(std::span<const FrameObservation> frames) {
  std::string out;
  for (const FrameObservation& f : frames) {
    Json dets = Json::array();
    for (const Detection& d : f.detections) {
      dets.push_back(Json{{"cu", Quantize(d.center().x())},
                          {"cv", Quantize(d.center().y())},
                          {"w", Quantize(d.box.width())},
                          {"h", Quantize(d.box.height())},
                          {"score", Quantize(d.score)}});
    }
    Json flows;
    if (f.flows) {
      flows = Json::array();
      for (const FlowVector& v : *f.flows) {
        flows.push_back(Json::array({Quantize(v.du), Quantize(v.dv)}));
      }
    }
    Json corners;
    if (f.trunk_corners) {
      corners = Json::array();
      for (const TrunkCorner& c : *f.trunk_corners) {
        Json j{{"trunk", c.trunk},
               {"u", Quantize(c.position.x())},
               {"v", Quantize(c.position.y())}};
        if (c.flow) {
          j["du"] = Quantize(c.flow->du);
          j["dv"] = Quantize(c.flow->dv);
        }
        corners.push_back(std::move(j));
      }
    }
    const Json line{{"frame", f.frame},
                    {"detections", std::move(dets)},
                    {"flows", std::move(flows)},
                    {"trunk_corners", std::move(corners)}};
    out += line.dump();
    out += '\n';
  }
  return out;
}

std::vector<FrameObservation> ParseObservations(std::string_view text) {
  std::vector<FrameObservation> frames;
  for (const auto& [number, line] : Lines(text)) {
    frames.push_back(AtLine(number, [&, line = line] {
      const Json j = ParseLine(line);
      ObjectReader r(j, "", kParse);
      FrameObservation f;
      f.frame = r.Require<FrameIndex>("frame");
      const Json& dets = ArrayAt(r, "detections");
      for (std::size_t i = 0; i < dets.size(); ++i) {
        ObjectReader d(dets[i], Indexed("detections", i), kParse);
        const Eigen::Vector2d c(d.Require<double>("cu"), d.Require<double>("cv"));
        const double w = d.Require<double>("w");
        const double h = d.Require<double>("h");
        double score = 1.0;
        d.Get("score", score);
        d.RejectUnknown();
        if (!(w > 0.0 && h > 0.0)) d.Fail(d.Field("w"), "box must have positive size");
        f.detections.push_back(Detection{f.frame, BoundingBox(c, w, h), score});
      }
      if (r.Has("flows")) {
        const Json& flows = ArrayAt(r, "flows");
        f.flows.emplace();
        for (std::size_t i = 0; i < flows.size(); ++i) {
          const std::string field = Indexed("flows", i);
          if (!flows[i].is_array() || flows[i].size() != 2) {
            r.Fail(field, "expected [du, dv]");
          }
          f.flows->push_back(FlowVector{r.As<double>(flows[i][0], field),
                                        r.As<double>(flows[i][1], field)});
        }
      }
      if (r.Has("trunk_corners")) {
        const Json& corners = ArrayAt(r, "trunk_corners");
        f.trunk_corners.emplace();
        for (std::size_t i = 0; i < corners.size(); ++i) {
          ObjectReader c(corners[i], Indexed("trunk_corners", i), kParse);
          TrunkCorner tc;
          tc.trunk = c.Require<TrunkId>("trunk");
          tc.position = {c.Require<double>("u"), c.Require<double>("v")};
          if (c.Has("du") || c.Has("dv")) {
            tc.flow = FlowVector{c.Require<double>("du"), c.Require<double>("dv")};
          }
          c.RejectUnknown();
          f.trunk_corners->push_back(tc);
        }
      }
      r.RejectUnknown();
      f.Validate();
      return f;
    }));
  }
  return frames;
}

std::string WriteScene(const OrchardScene& scene) {
  PipelineConfig pc;
  pc.simulation = scene.config;
  pc.pipeline.intrinsics = scene.config.scene.intrinsics;
  pc.pipeline.image = scene.config.scene.image_size;
  const Json full = Json::parse(SerializeConfig(pc));

  Json trees = Json::array();
  std::map<int, int> truth = GroundTruthCounts(scene);
  for (const Tree& t : scene.trees) {
    Json fruits = Json::array();
    for (const Fruit& f : t.fruits) {
      fruits.push_back(Json{{"id", f.id},
                            {"tree", f.tree},
                            {"position", VectorJson(f.position)},
                            {"side", SideName(f.side)}});
    }
    Json corners = Json::array();
    for (const Eigen::Vector3d& c : t.corners) corners.push_back(VectorJson(c));
    trees.push_back(Json{{"id", t.id},
                         {"trunk_base", VectorJson(t.trunk_base)},
                         {"trunk_top", VectorJson(t.trunk_top)},
                         {"fruits", std::move(fruits)},
                         {"corners", std::move(corners)}});
  }
  Json gt = Json::object();
  for (const auto& [tree, n] : truth) gt[std::to_string(tree)] = n;
  auto trajectory = [](const std::vector<CameraPose>& poses) {
    Json a = Json::array();
    for (const CameraPose& p : poses) a.push_back(PoseJson(p));
    return a;
  };
  Json states = Json::array();
  for (const auto& [key, st] : scene.pass_states) {
    states.push_back(Json{
        {"pass", PassName(static_cast<Pass>(key.first))},
        {"fruit", key.second},
        {"on_visible_side", st.on_visible_side},
        {"occluded", st.occluded},
        {"first_in_view", OptionalInt(st.first_in_view)},
        {"last_in_view", OptionalInt(st.last_in_view)},
        {"dropout_frames", st.dropout_frames}});
  }
  const Json root{{"seed", scene.rng_seed},
                  {"config",
                   {{"camera", full.at("camera")},
                    {"scene", full.at("scene")},
                    {"noise", full.at("noise")}}},
                  {"ground_truth", std::move(gt)},
                  {"row_direction", VectorJson(scene.row_direction)},
                  {"yaw_phase", Quantize(scene.yaw_phase)},
                  {"height_phase", Quantize(scene.height_phase)},
                  {"trees", std::move(trees)},
                  {"east_trajectory", trajectory(scene.east_trajectory)},
                  {"west_trajectory", trajectory(scene.west_trajectory)},
                  {"pass_states", std::move(states)}};
  return root.dump(1) + "\n";
}

OrchardScene ParseScene(std::string_view text) {
  const Json root = Document(text, "scene");
  try {
    ObjectReader r(root, "", kParse);
    OrchardScene scene;
    scene.rng_seed = r.Require<std::uint64_t>("seed");
    try {
      const PipelineConfig pc = ParseConfig(r.At("config").dump());
      scene.config = pc.simulation;
    } catch (const Error& e) {
      throw Error(kParse, "config." + e.message());
    }
    r.At("ground_truth");
    scene.row_direction = ReadVector3(r, "row_direction");
    scene.yaw_phase = r.Require<double>("yaw_phase");
    scene.height_phase = r.Require<double>("height_phase");
    const Json& trees = ArrayAt(r, "trees");
    for (std::size_t i = 0; i < trees.size(); ++i) {
      ObjectReader t(trees[i], Indexed("trees", i), kParse);
      Tree tree;
      tree.id = t.Require<int>("id");
      tree.trunk_base = ReadVector3(t, "trunk_base");
      tree.trunk_top = ReadVector3(t, "trunk_top");
      const Json& fruits = ArrayAt(t, "fruits");
      for (std::size_t k = 0; k < fruits.size(); ++k) {
        ObjectReader f(fruits[k], Indexed(t.Field("fruits"), k), kParse);
        Fruit fruit;
        fruit.id = f.Require<FruitId>("id");
        fruit.tree = f.Require<int>("tree");
        fruit.position = ReadVector3(f, "position");
        fruit.side = ParseFruitSide(f.Require<std::string>("side"), f, f.Field("side"));
        f.RejectUnknown();
        tree.fruits.push_back(fruit);
      }
      const Json& corners = ArrayAt(t, "corners");
      for (std::size_t k = 0; k < corners.size(); ++k) {
        const std::string field = Indexed(t.Field("corners"), k);
        if (!corners[k].is_array() || corners[k].size() != 3) {
          t.Fail(field, "expected 3 numbers");
        }
        tree.corners.emplace_back(t.As<double>(corners[k][0], field),
                                  t.As<double>(corners[k][1], field),
                                  t.As<double>(corners[k][2], field));
      }
      t.RejectUnknown();
      scene.trees.push_back(std::move(tree));
    }
    for (const char* key : {"east_trajectory", "west_trajectory"}) {
      const Json& poses = ArrayAt(r, key);
      auto& out = std::string_view(key) == "east_trajectory" ? scene.east_trajectory
                                                             : scene.west_trajectory;
      for (std::size_t i = 0; i < poses.size(); ++i) {
        out.push_back(ParsePose(poses[i], Indexed(key, i)));
      }
    }
    const Json& states = ArrayAt(r, "pass_states");
    for (std::size_t i = 0; i < states.size(); ++i) {
      ObjectReader s(states[i], Indexed("pass_states", i), kParse);
      const Pass pass = ParsePass(s.Require<std::string>("pass"), s, s.Field("pass"));
      const FruitId fruit = s.Require<FruitId>("fruit");
      FruitPassState st;
      st.on_visible_side = s.Require<bool>("on_visible_side");
      st.occluded = s.Require<bool>("occluded");
      st.first_in_view = ReadOptionalInt(s, "first_in_view");
      st.last_in_view = ReadOptionalInt(s, "last_in_view");
      const Json& drops = ArrayAt(s, "dropout_frames");
      for (std::size_t k = 0; k < drops.size(); ++k) {
        st.dropout_frames.push_back(
            s.As<FrameIndex>(drops[k], Indexed(s.Field("dropout_frames"), k)));
      }
      s.RejectUnknown();
      scene.pass_states[{static_cast<int>(pass), fruit}] = std::move(st);
    }
    r.RejectUnknown();
    return scene;
  } catch (const Json::exception& e) {
    throw Error(kParse, std::string("scene: ") + e.what());
  }
}

std::map<int, int> ParseSceneGroundTruth(std::string_view text) {
  const Json root = Document(text, "scene");
  if (!root.is_object() || !root.contains("ground_truth")) {
    throw Error(kParse, "scene: ground_truth: missing");
  }
  ObjectReader gt(root.at("ground_truth"), "ground_truth", kParse);
  std::map<int, int> out;
  for (const auto& [key, value] : root.at("ground_truth").items()) {
    int tree = 0;
    const auto [ptr, ec] = std::from_chars(key.data(), key.data() + key.size(), tree);
    if (ec != std::errc() || ptr != key.data() + key.size()) {
      gt.Fail(gt.Field(key), "keys must be tree ids");
    }
    out[tree] = gt.Require<int>(key);
  }
  return out;
}

std::vector<CorrespondenceEntry> CorrespondencesOf(
    Pass pass, std::span<const SynthesizedFrame> frames) {
  std::vector<CorrespondenceEntry> out;
  for (const SynthesizedFrame& f : frames) {
    for (std::size_t i = 0; i < f.truth.size(); ++i) {
      out.push_back({pass, f.observation.frame, static_cast<int>(i), f.truth[i]});
    }
  }
  return out;
}

std::string WriteCorrespondenceLog(std::span<const CorrespondenceEntry> entries) {
  std::string out = "# pass frame detection fruit\n";
  for (const CorrespondenceEntry& e : entries) {
    out += std::string(PassName(e.pass)) + " " + std::to_string(e.frame) + " " +
           std::to_string(e.detection_index) + " " + std::to_string(e.fruit_id) + "\n";
  }
  return out;
}

std::vector<CorrespondenceEntry> ParseCorrespondenceLog(std::string_view text) {
  std::vector<CorrespondenceEntry> out;
  for (const auto& [number, line] : Lines(text)) {
    if (line.front() == '#') continue;
    std::istringstream in{std::string(line)};
    std::string pass, extra;
    CorrespondenceEntry e;
    if (!(in >> pass >> e.frame >> e.detection_index >> e.fruit_id) || (in >> extra)) {
      throw Error(kParse, "line " + std::to_string(number) +
                              ": expected \"pass frame detection fruit\"");
    }
    if (pass == "east") {
      e.pass = Pass::kEast;
    } else if (pass == "west") {
      e.pass = Pass::kWest;
    } else {
      throw Error(kParse, "line " + std::to_string(number) + ": unknown pass " + pass);
    }
    out.push_back(e);
  }
  return out;
}

std::string WriteFruitMap(const FruitMap& fruits) {
  Json a = Json::array();
  for (const FruitMapEntry& e : fruits) {
    a.push_back(Json{{"landmark", e.landmark},
                     {"side", PassName(e.side)},
                     {"position", VectorJson(e.position)},
                     {"tree", e.tree},
                     {"counted", e.counted},
                     {"first_frame", e.first_frame},
                     {"last_frame", e.last_frame},
                     {"votes_before", e.votes_before},
                     {"votes_after", e.votes_after}});
  }
  return Json{{"fruits", std::move(a)}}.dump(1) + "\n";
}

FruitMap ParseFruitMap(std::string_view text) {
  const Json root = Document(text, "landmarks");
  ObjectReader r(root, "", kParse);
  const Json& a = ArrayAt(r, "fruits");
  r.RejectUnknown();
  FruitMap out;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ObjectReader f(a[i], Indexed("fruits", i), kParse);
    FruitMapEntry e;
    e.landmark = f.Require<FruitId>("landmark");
    e.side = ParsePass(f.Require<std::string>("side"), f, f.Field("side"));
    e.position = ReadVector3(f, "position");
    e.tree = f.Require<int>("tree");
    e.counted = f.Require<bool>("counted");
    e.first_frame = f.Require<FrameIndex>("first_frame");
    e.last_frame = f.Require<FrameIndex>("last_frame");
    e.votes_before = f.Require<int>("votes_before");
    e.votes_after = f.Require<int>("votes_after");
    f.RejectUnknown();
    out.push_back(e);
  }
  return out;
}

std::string WriteCountsCsv(const CountReport& report) {
  std::string out = "tree_id,estimated,ground_truth,signed_error,abs_error\n";
  for (const auto& [tree, tc] : report.per_tree) {
    out += std::to_string(tree) + "," + std::to_string(tc.estimated) + ",";
    if (tc.ground_truth) {
      const int err = tc.estimated - *tc.ground_truth;
      out += std::to_string(*tc.ground_truth) + "," + std::to_string(err) + "," +
             std::to_string(std::abs(err));
    } else {
      out += ",,";
    }
    out += "\n";
  }
  return out;
}

std::map<int, TreeCount> ParseCountsCsv(std::string_view text) {
  std::map<int, TreeCount> out;
  bool header = true;
  for (const auto& [number, line] : Lines(text)) {
    const std::string where = "line " + std::to_string(number) + ": ";
    if (header) {
      if (line != "tree_id,estimated,ground_truth,signed_error,abs_error") {
        throw Error(kParse, where + "unexpected header");
      }
      header = false;
      continue;
    }
    std::vector<std::string_view> cells;
    std::size_t pos = 0;
    while (true) {
      const std::size_t comma = line.find(',', pos);
      cells.push_back(line.substr(pos, comma - pos));
      if (comma == std::string_view::npos) break;
      pos = comma + 1;
    }
    if (cells.size() != 5) throw Error(kParse, where + "expected 5 columns");
    auto number_at = [&](std::size_t c) {
      int v = 0;
      const auto [ptr, ec] =
          std::from_chars(cells[c].data(), cells[c].data() + cells[c].size(), v);
      if (ec != std::errc() || ptr != cells[c].data() + cells[c].size()) {
        throw Error(kParse, where + "column " + std::to_string(c + 1) +
                                " is not an integer");
      }
      return v;
    };
    TreeCount tc;
    const int tree = number_at(0);
    tc.estimated = number_at(1);
    if (!cells[2].empty()) tc.ground_truth = number_at(2);
    out[tree] = tc;
  }
  if (header) throw Error(kParse, "counts: missing header");
  return out;
}

std::string WriteReport(const CountReport& report) {
  Json trees = Json::array();
  for (const auto& [tree, tc] : report.per_tree) {
    trees.push_back(Json{{"tree", tree},
                         {"estimated", tc.estimated},
                         {"ground_truth", OptionalInt(tc.ground_truth)}});
  }
  Json signed_errors = Json::object();
  for (const auto& [tree, e] : report.signed_errors) {
    signed_errors[std::to_string(tree)] = e;
  }
  Json regression;
  if (report.regression) {
    regression = Json{{"slope", Quantize(report.regression->slope)},
                      {"intercept", Quantize(report.regression->intercept)},
                      {"r2", Quantize(report.regression->r2)}};
  }
  Json raw = Json::object();
  for (const auto& [side, n] : report.raw_track_counts) raw[side] = n;
  const Json root{{"per_tree", std::move(trees)},
                  {"total_estimated", report.total_estimated},
                  {"total_ground_truth", OptionalInt(report.total_ground_truth)},
                  {"signed_errors", std::move(signed_errors)},
                  {"abs_error", SummaryJson(report.abs_error)},
                  {"signed_error", SummaryJson(report.signed_error)},
                  {"regression", std::move(regression)},
                  {"l1_loss", OptionalInt(report.l1_loss)},
                  {"single_side", report.single_side},
                  {"raw_track_counts", std::move(raw)}};
  return root.dump(2) + "\n";
}

CountReport ParseReport(std::string_view text) {
  const Json root = Document(text, "report");
  ObjectReader r(root, "", kParse);
  CountReport report;
  const Json& trees = ArrayAt(r, "per_tree");
  for (std::size_t i = 0; i < trees.size(); ++i) {
    ObjectReader t(trees[i], Indexed("per_tree", i), kParse);
    const int tree = t.Require<int>("tree");
    TreeCount tc;
    tc.estimated = t.Require<int>("estimated");
    tc.ground_truth = ReadOptionalInt(t, "ground_truth");
    t.RejectUnknown();
    if (!report.per_tree.emplace(tree, tc).second) {
      t.Fail(t.Field("tree"), "duplicate tree " + std::to_string(tree));
    }
  }
  report.total_estimated = r.Require<int>("total_estimated");
  report.total_ground_truth = ReadOptionalInt(r, "total_ground_truth");
  if (r.Has("signed_errors")) {
    ObjectReader s(r.At("signed_errors"), "signed_errors", kParse);
    for (const auto& [key, value] : r.At("signed_errors").items()) {
      report.signed_errors[std::stoi(key)] = s.Require<int>(key);
    }
  }
  report.abs_error = ReadSummary(r, "abs_error");
  report.signed_error = ReadSummary(r, "signed_error");
  if (r.Has("regression")) {
    ObjectReader g(r.At("regression"), "regression", kParse);
    Regression reg;
    reg.slope = g.Require<double>("slope");
    reg.intercept = g.Require<double>("intercept");
    reg.r2 = g.Require<double>("r2");
    g.RejectUnknown();
    report.regression = reg;
  }
  report.l1_loss = ReadOptionalInt(r, "l1_loss");
  r.Get("single_side", report.single_side);
  if (r.Has("raw_track_counts")) {
    ObjectReader s(r.At("raw_track_counts"), "raw_track_counts", kParse);
    for (const auto& [key, value] : r.At("raw_track_counts").items()) {
      report.raw_track_counts[key] = s.Require<int>(key);
    }
  }
  r.RejectUnknown();
  return report;
}

std::string WriteTreeMask(const TreeMask& mask) {
  std::string out;
  for (const auto& [frame, regions] : mask) {
    Json a = Json::array();
    for (const TreeRegion& t : regions) {
      a.push_back(Json{{"tree", t.tree},
                       {"u_min", Quantize(t.u_min)},
                       {"u_max", Quantize(t.u_max)},
                       {"v_min", Quantize(t.v_min)},
                       {"v_max", Quantize(t.v_max)}});
    }
    out += Json{{"frame", frame}, {"regions", std::move(a)}}.dump();
    out += '\n';
  }
  return out;
}

TreeMask ParseTreeMask(std::string_view text) {
  TreeMask mask;
  for (const auto& [number, line] : Lines(text)) {
    AtLine(number, [&, line = line] {
      const Json j = ParseLine(line);
      ObjectReader r(j, "", kParse);
      const FrameIndex frame = r.Require<FrameIndex>("frame");
      const Json& regions = ArrayAt(r, "regions");
      r.RejectUnknown();
      std::vector<TreeRegion>& out = mask[frame];
      for (std::size_t i = 0; i < regions.size(); ++i) {
        ObjectReader g(regions[i], Indexed("regions", i), kParse);
        TreeRegion t;
        t.tree = g.Require<int>("tree");
        t.u_min = g.Require<double>("u_min");
        t.u_max = g.Require<double>("u_max");
        t.v_min = g.Require<double>("v_min");
        t.v_max = g.Require<double>("v_max");
        g.RejectUnknown();
        out.push_back(t);
      }
      return 0;
    });
  }
  return mask;
}

}  // namespace orchard
