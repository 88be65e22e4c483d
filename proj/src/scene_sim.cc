#include "orchard/scene_sim.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "orchard/error.h"
#include "orchard/random.h"

namespace orchard {
namespace {

// Stream tags for the counter-based generator.
enum StreamTag : std::uint64_t {
  kTagOcclusion = 11,
  kTagDropout = 12,
  kTagDropoutLength = 13,
  kTagMiss = 14,
  kTagCenterNoise = 15,
  kTagFlowNoise = 16,
  kTagSpuriousCount = 17,
  kTagSpuriousPos = 18,
  kTagSpuriousArea = 19,
  kTagCornerFlowNoise = 20,
  kTagSpuriousScore = 21,
};

constexpr double kMinDepth = 0.05;

std::uint64_t Key(FruitId id) { return static_cast<std::uint64_t>(id); }

bool InMiddleThird(const ImageSize& size, const Eigen::Vector2d& p) {
  return p.x() >= 0.0 && p.x() < size.rows && p.y() >= size.cols / 3.0 &&
         p.y() < 2.0 * size.cols / 3.0;
}

// Knuth's multiplication method driven by counter draws.
int PoissonDraw(const CounterRng& rng, double mean, std::uint64_t pass,
                std::uint64_t frame) {
  if (mean <= 0.0) return 0;
  const double limit = std::exp(-mean);
  double product = 1.0;
  int n = -1;
  std::uint64_t i = 0;
  do {
    ++n;
    product *= rng.Uniform({kTagSpuriousCount, pass, frame, i++});
  } while (product > limit && n < 1000);
  return n;
}

FruitSide DrawSide(int index, int n_band, int n_east) {
  if (index < n_band) return FruitSide::kBand;
  if (index < n_band + n_east) return FruitSide::kEast;
  return FruitSide::kWest;
}

bool OnVisibleSide(const SceneConfig& cfg, Pass pass, const Fruit& fruit) {
  // Offset of the fruit beyond the trunk plane as seen from the pass.
  const double beyond =
      pass == Pass::kEast ? fruit.position.y() : -fruit.position.y();
  return beyond < cfg.overlap_band;
}

}  // namespace

const char* PassName(Pass pass) {
  return pass == Pass::kEast ? "east" : "west";
}

void SceneConfig::Validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw Error(ErrorCode::kInvalidConfig, "scene." + field + ": " + why);
  };
  if (fruits_per_tree.empty()) fail("fruits_per_tree", "need at least one tree");
  for (int n : fruits_per_tree) {
    if (n < 0) fail("fruits_per_tree", "counts must be nonnegative");
  }
  if (frames_per_pass < 2) fail("frames_per_pass", "need at least 2 frames");
  if (!(tree_spacing > 0.0)) fail("tree_spacing", "must be positive");
  if (!(crown_radii.minCoeff() > 0.0)) fail("crown_radii", "must be positive");
  if (!(fruit_diameter > 0.0)) fail("fruit_diameter", "must be positive");
  if (min_fruit_separation < 0.0) fail("min_fruit_separation", "must be >= 0");
  if (!(overlap_band >= 0.0) || overlap_band >= crown_radii.y()) {
    fail("overlap_band", "must be in [0, crown_radii[1])");
  }
  if (!(overlap_fraction >= 0.0 && overlap_fraction <= 1.0)) {
    fail("overlap_fraction", "must be in [0, 1]");
  }
  if (!(east_side_fraction >= 0.0 && east_side_fraction <= 1.0)) {
    fail("east_side_fraction", "must be in [0, 1]");
  }
  if (!(camera_distance > crown_radii.y())) {
    fail("camera_distance", "camera must stay outside the crown");
  }
  if (!(speed > 0.0)) fail("speed", "must be positive");
  if (!(trunk_height > 0.0)) fail("trunk_height", "must be positive");
  if (corners_per_trunk < 0) fail("corners_per_trunk", "must be >= 0");
  if (image_size.rows <= 0 || image_size.cols <= 0) {
    fail("image_size", "must be positive");
  }
  try {
    intrinsics.Validate();
  } catch (const Error& e) {
    fail("intrinsics", e.what());
  }
}

void NoiseConfig::Validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw Error(ErrorCode::kInvalidConfig, "noise." + field + ": " + why);
  };
  if (!(detection_center_sigma >= 0.0)) {
    fail("detection_center_sigma", "must be >= 0");
  }
  if (!(missed_detection_rate >= 0.0 && missed_detection_rate <= 1.0)) {
    fail("missed_detection_rate", "must be in [0, 1]");
  }
  if (!(spurious_detection_rate >= 0.0)) {
    fail("spurious_detection_rate", "must be >= 0");
  }
  if (!(occlusion_fraction >= 0.0 && occlusion_fraction < 1.0)) {
    fail("occlusion_fraction", "must be in [0, 1)");
  }
  if (!(flow_sigma >= 0.0)) fail("flow_sigma", "must be >= 0");
  if (dropout_burst_length < 0) fail("dropout_burst_length", "must be >= 0");
  if (dropout_burst_min < 0 || dropout_burst_min > dropout_burst_length) {
    fail("dropout_burst_min", "must be in [0, dropout_burst_length]");
  }
  if (!(dropout_fraction >= 0.0 && dropout_fraction <= 1.0)) {
    fail("dropout_fraction", "must be in [0, 1]");
  }
}

int OrchardScene::NumFruits() const {
  int n = 0;
  for (const Tree& t : trees) n += static_cast<int>(t.fruits.size());
  return n;
}

const Fruit& OrchardScene::FindFruit(FruitId id) const {
  for (const Tree& t : trees) {
    for (const Fruit& f : t.fruits) {
      if (f.id == id) return f;
    }
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown fruit " + std::to_string(id));
}

CameraPose PassPose(const OrchardScene& scene, Pass pass, double t) {
  const SceneConfig& cfg = scene.config.scene;
  const double row_mid = 0.5 * (cfg.num_trees() - 1) * cfg.tree_spacing;
  const double half_span = 0.5 * cfg.speed * (cfg.frames_per_pass - 1);
  const double two_pi = 2.0 * std::numbers::pi;
  const double yaw = cfg.yaw_wobble_deg * std::numbers::pi / 180.0 *
                     std::sin(two_pi * t / 37.0 + scene.yaw_phase);
  const double dz =
      cfg.height_wobble * std::sin(two_pi * t / 29.0 + scene.height_phase);

  Eigen::Matrix3d base;
  Eigen::Vector3d center;
  if (pass == Pass::kEast) {
    // Rows are the camera axes in world coordinates: u down, v toward -x,
    // optical axis toward +y.
    base << 0, 0, -1, -1, 0, 0, 0, 1, 0;
    center << row_mid - half_span + cfg.speed * t, -cfg.camera_distance,
        cfg.camera_height + dz;
  } else {
    base << 0, 0, -1, 1, 0, 0, 0, -1, 0;
    center << row_mid + half_span - cfg.speed * t, cfg.camera_distance,
        cfg.camera_height + dz;
  }
  const Eigen::Matrix3d yaw_rot =
      RotationFromAxisAngle(Eigen::Vector3d(0.0, 0.0, yaw));
  const Eigen::Matrix3d rotation = base * yaw_rot.transpose();
  return CameraPose::FromApproximateRotation(rotation, -rotation * center);
}

OrchardScene GenerateScene(const SimulationConfig& config, std::uint64_t seed) {
  config.scene.Validate();
  config.noise.Validate();
  const SceneConfig& cfg = config.scene;

  OrchardScene scene;
  scene.config = config;
  scene.rng_seed = seed;
  Rng rng(seed);
  scene.yaw_phase = 2.0 * std::numbers::pi * rng.Uniform();
  scene.height_phase = 2.0 * std::numbers::pi * rng.Uniform();

  FruitId next_id = 0;
  for (int t = 0; t < cfg.num_trees(); ++t) {
    Tree tree;
    tree.id = t;
    const double x0 = t * cfg.tree_spacing;
    tree.trunk_base = Eigen::Vector3d(x0, 0.0, 0.0);
    tree.trunk_top = Eigen::Vector3d(x0, 0.0, cfg.trunk_height);
    const Eigen::Vector3d crown_center(x0, 0.0, cfg.crown_center_height);

    const int n = cfg.fruits_per_tree[t];
    const int n_band = static_cast<int>(std::lround(n * cfg.overlap_fraction));
    const int n_east =
        static_cast<int>(std::lround((n - n_band) * cfg.east_side_fraction));
    for (int i = 0; i < n; ++i) {
      const FruitSide side = DrawSide(i, n_band, n_east);
      const Eigen::Vector3d& r = cfg.crown_radii;
      bool placed = false;
      for (int attempt = 0; attempt < 20000 && !placed; ++attempt) {
        const Eigen::Vector3d unit(2.0 * rng.Uniform() - 1.0,
                                   2.0 * rng.Uniform() - 1.0,
                                   2.0 * rng.Uniform() - 1.0);
        if (unit.squaredNorm() > 1.0) continue;
        const Eigen::Vector3d offset = unit.cwiseProduct(r);
        const double y = offset.y();
        const bool side_ok =
            (side == FruitSide::kBand && std::abs(y) < cfg.overlap_band) ||
            (side == FruitSide::kEast && y <= -cfg.overlap_band) ||
            (side == FruitSide::kWest && y >= cfg.overlap_band);
        if (!side_ok) continue;
        const Eigen::Vector3d position = crown_center + offset;
        bool separated = true;
        for (const Fruit& other : tree.fruits) {
          if ((other.position - position).norm() < cfg.min_fruit_separation) {
            separated = false;
            break;
          }
        }
        if (!separated) continue;
        tree.fruits.push_back(Fruit{next_id++, t, position, side});
        placed = true;
      }
      if (!placed) {
        throw Error(ErrorCode::kInvalidConfig,
                    "scene.fruits_per_tree: cannot place fruit " +
                        std::to_string(i) + " on tree " + std::to_string(t) +
                        " with the requested separation");
      }
    }
    for (int c = 0; c < cfg.corners_per_trunk; ++c) {
      const double h = cfg.trunk_height * (0.15 + 0.85 * rng.Uniform());
      tree.corners.emplace_back(x0, 0.0, h);
    }
    scene.trees.push_back(std::move(tree));
  }

  const int passes = cfg.simulate_west ? 2 : 1;
  for (int p = 0; p < passes; ++p) {
    const Pass pass = static_cast<Pass>(p);
    std::vector<CameraPose>& traj =
        pass == Pass::kEast ? scene.east_trajectory : scene.west_trajectory;
    for (int k = 0; k < cfg.frames_per_pass; ++k) {
      traj.push_back(PassPose(scene, pass, k));
    }
  }

  const CounterRng crng(seed);
  const NoiseConfig& noise = config.noise;
  for (int p = 0; p < passes; ++p) {
    const Pass pass = static_cast<Pass>(p);
    const auto& traj = scene.Trajectory(pass);
    for (const Tree& tree : scene.trees) {
      for (const Fruit& fruit : tree.fruits) {
        FruitPassState st;
        st.on_visible_side = OnVisibleSide(cfg, pass, fruit);
        st.occluded = crng.Uniform({kTagOcclusion, static_cast<std::uint64_t>(p),
                                    Key(fruit.id)}) < noise.occlusion_fraction;
        for (int k = 0; k < static_cast<int>(traj.size()); ++k) {
          if (CameraDepth(traj[k], fruit.position) <= kMinDepth) continue;
          if (!cfg.image_size.Contains(
                  Project(cfg.intrinsics, traj[k], fruit.position))) {
            continue;
          }
          if (!st.first_in_view) st.first_in_view = k;
          st.last_in_view = k;
        }
        const bool drop =
            noise.dropout_burst_length > 0 &&
            crng.Uniform({kTagDropout, static_cast<std::uint64_t>(p),
                          Key(fruit.id)}) < noise.dropout_fraction;
        if (drop && st.first_in_view && st.on_visible_side && !st.occluded) {
          const int lo = std::max(1, noise.dropout_burst_min);
          const int hi = noise.dropout_burst_length;
          const int length =
              lo + static_cast<int>(crng.Uniform({kTagDropoutLength,
                                                  static_cast<std::uint64_t>(p),
                                                  Key(fruit.id)}) *
                                    (hi - lo + 1));
          const int span = *st.last_in_view - *st.first_in_view + 1;
          // Only split when both halves remain long enough to be tracked.
          if (span >= length + 8) {
            const int start = *st.first_in_view + (span - length) / 2;
            for (int k = start; k < start + length; ++k) {
              st.dropout_frames.push_back(k);
            }
          }
        }
        scene.pass_states[{p, fruit.id}] = std::move(st);
      }
    }
  }
  return scene;
}

Eigen::Vector2d TrueFlow(const OrchardScene& scene, Pass pass, FrameIndex k,
                         const Eigen::Vector3d& point) {
  const CameraIntrinsics& intr = scene.intrinsics();
  return Project(intr, PassPose(scene, pass, k + 1), point) -
         Project(intr, scene.Trajectory(pass)[k], point);
}

SynthesizedFrame SynthesizeFrame(const OrchardScene& scene, Pass pass,
                                 FrameIndex k) {
  const auto& traj = scene.Trajectory(pass);
  if (k < 0 || k >= static_cast<int>(traj.size())) {
    throw Error(ErrorCode::kFrameOutOfRange,
                std::string(PassName(pass)) + " pass has no frame " +
                    std::to_string(k));
  }
  const SceneConfig& cfg = scene.config.scene;
  const NoiseConfig& noise = scene.config.noise;
  const CameraIntrinsics& intr = cfg.intrinsics;
  const CounterRng crng(scene.rng_seed);
  const std::uint64_t p = static_cast<std::uint64_t>(pass);
  const std::uint64_t f = static_cast<std::uint64_t>(k);
  const CameraPose& pose = traj[k];
  const CameraPose next = PassPose(scene, pass, k + 1);

  SynthesizedFrame out;
  out.observation.frame = k;
  std::vector<FlowVector> flows;
  Eigen::Vector2d flow_sum = Eigen::Vector2d::Zero();
  std::vector<double> areas;

  for (const Tree& tree : scene.trees) {
    for (const Fruit& fruit : tree.fruits) {
      const FruitPassState& st = scene.pass_states.at({static_cast<int>(pass), fruit.id});
      if (!st.on_visible_side || st.occluded) continue;
      const double depth = CameraDepth(pose, fruit.position);
      if (depth <= kMinDepth) continue;
      const Eigen::Vector2d pixel = Project(intr, pose, fruit.position);
      if (!cfg.image_size.Contains(pixel)) continue;
      if (std::binary_search(st.dropout_frames.begin(), st.dropout_frames.end(),
                             k)) {
        continue;
      }
      const std::uint64_t id = Key(fruit.id);
      if (crng.Uniform({kTagMiss, p, f, id}) < noise.missed_detection_rate) {
        continue;
      }
      Eigen::Vector2d center = pixel;
      if (noise.detection_center_sigma > 0.0) {
        center += noise.detection_center_sigma *
                  Eigen::Vector2d(crng.Gaussian({kTagCenterNoise, p, f, id, 0}),
                                  crng.Gaussian({kTagCenterNoise, p, f, id, 1}));
      }
      const double height = intr.fx * cfg.fruit_diameter / depth;
      const double width = intr.fy * cfg.fruit_diameter / depth;
      out.observation.detections.push_back(
          Detection{k, BoundingBox(center, width, height), 1.0});
      out.truth.push_back(fruit.id);
      areas.push_back(width * height);

      const Eigen::Vector2d true_flow =
          Project(intr, next, fruit.position) - pixel;
      flow_sum += true_flow;
      Eigen::Vector2d flow = true_flow;
      if (noise.flow_sigma > 0.0) {
        flow += noise.flow_sigma *
                Eigen::Vector2d(crng.Gaussian({kTagFlowNoise, p, f, id, 0}),
                                crng.Gaussian({kTagFlowNoise, p, f, id, 1}));
      }
      flows.push_back(FlowVector{flow.x(), flow.y()});
    }
  }

  const std::size_t n_true = flows.size();
  const Eigen::Vector2d mean_true_flow =
      n_true > 0 ? Eigen::Vector2d(flow_sum / static_cast<double>(n_true))
                 : Eigen::Vector2d::Zero();
  const int n_spurious = PoissonDraw(crng, noise.spurious_detection_rate, p, f);
  for (int s = 0; s < n_spurious; ++s) {
    const std::uint64_t si = static_cast<std::uint64_t>(s);
    const Eigen::Vector2d center(
        crng.Uniform({kTagSpuriousPos, p, f, si, 0}) * cfg.image_size.rows,
        crng.Uniform({kTagSpuriousPos, p, f, si, 1}) * cfg.image_size.cols);
    double area;
    if (!areas.empty()) {
      const auto idx = static_cast<std::size_t>(
          crng.Uniform({kTagSpuriousArea, p, f, si}) * areas.size());
      area = areas[std::min(idx, areas.size() - 1)];
    } else {
      const double side = intr.fx * cfg.fruit_diameter / cfg.camera_distance;
      area = side * side;
    }
    const double score = 0.5 + 0.5 * crng.Uniform({kTagSpuriousScore, p, f, si});
    out.observation.detections.push_back(
        Detection{k, BoundingBox::Square(center, area), score});
    out.truth.push_back(-1);
    Eigen::Vector2d flow = mean_true_flow;
    if (noise.flow_sigma > 0.0) {
      flow += noise.flow_sigma *
              Eigen::Vector2d(crng.Gaussian({kTagFlowNoise, p, f, 1000000 + si, 0}),
                              crng.Gaussian({kTagFlowNoise, p, f, 1000000 + si, 1}));
    }
    flows.push_back(FlowVector{flow.x(), flow.y()});
  }
  out.observation.flows = std::move(flows);

  std::vector<TrunkCorner> corners;
  for (const Tree& tree : scene.trees) {
    for (std::size_t c = 0; c < tree.corners.size(); ++c) {
      const Eigen::Vector3d& X = tree.corners[c];
      if (CameraDepth(pose, X) <= kMinDepth) continue;
      const Eigen::Vector2d pixel = Project(intr, pose, X);
      if (!InMiddleThird(cfg.image_size, pixel)) continue;
      Eigen::Vector2d flow = Project(intr, next, X) - pixel;
      if (noise.flow_sigma > 0.0) {
        const std::uint64_t key = static_cast<std::uint64_t>(tree.id) * 4096 + c;
        flow += noise.flow_sigma *
                Eigen::Vector2d(crng.Gaussian({kTagCornerFlowNoise, p, f, key, 0}),
                                crng.Gaussian({kTagCornerFlowNoise, p, f, key, 1}));
      }
      corners.push_back(
          TrunkCorner{tree.id, pixel, FlowVector{flow.x(), flow.y()}});
    }
  }
  out.observation.trunk_corners = std::move(corners);
  return out;
}

std::vector<SynthesizedFrame> SynthesizePass(const OrchardScene& scene,
                                             Pass pass) {
  std::vector<SynthesizedFrame> frames;
  const int n = static_cast<int>(scene.Trajectory(pass).size());
  frames.reserve(n);
  for (int k = 0; k < n; ++k) frames.push_back(SynthesizeFrame(scene, pass, k));
  return frames;
}

std::vector<FrameObservation> Observations(
    const std::vector<SynthesizedFrame>& frames) {
  std::vector<FrameObservation> out;
  out.reserve(frames.size());
  for (const SynthesizedFrame& f : frames) out.push_back(f.observation);
  return out;
}

std::map<int, int> GroundTruthCounts(const OrchardScene& scene) {
  std::map<int, int> counts;
  for (const Tree& t : scene.trees) {
    counts[t.id] = static_cast<int>(t.fruits.size());
  }
  return counts;
}

}  // namespace orchard
