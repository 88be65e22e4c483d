#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "orchard/core_model.h"

namespace orchard {

enum class Pass { kEast = 0, kWest = 1 };

const char* PassName(Pass pass);

// Geometry of the synthetic row. Lengths are meters, the row runs along +x,
// z is up, and the east pass looks toward +y from y = -camera_distance.
struct SceneConfig {
  std::vector<int> fruits_per_tree = {60};
  double tree_spacing = 3.5;
  // Crown ellipsoid semi-axes along the row, across the row, and vertically.
  Eigen::Vector3d crown_radii{0.9, 0.7, 0.6};
  double crown_center_height = 1.8;
  double trunk_height = 1.2;
  double fruit_diameter = 0.1;
  double min_fruit_separation = 0.12;
  // Fruits within +-overlap_band of the trunk plane are visible from both
  // passes.
  double overlap_band = 0.3;
  double overlap_fraction = 0.0;
  // Share of the out-of-band fruits placed on the east side.
  double east_side_fraction = 1.0;
  double camera_distance = 3.0;
  double camera_height = 1.8;
  double speed = 0.1;  // meters per frame
  int frames_per_pass = 40;
  bool simulate_west = false;
  double yaw_wobble_deg = 1.0;
  double height_wobble = 0.02;
  int corners_per_trunk = 20;
  CameraIntrinsics intrinsics{700.0, 700.0, 360.0, 480.0};
  ImageSize image_size{720, 960};

  int num_trees() const { return static_cast<int>(fruits_per_tree.size()); }
  void Validate() const;
};

struct NoiseConfig {
  double detection_center_sigma = 0.0;
  double missed_detection_rate = 0.0;
  double spurious_detection_rate = 0.0;
  double occlusion_fraction = 0.0;
  double flow_sigma = 0.0;
  // Bursts of length uniform in [dropout_burst_min, dropout_burst_length] hit
  // a dropout_fraction share of fruits once per pass.
  int dropout_burst_length = 0;
  int dropout_burst_min = 0;
  double dropout_fraction = 0.0;

  void Validate() const;
};

struct SimulationConfig {
  SceneConfig scene;
  NoiseConfig noise;
};

enum class FruitSide { kEast, kBand, kWest };

struct Fruit {
  FruitId id = 0;
  int tree = 0;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  FruitSide side = FruitSide::kEast;
};

struct Tree {
  int id = 0;
  Eigen::Vector3d trunk_base = Eigen::Vector3d::Zero();
  Eigen::Vector3d trunk_top = Eigen::Vector3d::Zero();
  std::vector<Fruit> fruits;
  // Persistent trunk features, points on the trunk line.
  std::vector<Eigen::Vector3d> corners;
};

// Per (fruit, pass) visibility state, fixed at scene generation.
struct FruitPassState {
  bool on_visible_side = false;
  bool occluded = false;
  // Frames where the fruit center projects into the image.
  std::optional<FrameIndex> first_in_view;
  std::optional<FrameIndex> last_in_view;
  std::vector<FrameIndex> dropout_frames;
};

struct OrchardScene {
  SimulationConfig config;
  std::uint64_t rng_seed = 0;
  std::vector<Tree> trees;
  Eigen::Vector3d row_direction = Eigen::Vector3d::UnitX();
  std::vector<CameraPose> east_trajectory;
  std::vector<CameraPose> west_trajectory;
  // Wobble phases drawn from the seed.
  double yaw_phase = 0.0;
  double height_phase = 0.0;
  // Keyed by (pass, fruit id).
  std::map<std::pair<int, FruitId>, FruitPassState> pass_states;

  const CameraIntrinsics& intrinsics() const { return config.scene.intrinsics; }
  const ImageSize& image_size() const { return config.scene.image_size; }
  const std::vector<CameraPose>& Trajectory(Pass pass) const {
    return pass == Pass::kEast ? east_trajectory : west_trajectory;
  }
  bool HasPass(Pass pass) const { return !Trajectory(pass).empty(); }
  int NumFruits() const;
  const Fruit& FindFruit(FruitId id) const;
};

// One emitted detection's ground truth; -1 marks a spurious detection.
struct CorrespondenceEntry {
  Pass pass = Pass::kEast;
  FrameIndex frame = 0;
  int detection_index = 0;
  FruitId fruit_id = -1;
};

struct SynthesizedFrame {
  FrameObservation observation;
  // Index-aligned with observation.detections. Test-only.
  std::vector<FruitId> truth;
};

// Deterministic for a fixed (config, seed). Throws kInvalidConfig for empty
// scenes or unplaceable fruits.
OrchardScene GenerateScene(const SimulationConfig& config, std::uint64_t seed);

// Pose on the smooth pass trajectory at a (possibly fractional) frame time.
CameraPose PassPose(const OrchardScene& scene, Pass pass, double t);

// Throws kFrameOutOfRange when k is outside the pass.
SynthesizedFrame SynthesizeFrame(const OrchardScene& scene, Pass pass,
                                 FrameIndex k);

std::vector<SynthesizedFrame> SynthesizePass(const OrchardScene& scene,
                                             Pass pass);
std::vector<FrameObservation> Observations(
    const std::vector<SynthesizedFrame>& frames);

std::map<int, int> GroundTruthCounts(const OrchardScene& scene);

// Exact displacement of a fruit between frames k and k + 1 of a pass; used as
// the simulator's stand-in for image-based flow refinement.
Eigen::Vector2d TrueFlow(const OrchardScene& scene, Pass pass, FrameIndex k,
                         const Eigen::Vector3d& point);

}  // namespace orchard
