#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "orchard/core_model.h"
#include "orchard/geometry.h"

namespace orchard {

struct Observation {
  FruitId landmark = 0;
  FrameIndex frame = 0;
  Eigen::Vector2d point = Eigen::Vector2d::Zero();
  double box_area = 0.0;
};

struct Reconstruction {
  CameraIntrinsics intrinsics;
  std::map<FrameIndex, CameraPose> poses;
  std::map<FruitId, Landmark> landmarks;
  std::vector<Observation> observations;
  // Gauge: the first frame is the identity pose and the distance between the
  // two camera centers is one.
  std::pair<FrameIndex, FrameIndex> initial_pair{0, 0};

  // Sum of squared reprojection errors over all observations.
  double Cost() const;
  // Root mean square and mean of the reprojection distance, in pixels.
  double RmsReprojection() const;
  double MeanReprojection() const;
  // Throws kMissingPose / kInvalidArgument on dangling references.
  void Validate() const;
  // Recomputes observed frames, box area and per-frame depth of every landmark
  // from the observation list.
  void RefreshLandmarkAttributes();
  // Scales the world so the initial pair baseline is one.
  void NormalizeScale();
};

struct SfmConfig {
  RansacConfig essential{1000, 1e-3, 15, 0.999};
  RansacConfig pnp{1000, 2.0, 15, 0.999};
  double min_triangulation_angle_deg = 0.5;
  double min_initial_pair_angle_deg = 2.0;
  int min_shared_tracks = 8;
  int local_ba_window = 5;
  int global_ba_interval = 10;
  int ba_max_iterations = 100;
  double ba_relative_tolerance = 1e-8;
  // Observations reprojecting farther than this (pixels) are dropped.
  double outlier_threshold = 4.0;
  double min_registered_fraction = 0.5;
  std::uint64_t seed = 0;

  void Validate() const;
};

struct InitialPair {
  FrameIndex first = 0;
  FrameIndex second = 0;
  int num_inliers = 0;
  double median_angle_deg = 0.0;
};

// Scores every frame pair sharing enough tracks by inlier count times median
// triangulation angle, among pairs whose median angle clears the floor.
// Throws kNoValidPair.
InitialPair SelectInitialPair(const FeatureMatchSet& matches,
                              const CameraIntrinsics& intrinsics,
                              const SfmConfig& config);

// Two-view reconstruction of the pair followed by bundle adjustment.
Reconstruction InitializeTwoView(const FeatureMatchSet& matches,
                                 const InitialPair& pair,
                                 const CameraIntrinsics& intrinsics,
                                 const SfmConfig& config);

// Full incremental reconstruction. Landmark ids are fruit ids; tracks sharing
// a fruit id form one landmark. Throws kNoValidPair or
// kReconstructionTooSparse.
Reconstruction Reconstruct(const FeatureMatchSet& matches,
                           const CameraIntrinsics& intrinsics,
                           const SfmConfig& config);

}  // namespace orchard
