#pragma once

#include <map>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "orchard/core_model.h"
#include "orchard/reconstruction.h"

namespace orchard {

struct AgeCostParams {
  int O0 = 7;
  double wO = 0.5;

  void Validate() const;
};

// w_O * max(0, 1 - (O - O0) / O0). Throws kInvalidArgument for O < 1.
double AgeCost(int age, const AgeCostParams& params);

// Normalized squared distance between the landmark projection and the
// detection center, plus one minus the overlap of a square box of area
// `landmark_area` at the projection with the detection box, plus the age cost.
double LandmarkCost(const Eigen::Vector2d& projection, double landmark_area,
                    const Detection& detection, int age,
                    const AgeCostParams& params);

struct ReassocConfig {
  AgeCostParams age;
  // Tracker gate; the age term's largest value is added on top.
  double base_gate = 2.0;
  int min_track_length = 3;

  double Gate() const;
  void Validate() const;
};

struct ReassocResult {
  Reconstruction reconstruction;  // discarded landmarks removed
  // Re-associated detections, one or more consecutive runs per landmark.
  FeatureMatchSet matches;
  std::map<FruitId, int> match_counts;
  std::vector<FruitId> discarded;
};

// Sweeps the frames in ascending order, matching projected landmarks to
// detections. A landmark's age in frame k is one plus the number of frames it
// matched before k. Never creates landmarks. Throws kMissingPose when a frame
// has no pose.
ReassocResult Reassociate(const Reconstruction& rec,
                          std::span<const FrameObservation> frames,
                          const ImageSize& image, const ReassocConfig& config);

}  // namespace orchard
