#pragma once

#include <map>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "orchard/core_model.h"
#include "orchard/reconstruction.h"

namespace orchard {

using CornerTrack = std::vector<std::pair<FrameIndex, Eigen::Vector2d>>;

struct TrunkTrack {
  TrunkId trunk = 0;
  FrameIndex start_frame = 0;
  std::vector<CornerTrack> corner_tracks;
};

struct TrunkTrackConfig {
  int span = 4;  // frames per corner track
  // Largest distance (pixels) between a flow-predicted corner and the corner
  // it is chained to.
  double max_flow_error = 1.0;
  // Search radius (pixels) for frames without any corner flow.
  double search_radius = 10.0;
  int min_start_corners = 10;
  // Explicit start frame per trunk; replaces the automatic choice.
  std::map<TrunkId, FrameIndex> start_frames;

  void Validate() const;
};

// True when the column lies in the middle third of the image width.
bool InMiddleThird(const Eigen::Vector2d& pixel, const ImageSize& image);

// Chains each trunk's start-frame corners through `span` consecutive frames.
// The start frame is the first frame with at least min_start_corners
// middle-third corners (and span - 1 frames after it). Chains whose predicted
// position misses every corner, or whose match is not mutual, are dropped.
std::vector<TrunkTrack> BuildTrunkTracks(std::span<const FrameObservation> frames,
                                         const ImageSize& image,
                                         const TrunkTrackConfig& config);

// Third quartile with linear interpolation at rank 0.75 (n - 1). Throws
// kEmptyInput.
double TrunkDepthQ3(std::vector<double> depths);

struct TrunkDepthProfile {
  TrunkId trunk = 0;
  // Mean of the triangulated trunk points, in reconstruction coordinates.
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  std::map<FrameIndex, double> depth_by_frame;
};

// Fills every frame strictly between two populated frames by linear
// interpolation.
void FillProfileGaps(std::map<FrameIndex, double>& depth_by_frame);

// Triangulates every corner track, then takes the third quartile of the
// corner depths under each registered pose. Corners that fail triangulation
// are skipped; throws kEmptyProfile when none survive.
TrunkDepthProfile ComputeDepthProfile(const TrunkTrack& track,
                                      const Reconstruction& rec,
                                      double min_angle_deg = 0.5);

// Unit direction of the row in reconstruction coordinates: the principal axis
// of the trunk positions, or of the camera centers with a single trunk.
Eigen::Vector3d RowAxis(std::span<const TrunkDepthProfile> profiles,
                        const Reconstruction& rec);

// Index of the profile nearest to `point` along `axis`.
std::size_t NearestTrunk(const Eigen::Vector3d& point,
                         std::span<const TrunkDepthProfile> profiles,
                         const Eigen::Vector3d& axis);

struct VoteTally {
  int before = 0;
  int after = 0;
  bool counted() const { return before > after; }
};

// Compares landmark and trunk depth over frames {k - window, ..., k} where
// both exist. Throws kNoOverlappingFrames when there is no such frame.
VoteTally CentroidVote(const Landmark& landmark, const TrunkDepthProfile& profile,
                       FrameIndex k, int window = 15);

}  // namespace orchard
