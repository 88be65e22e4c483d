#pragma once

#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "orchard/core_model.h"
#include "orchard/error.h"
#include "orchard/reassoc.h"
#include "orchard/reconstruction.h"
#include "orchard/scene_sim.h"
#include "orchard/tracker2d.h"
#include "orchard/trunk_depth.h"

namespace orchard {

// Refines a displacement from `position` in `frame` to the next frame, given
// an initial guess. Returns nothing when it cannot refine.
class FlowProvider {
 public:
  virtual ~FlowProvider() = default;
  virtual std::optional<Eigen::Vector2d> Refine(FrameIndex frame,
                                                const Eigen::Vector2d& position,
                                                const Eigen::Vector2d& guess) const = 0;
};

// Reports the flow of the detection nearest to the query position.
class ObservationFlowProvider : public FlowProvider {
 public:
  ObservationFlowProvider(std::span<const FrameObservation> frames, double radius);
  std::optional<Eigen::Vector2d> Refine(FrameIndex frame,
                                        const Eigen::Vector2d& position,
                                        const Eigen::Vector2d& guess) const override;

 private:
  std::map<FrameIndex, const FrameObservation*> frames_;
  double radius_;
};

// Exact displacement of the simulated fruit projecting nearest the query.
class SimulatorFlowProvider : public FlowProvider {
 public:
  SimulatorFlowProvider(const OrchardScene& scene, Pass pass);
  std::optional<Eigen::Vector2d> Refine(FrameIndex frame,
                                        const Eigen::Vector2d& position,
                                        const Eigen::Vector2d& guess) const override;

 private:
  const OrchardScene& scene_;
  Pass pass_;
};

struct RefineConfig {
  // Refined displacements farther than this from the guess are rejected.
  double max_divergence = 5.0;
  // Detection search radius of the observation-backed provider.
  double search_radius = 10.0;

  void Validate() const;
};

struct RefineStats {
  int refined = 0;
  int diverged = 0;
  int unavailable = 0;
};

// Rebuilds every track from its first raw detection center by chaining
// refined displacements; the guess for each step is the gap between the
// current refined position and the next input position.
FeatureMatchSet RefineMatches(const FeatureMatchSet& matches,
                              const FlowProvider& provider,
                              const RefineConfig& config,
                              RefineStats* stats = nullptr);

// Per-frame image regions assigned to trees.
struct TreeRegion {
  int tree = 0;
  double u_min = 0.0, u_max = 0.0, v_min = 0.0, v_max = 0.0;
};
using TreeMask = std::map<FrameIndex, std::vector<TreeRegion>>;

struct SideInput {
  std::vector<FrameObservation> frames;
  std::optional<TreeMask> tree_mask;
};

struct PipelineOptions {
  TrackerConfig tracker;
  SfmConfig sfm;
  ReassocConfig reassoc;
  TrunkTrackConfig trunk;
  RefineConfig refine;
  int vote_window = 15;
  bool enable_reassociation = true;
  bool enable_centroid_voting = true;
  // Voting needs trunk depth; a single-side run may skip it when this is set.
  bool single_side_skips_voting = false;
  ImageSize image{720, 960};
  CameraIntrinsics intrinsics{700.0, 700.0, 360.0, 480.0};
  int threads = 1;

  void Validate() const;
};

struct FruitMapEntry {
  FruitId landmark = 0;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  int tree = -1;
  bool counted = false;
  FrameIndex first_frame = 0;
  FrameIndex last_frame = 0;
  Pass side = Pass::kEast;
  int votes_before = 0;
  int votes_after = 0;
};

using FruitMap = std::vector<FruitMapEntry>;

struct SideResult {
  Pass side = Pass::kEast;
  int raw_track_count = 0;
  int first_landmarks = 0;
  int reassociated_landmarks = 0;
  int final_landmarks = 0;
  int registered_frames = 0;
  double first_rms = 0.0;
  double final_rms = 0.0;
  Reconstruction first;
  Reconstruction final;
  std::vector<TrunkDepthProfile> profiles;
  FruitMap fruits;
  std::map<std::string, double> stage_seconds;
};

struct TreeCount {
  int estimated = 0;
  std::optional<int> ground_truth;
};

struct ErrorSummary {
  double mean = 0.0;
  double stddev = 0.0;
};

struct Regression {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

struct CountReport {
  std::map<int, TreeCount> per_tree;
  int total_estimated = 0;
  std::optional<int> total_ground_truth;
  // Estimate minus truth, only for trees with a ground truth.
  std::map<int, int> signed_errors;
  std::optional<ErrorSummary> abs_error;
  std::optional<ErrorSummary> signed_error;
  std::optional<Regression> regression;
  std::optional<int> l1_loss;
  bool single_side = false;
  std::map<std::string, int> raw_track_counts;  // by side name
};

struct PipelineResult {
  CountReport report;
  FruitMap fruits;
  std::vector<SideResult> sides;
};

// A library error annotated with the pipeline stage and side it came from.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, Pass side, const Error& cause)
      : std::runtime_error(std::string(PassName(side)) + "/" + stage + ": " +
                           cause.what()),
        stage_(std::move(stage)),
        code_(cause.code()) {}

  const std::string& stage() const { return stage_; }
  ErrorCode code() const { return code_; }

 private:
  std::string stage_;
  ErrorCode code_;
};

// Runs one side end to end; failures surface as StageError.
SideResult RunSide(const SideInput& input, Pass side, const PipelineOptions& options,
                   const FlowProvider* provider = nullptr);

// Both sides (either may be absent), fused into per-tree counts. Sides
// without a provider refine against their own detections.
PipelineResult CountPipeline(const std::optional<SideInput>& east,
                             const std::optional<SideInput>& west,
                             const PipelineOptions& options,
                             const FlowProvider* east_provider = nullptr,
                             const FlowProvider* west_provider = nullptr);

// Fills ground truth, errors and summary statistics into a report.
void AttachGroundTruth(CountReport& report, const std::map<int, int>& truth);

// Throws kLengthMismatch.
long long L1Loss(std::span<const int> estimates, std::span<const int> truths);

// Ordinary least squares of estimate on truth over (truth, estimate) pairs.
// Throws kDegenerateInput for fewer than two pairs or constant truth.
Regression FitRegression(std::span<const std::pair<double, double>> pairs);

// Mean of |error| and its sample standard deviation (0 for a single value).
// Throws kEmptyInput.
ErrorSummary ErrorStats(std::span<const int> errors);

// Like ErrorStats without the absolute value.
ErrorSummary SignedErrorStats(std::span<const int> errors);

}  // namespace orchard
