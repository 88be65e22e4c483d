#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "orchard/core_model.h"

namespace orchard {

using Vector6d = Eigen::Matrix<double, 6, 1>;
using Matrix6d = Eigen::Matrix<double, 6, 6>;
using Matrix64d = Eigen::Matrix<double, 6, 4>;

// Constant-velocity model over (u, v, du, dv) with the detector center, the
// flow-predicted center and a flow-derived velocity as measurements.
struct KfModel {
  Eigen::Matrix4d A;
  Matrix64d H;
  Eigen::Matrix4d Q;
  Matrix6d R;

  static KfModel Make(const Eigen::Vector4d& q_diag, const Vector6d& r_diag);
  static KfModel Default();
};

struct TrackerConfig {
  double gate = 2.0;
  int min_track_length = 3;
  Eigen::Vector4d initial_covariance{9.0, 9.0, 4.0, 4.0};
  Eigen::Vector4d process_noise{6.0, 2.0, 3.0, 1.0};
  Vector6d measurement_noise = (Vector6d() << 3.0, 1.0, 1.0, 0.5, 1.0, 0.5).finished();
  // Applied to the velocity block of R when the mean flow has no direction.
  double zero_flow_inflation = 100.0;

  void Validate() const;
  KfModel Model() const {
    return KfModel::Make(process_noise, measurement_noise);
  }
};

enum class TrackStatus { kActive, kTerminated };

struct TrackState {
  FruitId id = 0;
  Eigen::Vector4d x = Eigen::Vector4d::Zero();
  Eigen::Matrix4d P = Eigen::Matrix4d::Identity();
  BoundingBox last_box;
  FlowVector last_flow;
  std::vector<TrackPoint> points;
  TrackStatus status = TrackStatus::kActive;

  Eigen::Vector2d position() const { return x.head<2>(); }
  Eigen::Vector2d velocity() const { return x.tail<2>(); }
};

// Componentwise mean; `fallback` is returned for an empty list.
FlowVector MeanFlow(std::span<const FlowVector> flows,
                    const FlowVector& fallback = {});

// Remembers the last nonzero mean so empty frames inherit it.
class MeanFlowEstimator {
 public:
  FlowVector Update(std::span<const FlowVector> flows);
  const FlowVector& last_nonzero() const { return last_nonzero_; }

 private:
  FlowVector last_nonzero_;
};

// Squared center distance normalized by the summed box areas, plus one minus
// the overlap of the flow-shifted track box with the detection box.
double TrackCost(const Eigen::Vector2d& predicted_center,
                 const BoundingBox& track_box, const Detection& detection);

TrackState KfInitialize(const Detection& detection,
                        const FlowVector& prior_mean_flow,
                        const Eigen::Vector4d& initial_covariance,
                        FruitId id = 0);

TrackState KfPredict(const TrackState& state, const KfModel& model);

struct Measurement {
  Vector6d z = Vector6d::Zero();
  // True when the mean flow had no usable direction and the velocity block
  // was zeroed; the caller must inflate its noise.
  bool velocity_degenerate = false;
};

Measurement BuildMeasurement(const Eigen::Vector2d& predicted_center,
                             const Eigen::Vector2d& detection_center,
                             const FlowVector& mean_flow_next,
                             const FlowVector& last_flow);

// Throws kSingularInnovation when cond(S) > 1e12.
TrackState KfUpdate(const TrackState& prior, const Vector6d& z,
                    const KfModel& model);

struct TrackingResult {
  FeatureMatchSet matches;
  int tracks_started = 0;
};

// Frame-to-frame tracking over an ordered stream. Tracks end the first frame
// they go unmatched; finished tracks with at least min_track_length points
// become feature matches.
TrackingResult RunTracking(std::span<const FrameObservation> frames,
                           const TrackerConfig& config);

}  // namespace orchard
