#pragma once

#include <optional>
#include <set>
#include <vector>

#include <Eigen/Core>

#include "orchard/core_model.h"
#include "orchard/reconstruction.h"

namespace orchard {

using Vector6d = Eigen::Matrix<double, 6, 1>;

// Poses are perturbed on the left: R <- exp([dw]x) R, T <- T + dt, with the
// increment ordered (dw, dt).
CameraPose ApplyPoseIncrement(const CameraPose& pose, const Vector6d& delta);

struct ResidualJacobian {
  // Projection minus observation, in pixels.
  Eigen::Vector2d residual;
  Eigen::Matrix<double, 2, 6> d_pose;
  Eigen::Matrix<double, 2, 3> d_point;
};

ResidualJacobian ReprojectionJacobian(const CameraIntrinsics& intrinsics,
                                      const CameraPose& pose,
                                      const Eigen::Vector3d& point,
                                      const Eigen::Vector2d& observed);

struct BaOptions {
  int max_iterations = 100;
  double relative_tolerance = 1e-8;
  std::set<FrameIndex> fixed_frames;
  // Optimized poses; all poses when unset. Fixed frames are never moved.
  std::optional<std::set<FrameIndex>> active_frames;
  // Optimized landmarks; all landmarks when unset.
  std::optional<std::set<FruitId>> active_landmarks;
};

enum class BaStatus { kConverged, kMaxIterations, kStalled };

struct BaSummary {
  double initial_cost = 0.0;
  double final_cost = 0.0;
  int iterations = 0;
  BaStatus status = BaStatus::kConverged;
  // Cost after each accepted step, starting with the initial cost.
  std::vector<double> cost_history;
  // Cost of every evaluated trial step, accepted or not.
  std::vector<double> trial_costs;
};

// Levenberg-Marquardt over the selected poses and landmarks. Residuals are all
// observations touching a free variable. The landmark blocks are eliminated
// with a Schur complement and the reduced camera system is solved sparsely.
// Never throws on non-convergence; the best iterate is kept.
BaSummary BundleAdjust(Reconstruction& rec, const BaOptions& options);

}  // namespace orchard
