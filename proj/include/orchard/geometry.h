#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "orchard/core_model.h"
#include "orchard/random.h"

namespace orchard {

struct RansacConfig {
  int max_iterations = 1000;
  // Reprojection distance in pixels for PnP, symmetric epipolar distance in
  // normalized image units for the essential matrix.
  double inlier_threshold = 2.0;
  int min_inlier_count = 15;
  double confidence = 0.999;

  void Validate(const std::string& prefix) const;
};

struct PointMatch {
  Eigen::Vector2d first;   // pixel in the first image
  Eigen::Vector2d second;  // pixel in the second image
};

struct EssentialEstimate {
  Eigen::Matrix3d E = Eigen::Matrix3d::Zero();
  std::vector<char> inliers;
  int num_inliers = 0;
};

// Normalized 8-point estimate (Hartley conditioning) with the singular values
// projected to (s, s, 0). Inputs are normalized image coordinates.
Eigen::Matrix3d EssentialEightPoint(std::span<const Eigen::Vector2d> first,
                                    std::span<const Eigen::Vector2d> second);

// Root mean square of the two point-to-epipolar-line distances.
double SymmetricEpipolarDistance(const Eigen::Matrix3d& E,
                                 const Eigen::Vector2d& first,
                                 const Eigen::Vector2d& second);

// Throws kInsufficientMatches (< 8) or kDegenerateConfiguration.
EssentialEstimate EstimateEssentialRansac(std::span<const PointMatch> matches,
                                          const CameraIntrinsics& intrinsics,
                                          const RansacConfig& config, Rng& rng);

struct RelativePose {
  CameraPose pose;  // second camera; the first is the identity
  std::vector<char> in_front;
  int num_in_front = 0;
};

// Picks the decomposition of E that places most points in front of both
// cameras. Inputs are normalized coordinates. Throws kCheiralityFailure when
// no candidate reaches a strict majority.
RelativePose RecoverRelativePose(const Eigen::Matrix3d& E,
                                 std::span<const Eigen::Vector2d> first,
                                 std::span<const Eigen::Vector2d> second);

struct ViewObservation {
  CameraPose pose;
  Eigen::Vector2d pixel;
};

// Linear (DLT) triangulation on normalized coordinates. Returns a point
// possibly at infinity; no validation.
Eigen::Vector4d TriangulateLinear(std::span<const ViewObservation> views,
                                  const CameraIntrinsics& intrinsics);

// Largest angle (radians) between viewing rays to `point`.
double MaxTriangulationAngle(std::span<const ViewObservation> views,
                             const Eigen::Vector3d& point);

// DLT followed by a Gauss-Newton refinement of the reprojection error. Throws
// kIllConditioned below `min_angle_deg` and kNegativeDepth when the result is
// not in front of every camera.
Eigen::Vector3d Triangulate(std::span<const ViewObservation> views,
                            const CameraIntrinsics& intrinsics,
                            double min_angle_deg = 0.5);

struct Correspondence2D3D {
  Eigen::Vector3d point;
  Eigen::Vector2d pixel;
};

struct PnpEstimate {
  CameraPose pose;
  std::vector<char> inliers;
  int num_inliers = 0;
};

// Linear pose from >= 6 correspondences; throws kDegenerateConfiguration for
// (near) coplanar inputs.
CameraPose PoseDlt(std::span<const Correspondence2D3D> corr,
                   const CameraIntrinsics& intrinsics);

// Levenberg-Marquardt on the squared reprojection error of all inputs.
CameraPose RefinePose(const CameraPose& initial,
                      std::span<const Correspondence2D3D> corr,
                      const CameraIntrinsics& intrinsics, int max_iterations = 30);

// Throws kInsufficientMatches (< 6) or kDegenerateConfiguration.
PnpEstimate PnpRansac(std::span<const Correspondence2D3D> corr,
                      const CameraIntrinsics& intrinsics,
                      const RansacConfig& config, Rng& rng);

// Number of RANSAC iterations needed for `confidence` at the given inlier
// ratio and sample size, capped at max_iterations.
int RansacIterations(double inlier_ratio, int sample_size, double confidence,
                     int max_iterations);

}  // namespace orchard
