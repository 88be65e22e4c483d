#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include <Eigen/Core>

namespace orchard {

// Pixel coordinates are (u, v) = (row, column) everywhere in this library.
// Camera extrinsics map world points into the camera as x_cam = R * X + T.

using FrameIndex = int;
using FruitId = std::int64_t;
using TrunkId = int;

struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;

  // Throws kInvalidArgument unless fx, fy > 0 and cx, cy are finite.
  void Validate() const;

  Eigen::Matrix3d K() const;
  // Pixel -> normalized image plane coordinates (z = 1).
  Eigen::Vector2d Normalize(const Eigen::Vector2d& pixel) const;
  Eigen::Vector2d Denormalize(const Eigen::Vector2d& normalized) const;
};

struct ImageSize {
  int rows = 0;  // extent along u
  int cols = 0;  // extent along v

  bool Contains(const Eigen::Vector2d& pixel) const {
    return pixel.x() >= 0.0 && pixel.x() < rows && pixel.y() >= 0.0 &&
           pixel.y() < cols;
  }
};

class CameraPose {
 public:
  CameraPose();
  // Rejects rotations with ||R^T R - I||_inf >= 1e-9 or det(R) <= 0.
  CameraPose(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation);

  static CameraPose Identity() { return CameraPose(); }
  // Builds a pose from a rotation that is only approximately orthonormal by
  // projecting onto SO(3) first.
  static CameraPose FromApproximateRotation(const Eigen::Matrix3d& rotation,
                                            const Eigen::Vector3d& translation);

  const Eigen::Matrix3d& rotation() const { return rotation_; }
  const Eigen::Vector3d& translation() const { return translation_; }

  Eigen::Vector3d Transform(const Eigen::Vector3d& world) const {
    return rotation_ * world + translation_;
  }
  Eigen::Vector3d Center() const { return -rotation_.transpose() * translation_; }
  // Unit optical axis expressed in the world frame.
  Eigen::Vector3d ForwardAxis() const { return rotation_.row(2).transpose(); }

 private:
  Eigen::Matrix3d rotation_;
  Eigen::Vector3d translation_;
};

class BoundingBox {
 public:
  BoundingBox() = default;
  // Throws kInvalidArgument for non-positive width or height.
  BoundingBox(const Eigen::Vector2d& center, double width, double height);
  // Square box with the given area, centered at `center`.
  static BoundingBox Square(const Eigen::Vector2d& center, double area);

  const Eigen::Vector2d& center() const { return center_; }
  // Extent along v (columns).
  double width() const { return width_; }
  // Extent along u (rows).
  double height() const { return height_; }
  double area() const { return width_ * height_; }

  BoundingBox Shifted(const Eigen::Vector2d& offset) const {
    return BoundingBox(center_ + offset, width_, height_);
  }

 private:
  Eigen::Vector2d center_ = Eigen::Vector2d::Zero();
  double width_ = 1.0;
  double height_ = 1.0;
};

struct Detection {
  FrameIndex frame = 0;
  BoundingBox box;
  double score = 1.0;

  const Eigen::Vector2d& center() const { return box.center(); }
};

struct FlowVector {
  double du = 0.0;
  double dv = 0.0;

  Eigen::Vector2d vec() const { return {du, dv}; }
  double norm() const { return vec().norm(); }
};

struct TrunkCorner {
  TrunkId trunk = 0;
  Eigen::Vector2d position = Eigen::Vector2d::Zero();
  // Displacement to the next frame, when the provider reports one.
  std::optional<FlowVector> flow;
};

struct FrameObservation {
  FrameIndex frame = 0;
  std::vector<Detection> detections;
  // Index-aligned with detections when present.
  std::optional<std::vector<FlowVector>> flows;
  std::optional<std::vector<TrunkCorner>> trunk_corners;

  // Throws kInvalidArgument when flows are present but not index-aligned.
  void Validate() const;
};

struct Landmark {
  FruitId id = 0;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  double last_box_area = 0.0;
  // Frames in which the landmark was observed.
  std::set<FrameIndex> observed_frames;
  std::map<FrameIndex, double> depth_by_frame;

  int Age() const { return static_cast<int>(observed_frames.size()); }
  int AgeUpTo(FrameIndex frame) const;
  std::optional<FrameIndex> LastObservedFrame() const;
};

struct TrackPoint {
  FrameIndex frame = 0;
  // Filtered (or refined) position used as the feature observation.
  Eigen::Vector2d position = Eigen::Vector2d::Zero();
  // Raw detector box center this point was associated with.
  Eigen::Vector2d detection_center = Eigen::Vector2d::Zero();
  double box_area = 0.0;
};

struct FruitTrack {
  // Several tracks may share a fruit id after re-association; each track is
  // still a consecutive run of frames.
  FruitId fruit_id = 0;
  std::vector<TrackPoint> points;

  FrameIndex first_frame() const { return points.front().frame; }
  FrameIndex last_frame() const { return points.back().frame; }
};

struct FeatureMatchSet {
  std::vector<FruitTrack> tracks;

  // Checks consecutive, strictly increasing frames within each track and that
  // every fruit id accumulates at least `min_points` points.
  void Validate(int min_points) const;
  std::set<FruitId> FruitIds() const;
  std::set<FrameIndex> Frames() const;
  std::size_t NumPoints() const;
};

// Projects a world point with the pinhole model. Throws kNonPositiveDepth when
// the camera-frame depth is <= 1e-12.
Eigen::Vector2d Project(const CameraIntrinsics& intrinsics,
                        const CameraPose& pose, const Eigen::Vector3d& point);

// Squared pixel distance.
double ReprojectionError(const Eigen::Vector2d& projected,
                         const Eigen::Vector2d& observed);

// Third component of R * X + T. May be <= 0.
double CameraDepth(const CameraPose& pose, const Eigen::Vector3d& point);

// Intersection over union of two axis-aligned boxes.
double BoxOverlap(const BoundingBox& a, const BoundingBox& b);

// Hat operator and the exponential map used by the pose parameterization.
Eigen::Matrix3d Skew(const Eigen::Vector3d& w);
Eigen::Matrix3d RotationFromAxisAngle(const Eigen::Vector3d& w);
double RotationAngle(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b);

}  // namespace orchard
