#include "orchard/core_model.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Geometry>
#include <Eigen/SVD>

#include "orchard/error.h"

namespace orchard {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNonPositiveDepth: return "NonPositiveDepth";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kFrameOutOfRange: return "FrameOutOfRange";
    case ErrorCode::kSingularInnovation: return "SingularInnovation";
    case ErrorCode::kInsufficientMatches: return "InsufficientMatches";
    case ErrorCode::kDegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::kNoValidPair: return "NoValidPair";
    case ErrorCode::kCheiralityFailure: return "CheiralityFailure";
    case ErrorCode::kNegativeDepth: return "NegativeDepth";
    case ErrorCode::kIllConditioned: return "IllConditioned";
    case ErrorCode::kReconstructionTooSparse: return "ReconstructionTooSparse";
    case ErrorCode::kMissingPose: return "MissingPose";
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kEmptyProfile: return "EmptyProfile";
    case ErrorCode::kNoOverlappingFrames: return "NoOverlappingFrames";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kDegenerateInput: return "DegenerateInput";
    case ErrorCode::kParseError: return "ParseError";
  }
  return "Unknown";
}

void CameraIntrinsics::Validate() const {
  if (!(fx > 0.0) || !(fy > 0.0) || !std::isfinite(fx) || !std::isfinite(fy)) {
    throw Error(ErrorCode::kInvalidArgument, "focal lengths must be positive");
  }
  if (!std::isfinite(cx) || !std::isfinite(cy)) {
    throw Error(ErrorCode::kInvalidArgument, "principal point must be finite");
  }
}

Eigen::Matrix3d CameraIntrinsics::K() const {
  Eigen::Matrix3d k = Eigen::Matrix3d::Identity();
  k(0, 0) = fx;
  k(1, 1) = fy;
  k(0, 2) = cx;
  k(1, 2) = cy;
  return k;
}

Eigen::Vector2d CameraIntrinsics::Normalize(const Eigen::Vector2d& pixel) const {
  return {(pixel.x() - cx) / fx, (pixel.y() - cy) / fy};
}

Eigen::Vector2d CameraIntrinsics::Denormalize(
    const Eigen::Vector2d& normalized) const {
  return {fx * normalized.x() + cx, fy * normalized.y() + cy};
}

CameraPose::CameraPose()
    : rotation_(Eigen::Matrix3d::Identity()),
      translation_(Eigen::Vector3d::Zero()) {}

CameraPose::CameraPose(const Eigen::Matrix3d& rotation,
                       const Eigen::Vector3d& translation)
    : rotation_(rotation), translation_(translation) {
  const double ortho_error =
      (rotation.transpose() * rotation - Eigen::Matrix3d::Identity())
          .cwiseAbs()
          .maxCoeff();
  if (!(ortho_error < 1e-9) || !(rotation.determinant() > 0.0)) {
    std::ostringstream msg;
    msg << "rotation is not in SO(3) (orthonormality error " << ortho_error
        << ")";
    throw Error(ErrorCode::kInvalidArgument, msg.str());
  }
  if (!translation.allFinite()) {
    throw Error(ErrorCode::kInvalidArgument, "translation must be finite");
  }
}

CameraPose CameraPose::FromApproximateRotation(
    const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(
      rotation, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d r = svd.matrixU() * svd.matrixV().transpose();
  if (r.determinant() < 0.0) {
    Eigen::Matrix3d u = svd.matrixU();
    u.col(2) *= -1.0;
    r = u * svd.matrixV().transpose();
  }
  return CameraPose(r, translation);
}

BoundingBox::BoundingBox(const Eigen::Vector2d& center, double width,
                         double height)
    : center_(center), width_(width), height_(height) {
  if (!(width > 0.0) || !(height > 0.0) || !std::isfinite(width) ||
      !std::isfinite(height)) {
    throw Error(ErrorCode::kInvalidArgument,
                "bounding box width and height must be positive");
  }
  if (!center.allFinite()) {
    throw Error(ErrorCode::kInvalidArgument, "bounding box center not finite");
  }
}

BoundingBox BoundingBox::Square(const Eigen::Vector2d& center, double area) {
  const double side = std::sqrt(area);
  return BoundingBox(center, side, side);
}

void FrameObservation::Validate() const {
  if (flows && flows->size() != detections.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "flow list is not index-aligned with detections in frame " +
                    std::to_string(frame));
  }
}

int Landmark::AgeUpTo(FrameIndex frame) const {
  return static_cast<int>(std::distance(observed_frames.begin(),
                                        observed_frames.upper_bound(frame)));
}

std::optional<FrameIndex> Landmark::LastObservedFrame() const {
  if (observed_frames.empty()) return std::nullopt;
  return *observed_frames.rbegin();
}

void FeatureMatchSet::Validate(int min_points) const {
  std::map<FruitId, int> counts;
  for (const FruitTrack& track : tracks) {
    if (track.points.empty()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "empty track for fruit " + std::to_string(track.fruit_id));
    }
    for (std::size_t i = 1; i < track.points.size(); ++i) {
      if (track.points[i].frame != track.points[i - 1].frame + 1) {
        throw Error(ErrorCode::kInvalidArgument,
                    "non-consecutive frames in track for fruit " +
                        std::to_string(track.fruit_id));
      }
    }
    counts[track.fruit_id] += static_cast<int>(track.points.size());
  }
  for (const auto& [id, n] : counts) {
    if (n < min_points) {
      throw Error(ErrorCode::kInvalidArgument,
                  "fruit " + std::to_string(id) + " has only " +
                      std::to_string(n) + " points");
    }
  }
}

std::set<FruitId> FeatureMatchSet::FruitIds() const {
  std::set<FruitId> ids;
  for (const FruitTrack& track : tracks) ids.insert(track.fruit_id);
  return ids;
}

std::set<FrameIndex> FeatureMatchSet::Frames() const {
  std::set<FrameIndex> frames;
  for (const FruitTrack& track : tracks) {
    for (const TrackPoint& p : track.points) frames.insert(p.frame);
  }
  return frames;
}

std::size_t FeatureMatchSet::NumPoints() const {
  std::size_t n = 0;
  for (const FruitTrack& track : tracks) n += track.points.size();
  return n;
}

Eigen::Vector2d Project(const CameraIntrinsics& intrinsics,
                        const CameraPose& pose, const Eigen::Vector3d& point) {
  const Eigen::Vector3d cam = pose.Transform(point);
  if (!(cam.z() > 1e-12)) {
    throw Error(ErrorCode::kNonPositiveDepth,
                "point is behind or on the camera plane");
  }
  return {intrinsics.fx * cam.x() / cam.z() + intrinsics.cx,
          intrinsics.fy * cam.y() / cam.z() + intrinsics.cy};
}

double ReprojectionError(const Eigen::Vector2d& projected,
                         const Eigen::Vector2d& observed) {
  return (projected - observed).squaredNorm();
}

double CameraDepth(const CameraPose& pose, const Eigen::Vector3d& point) {
  return pose.rotation().row(2).dot(point) + pose.translation().z();
}

double BoxOverlap(const BoundingBox& a, const BoundingBox& b) {
  const double a_u0 = a.center().x() - 0.5 * a.height();
  const double a_u1 = a.center().x() + 0.5 * a.height();
  const double a_v0 = a.center().y() - 0.5 * a.width();
  const double a_v1 = a.center().y() + 0.5 * a.width();
  const double b_u0 = b.center().x() - 0.5 * b.height();
  const double b_u1 = b.center().x() + 0.5 * b.height();
  const double b_v0 = b.center().y() - 0.5 * b.width();
  const double b_v1 = b.center().y() + 0.5 * b.width();
  const double du = std::min(a_u1, b_u1) - std::max(a_u0, b_u0);
  const double dv = std::min(a_v1, b_v1) - std::max(a_v0, b_v0);
  if (du <= 0.0 || dv <= 0.0) return 0.0;
  const double inter = du * dv;
  // Sum in a fixed order so that overlap(a, b) == overlap(b, a) bitwise.
  const double area_sum =
      std::min(a.area(), b.area()) + std::max(a.area(), b.area());
  return std::clamp(inter / (area_sum - inter), 0.0, 1.0);
}

Eigen::Matrix3d Skew(const Eigen::Vector3d& w) {
  Eigen::Matrix3d s;
  s << 0.0, -w.z(), w.y(), w.z(), 0.0, -w.x(), -w.y(), w.x(), 0.0;
  return s;
}

Eigen::Matrix3d RotationFromAxisAngle(const Eigen::Vector3d& w) {
  const double angle = w.norm();
  if (angle < 1e-300) return Eigen::Matrix3d::Identity();
  return Eigen::AngleAxisd(angle, w / angle).toRotationMatrix();
}

double RotationAngle(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b) {
  const Eigen::Matrix3d rel = a.transpose() * b;
  return Eigen::AngleAxisd(rel).angle();
}

}  // namespace orchard
