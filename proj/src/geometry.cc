#include "orchard/geometry.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "orchard/error.h"

namespace orchard {
namespace {

// Similarity that centers the points and scales their mean distance to sqrt 2.
Eigen::Matrix3d ConditioningTransform(std::span<const Eigen::Vector2d> pts) {
  Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
  for (const auto& p : pts) centroid += p;
  centroid /= static_cast<double>(pts.size());
  double mean_dist = 0.0;
  for (const auto& p : pts) mean_dist += (p - centroid).norm();
  mean_dist /= static_cast<double>(pts.size());
  const double s = mean_dist > 0.0 ? std::sqrt(2.0) / mean_dist : 1.0;
  Eigen::Matrix3d T;
  T << s, 0, -s * centroid.x(), 0, s, -s * centroid.y(), 0, 0, 1;
  return T;
}

std::vector<std::size_t> SampleIndices(Rng& rng, std::size_t n, std::size_t k) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + rng.Index(n - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  return idx;
}

// Smallest over largest eigenvalue of the point scatter; ~0 for coplanar sets.
double PlanarityRatio(std::span<const Correspondence2D3D> corr) {
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (const auto& c : corr) mean += c.point;
  mean /= static_cast<double>(corr.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& c : corr) {
    const Eigen::Vector3d d = c.point - mean;
    cov += d * d.transpose();
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
  const Eigen::Vector3d ev = eig.eigenvalues();
  if (!(ev(2) > 0.0)) return 0.0;
  return ev(0) / ev(2);
}

struct ProjectionJacobian {
  Eigen::Vector2d residual;
  Eigen::Matrix<double, 2, 3> d_cam;  // d pixel / d camera point
  Eigen::Vector3d cam;
};

ProjectionJacobian Linearize(const CameraIntrinsics& intr, const CameraPose& pose,
                             const Eigen::Vector3d& X, const Eigen::Vector2d& obs) {
  ProjectionJacobian j;
  j.cam = pose.Transform(X);
  const double iz = 1.0 / j.cam.z();
  j.residual << intr.fx * j.cam.x() * iz + intr.cx - obs.x(),
      intr.fy * j.cam.y() * iz + intr.cy - obs.y();
  j.d_cam << intr.fx * iz, 0.0, -intr.fx * j.cam.x() * iz * iz, 0.0,
      intr.fy * iz, -intr.fy * j.cam.y() * iz * iz;
  return j;
}

double PoseCost(const CameraPose& pose, std::span<const Correspondence2D3D> corr,
                const CameraIntrinsics& intr) {
  double cost = 0.0;
  for (const auto& c : corr) {
    const Eigen::Vector3d cam = pose.Transform(c.point);
    if (!(cam.z() > 1e-12)) return std::numeric_limits<double>::infinity();
    const Eigen::Vector2d p(intr.fx * cam.x() / cam.z() + intr.cx,
                            intr.fy * cam.y() / cam.z() + intr.cy);
    cost += (p - c.pixel).squaredNorm();
  }
  return cost;
}

}  // namespace

void RansacConfig::Validate(const std::string& prefix) const {
  auto fail = [&](const std::string& field, const std::string& why) {
    throw Error(ErrorCode::kInvalidConfig, prefix + "." + field + ": " + why);
  };
  if (max_iterations < 1) fail("max_iterations", "must be >= 1");
  if (!(inlier_threshold > 0.0)) fail("inlier_threshold", "must be positive");
  if (min_inlier_count < 1) fail("min_inlier_count", "must be >= 1");
  if (!(confidence > 0.0 && confidence < 1.0)) {
    fail("confidence", "must be in (0, 1)");
  }
}

int RansacIterations(double inlier_ratio, int sample_size, double confidence,
                     int max_iterations) {
  if (inlier_ratio >= 1.0) return 1;
  const double good = std::pow(inlier_ratio, sample_size);
  if (good <= 1e-300) return max_iterations;
  const double n = std::log(1.0 - confidence) / std::log(1.0 - good);
  if (!std::isfinite(n) || n >= max_iterations) return max_iterations;
  return std::max(1, static_cast<int>(std::ceil(n)));
}

Eigen::Matrix3d EssentialEightPoint(std::span<const Eigen::Vector2d> first,
                                    std::span<const Eigen::Vector2d> second) {
  const std::size_t n = first.size();
  const Eigen::Matrix3d T1 = ConditioningTransform(first);
  const Eigen::Matrix3d T2 = ConditioningTransform(second);
  Eigen::MatrixXd A(n, 9);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector3d a = T1 * first[i].homogeneous();
    const Eigen::Vector3d b = T2 * second[i].homogeneous();
    A.row(static_cast<Eigen::Index>(i)) << b.x() * a.x(), b.x() * a.y(), b.x(),
        b.y() * a.x(), b.y() * a.y(), b.y(), a.x(), a.y(), 1.0;
  }
  Eigen::Matrix<double, 9, 9> AtA = A.transpose() * A;
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 9, 9>> eig(AtA);
  const Eigen::Matrix<double, 9, 1> e = eig.eigenvectors().col(0);
  Eigen::Matrix3d En;
  En << e(0), e(1), e(2), e(3), e(4), e(5), e(6), e(7), e(8);
  Eigen::Matrix3d E = T2.transpose() * En * T1;
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(E, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const double s = 0.5 * (svd.singularValues()(0) + svd.singularValues()(1));
  E = svd.matrixU() * Eigen::Vector3d(s, s, 0.0).asDiagonal() *
      svd.matrixV().transpose();
  return E / E.norm();
}

double SymmetricEpipolarDistance(const Eigen::Matrix3d& E,
                                 const Eigen::Vector2d& first,
                                 const Eigen::Vector2d& second) {
  const Eigen::Vector3d x1 = first.homogeneous();
  const Eigen::Vector3d x2 = second.homogeneous();
  const Eigen::Vector3d l2 = E * x1;
  const Eigen::Vector3d l1 = E.transpose() * x2;
  const double r = x2.dot(l2);
  const double n2 = l2.head<2>().squaredNorm();
  const double n1 = l1.head<2>().squaredNorm();
  if (n1 <= 0.0 || n2 <= 0.0) return std::numeric_limits<double>::infinity();
  return std::sqrt(0.5 * r * r * (1.0 / n1 + 1.0 / n2));
}

EssentialEstimate EstimateEssentialRansac(std::span<const PointMatch> matches,
                                          const CameraIntrinsics& intrinsics,
                                          const RansacConfig& config, Rng& rng) {
  const std::size_t n = matches.size();
  if (n < 8) {
    throw Error(ErrorCode::kInsufficientMatches,
                "essential matrix needs 8 matches, got " + std::to_string(n));
  }
  std::vector<Eigen::Vector2d> a(n), b(n);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = intrinsics.Normalize(matches[i].first);
    b[i] = intrinsics.Normalize(matches[i].second);
  }
  auto score = [&](const Eigen::Matrix3d& E, std::vector<char>& mask) {
    mask.assign(n, 0);
    int count = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (SymmetricEpipolarDistance(E, a[i], b[i]) < config.inlier_threshold) {
        mask[i] = 1;
        ++count;
      }
    }
    return count;
  };

  EssentialEstimate best;
  std::vector<char> mask;
  std::vector<Eigen::Vector2d> sa(8), sb(8);
  int iterations = config.max_iterations;
  for (int it = 0; it < iterations; ++it) {
    const auto idx = SampleIndices(rng, n, 8);
    for (int k = 0; k < 8; ++k) {
      sa[k] = a[idx[k]];
      sb[k] = b[idx[k]];
    }
    const Eigen::Matrix3d E = EssentialEightPoint(sa, sb);
    if (!E.allFinite()) continue;
    const int count = score(E, mask);
    if (count > best.num_inliers) {
      best.E = E;
      best.inliers = mask;
      best.num_inliers = count;
      iterations = std::min(
          iterations,
          RansacIterations(static_cast<double>(count) / n, 8, config.confidence,
                           config.max_iterations));
    }
  }
  if (best.num_inliers >= 8) {
    // Polish on the consensus set.
    std::vector<Eigen::Vector2d> ia, ib;
    for (std::size_t i = 0; i < n; ++i) {
      if (best.inliers[i]) {
        ia.push_back(a[i]);
        ib.push_back(b[i]);
      }
    }
    const Eigen::Matrix3d E = EssentialEightPoint(ia, ib);
    const int count = E.allFinite() ? score(E, mask) : 0;
    if (count >= best.num_inliers) {
      best.E = E;
      best.inliers = mask;
      best.num_inliers = count;
    }
  }
  if (best.num_inliers < std::max(8, config.min_inlier_count)) {
    throw Error(ErrorCode::kDegenerateConfiguration,
                "essential matrix consensus too small (" +
                    std::to_string(best.num_inliers) + " inliers)");
  }
  return best;
}

Eigen::Vector4d TriangulateLinear(std::span<const ViewObservation> views,
                                  const CameraIntrinsics& intrinsics) {
  const std::size_t n = views.size();
  Eigen::MatrixXd A(2 * n, 4);
  for (std::size_t i = 0; i < n; ++i) {
    Eigen::Matrix<double, 3, 4> P;
    P.leftCols<3>() = views[i].pose.rotation();
    P.col(3) = views[i].pose.translation();
    const Eigen::Vector2d x = intrinsics.Normalize(views[i].pixel);
    A.row(static_cast<Eigen::Index>(2 * i)) = x.x() * P.row(2) - P.row(0);
    A.row(static_cast<Eigen::Index>(2 * i + 1)) = x.y() * P.row(2) - P.row(1);
  }
  const Eigen::Matrix4d AtA = A.transpose() * A;
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> eig(AtA);
  return eig.eigenvectors().col(0);
}

double MaxTriangulationAngle(std::span<const ViewObservation> views,
                             const Eigen::Vector3d& point) {
  std::vector<Eigen::Vector3d> rays;
  rays.reserve(views.size());
  for (const auto& v : views) {
    const Eigen::Vector3d r = point - v.pose.Center();
    const double len = r.norm();
    if (len > 0.0) rays.push_back(r / len);
  }
  double best = 0.0;
  for (std::size_t i = 0; i < rays.size(); ++i) {
    for (std::size_t j = i + 1; j < rays.size(); ++j) {
      const double angle =
          std::atan2(rays[i].cross(rays[j]).norm(), rays[i].dot(rays[j]));
      best = std::max(best, angle);
    }
  }
  return best;
}

Eigen::Vector3d Triangulate(std::span<const ViewObservation> views,
                            const CameraIntrinsics& intrinsics,
                            double min_angle_deg) {
  if (views.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "triangulation needs two views");
  }
  const Eigen::Vector4d h = TriangulateLinear(views, intrinsics);
  if (!(std::abs(h.w()) > 1e-14 * h.head<3>().norm())) {
    throw Error(ErrorCode::kIllConditioned, "triangulated point at infinity");
  }
  Eigen::Vector3d X = h.head<3>() / h.w();
  const double min_angle = min_angle_deg * std::numbers::pi / 180.0;
  if (!(MaxTriangulationAngle(views, X) >= min_angle)) {
    throw Error(ErrorCode::kIllConditioned, "triangulation angle too small");
  }
  for (const auto& v : views) {
    if (!(CameraDepth(v.pose, X) > 0.0)) {
      throw Error(ErrorCode::kNegativeDepth, "point behind an observing camera");
    }
  }
  // One Gauss-Newton step on the reprojection error.
  Eigen::Matrix3d JtJ = Eigen::Matrix3d::Zero();
  Eigen::Vector3d Jtr = Eigen::Vector3d::Zero();
  double cost = 0.0;
  for (const auto& v : views) {
    const ProjectionJacobian lin = Linearize(intrinsics, v.pose, X, v.pixel);
    const Eigen::Matrix<double, 2, 3> J = lin.d_cam * v.pose.rotation();
    JtJ += J.transpose() * J;
    Jtr += J.transpose() * lin.residual;
    cost += lin.residual.squaredNorm();
  }
  const Eigen::LDLT<Eigen::Matrix3d> ldlt(JtJ);
  if (ldlt.info() == Eigen::Success) {
    const Eigen::Vector3d step = -ldlt.solve(Jtr);
    const Eigen::Vector3d candidate = X + step;
    double new_cost = 0.0;
    bool valid = step.allFinite();
    for (const auto& v : views) {
      if (!valid) break;
      const Eigen::Vector3d cam = v.pose.Transform(candidate);
      if (!(cam.z() > 0.0)) {
        valid = false;
        break;
      }
      new_cost += ReprojectionError(
          Eigen::Vector2d(intrinsics.fx * cam.x() / cam.z() + intrinsics.cx,
                          intrinsics.fy * cam.y() / cam.z() + intrinsics.cy),
          v.pixel);
    }
    if (valid && new_cost <= cost) X = candidate;
  }
  return X;
}

RelativePose RecoverRelativePose(const Eigen::Matrix3d& E,
                                 std::span<const Eigen::Vector2d> first,
                                 std::span<const Eigen::Vector2d> second) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(E, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d U = svd.matrixU();
  Eigen::Matrix3d V = svd.matrixV();
  if (U.determinant() < 0.0) U = -U;
  if (V.determinant() < 0.0) V = -V;
  Eigen::Matrix3d W;
  W << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  const Eigen::Matrix3d R1 = U * W * V.transpose();
  const Eigen::Matrix3d R2 = U * W.transpose() * V.transpose();
  const Eigen::Vector3d t = U.col(2).normalized();

  // Unit intrinsics: the inputs are already normalized.
  const CameraIntrinsics unit{1.0, 1.0, 0.0, 0.0};
  const std::size_t n = first.size();
  RelativePose best;
  best.num_in_front = -1;
  for (const auto& [R, sign] :
       {std::pair{R1, 1.0}, std::pair{R1, -1.0}, std::pair{R2, 1.0},
        std::pair{R2, -1.0}}) {
    const CameraPose second_pose = CameraPose::FromApproximateRotation(R, sign * t);
    RelativePose cand{second_pose, std::vector<char>(n, 0), 0};
    for (std::size_t i = 0; i < n; ++i) {
      const ViewObservation views[2] = {{CameraPose::Identity(), first[i]},
                                        {second_pose, second[i]}};
      const Eigen::Vector4d h = TriangulateLinear(views, unit);
      if (!(std::abs(h.w()) > 1e-14 * h.head<3>().norm())) continue;
      const Eigen::Vector3d X = h.head<3>() / h.w();
      if (X.z() > 0.0 && CameraDepth(second_pose, X) > 0.0) {
        cand.in_front[i] = 1;
        ++cand.num_in_front;
      }
    }
    if (cand.num_in_front > best.num_in_front) best = std::move(cand);
  }
  if (2 * best.num_in_front <= static_cast<int>(n)) {
    throw Error(ErrorCode::kCheiralityFailure,
                "no essential decomposition puts a majority of points in front");
  }
  return best;
}

CameraPose PoseDlt(std::span<const Correspondence2D3D> corr,
                   const CameraIntrinsics& intrinsics) {
  const std::size_t n = corr.size();
  if (n < 6) {
    throw Error(ErrorCode::kInsufficientMatches, "DLT pose needs 6 points");
  }
  if (PlanarityRatio(corr) < 1e-8) {
    throw Error(ErrorCode::kDegenerateConfiguration, "coplanar 3D points");
  }
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (const auto& c : corr) centroid += c.point;
  centroid /= static_cast<double>(n);
  double mean_dist = 0.0;
  for (const auto& c : corr) mean_dist += (c.point - centroid).norm();
  mean_dist /= static_cast<double>(n);
  const double s = std::sqrt(3.0) / mean_dist;

  Eigen::MatrixXd A(2 * n, 12);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector4d X = (s * (corr[i].point - centroid)).homogeneous();
    const Eigen::Vector2d x = intrinsics.Normalize(corr[i].pixel);
    const auto r0 = static_cast<Eigen::Index>(2 * i);
    A.row(r0) << X.transpose(), Eigen::RowVector4d::Zero(), -x.x() * X.transpose();
    A.row(r0 + 1) << Eigen::RowVector4d::Zero(), X.transpose(), -x.y() * X.transpose();
  }
  const Eigen::Matrix<double, 12, 12> AtA = A.transpose() * A;
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 12, 12>> eig(AtA);
  const Eigen::Matrix<double, 12, 1> p = eig.eigenvectors().col(0);
  Eigen::Matrix<double, 3, 4> Pn;
  Pn.row(0) = p.segment<4>(0).transpose();
  Pn.row(1) = p.segment<4>(4).transpose();
  Pn.row(2) = p.segment<4>(8).transpose();
  // Undo the 3D conditioning: P = Pn * [s I, -s c; 0 1].
  Eigen::Matrix4d T = Eigen::Matrix4d::Identity();
  T.topLeftCorner<3, 3>() *= s;
  T.topRightCorner<3, 1>() = -s * centroid;
  Eigen::Matrix<double, 3, 4> P = Pn * T;
  if (P.leftCols<3>().determinant() < 0.0) P = -P;
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(P.leftCols<3>(),
                                        Eigen::ComputeFullU | Eigen::ComputeFullV);
  const double scale = svd.singularValues().mean();
  if (!(scale > 0.0)) {
    throw Error(ErrorCode::kDegenerateConfiguration, "degenerate DLT solution");
  }
  const Eigen::Matrix3d R = svd.matrixU() * svd.matrixV().transpose();
  const Eigen::Vector3d t = P.col(3) / scale;
  return CameraPose::FromApproximateRotation(R, t);
}

CameraPose RefinePose(const CameraPose& initial,
                      std::span<const Correspondence2D3D> corr,
                      const CameraIntrinsics& intrinsics, int max_iterations) {
  CameraPose pose = initial;
  double cost = PoseCost(pose, corr, intrinsics);
  if (!std::isfinite(cost)) return pose;
  double mu = -1.0;
  for (int it = 0; it < max_iterations; ++it) {
    Eigen::Matrix<double, 6, 6> JtJ = Eigen::Matrix<double, 6, 6>::Zero();
    Eigen::Matrix<double, 6, 1> Jtr = Eigen::Matrix<double, 6, 1>::Zero();
    for (const auto& c : corr) {
      const ProjectionJacobian lin = Linearize(intrinsics, pose, c.point, c.pixel);
      Eigen::Matrix<double, 3, 6> d_cam_d_pose;
      d_cam_d_pose.leftCols<3>() = -Skew(pose.rotation() * c.point);
      d_cam_d_pose.rightCols<3>().setIdentity();
      const Eigen::Matrix<double, 2, 6> J = lin.d_cam * d_cam_d_pose;
      JtJ += J.transpose() * J;
      Jtr += J.transpose() * lin.residual;
    }
    if (mu < 0.0) mu = 1e-3 * JtJ.diagonal().maxCoeff();
    bool improved = false;
    for (int attempt = 0; attempt < 10 && !improved; ++attempt) {
      Eigen::Matrix<double, 6, 6> Hd = JtJ;
      Hd.diagonal().array() += mu;
      const Eigen::Matrix<double, 6, 1> step = -Hd.ldlt().solve(Jtr);
      if (!step.allFinite()) break;
      const Eigen::Matrix3d R =
          RotationFromAxisAngle(step.head<3>()) * pose.rotation();
      const CameraPose candidate = CameraPose::FromApproximateRotation(
          R, pose.translation() + step.tail<3>());
      const double new_cost = PoseCost(candidate, corr, intrinsics);
      if (new_cost < cost) {
        const double rel = (cost - new_cost) / std::max(cost, 1e-300);
        pose = candidate;
        cost = new_cost;
        mu /= 3.0;
        improved = true;
        if (rel < 1e-12) return pose;
      } else {
        mu *= 2.0;
      }
    }
    if (!improved || cost < 1e-24) break;
  }
  return pose;
}

PnpEstimate PnpRansac(std::span<const Correspondence2D3D> corr,
                      const CameraIntrinsics& intrinsics,
                      const RansacConfig& config, Rng& rng) {
  const std::size_t n = corr.size();
  if (n < 6) {
    throw Error(ErrorCode::kInsufficientMatches,
                "PnP needs 6 correspondences, got " + std::to_string(n));
  }
  const double thr2 = config.inlier_threshold * config.inlier_threshold;
  auto score = [&](const CameraPose& pose, std::vector<char>& mask) {
    mask.assign(n, 0);
    int count = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const Eigen::Vector3d cam = pose.Transform(corr[i].point);
      if (!(cam.z() > 1e-12)) continue;
      const Eigen::Vector2d p(intrinsics.fx * cam.x() / cam.z() + intrinsics.cx,
                              intrinsics.fy * cam.y() / cam.z() + intrinsics.cy);
      if ((p - corr[i].pixel).squaredNorm() < thr2) {
        mask[i] = 1;
        ++count;
      }
    }
    return count;
  };

  PnpEstimate best;
  std::vector<char> mask;
  std::vector<Correspondence2D3D> sample(6);
  int iterations = config.max_iterations;
  for (int it = 0; it < iterations; ++it) {
    const auto idx = SampleIndices(rng, n, 6);
    for (int k = 0; k < 6; ++k) sample[k] = corr[idx[k]];
    if (PlanarityRatio(sample) < 1e-4) continue;  // resample
    CameraPose pose;
    try {
      // The linear solution is projective; snapping it to the nearest rigid
      // pose on the sample keeps near-planar crowns usable.
      pose = RefinePose(PoseDlt(sample, intrinsics), sample, intrinsics, 10);
    } catch (const Error&) {
      continue;
    }
    const int count = score(pose, mask);
    if (count > best.num_inliers) {
      best.pose = pose;
      best.inliers = mask;
      best.num_inliers = count;
      iterations = std::min(
          iterations,
          RansacIterations(static_cast<double>(count) / n, 6, config.confidence,
                           config.max_iterations));
    }
  }
  if (best.num_inliers < std::max(6, config.min_inlier_count)) {
    throw Error(ErrorCode::kDegenerateConfiguration,
                "PnP consensus too small (" + std::to_string(best.num_inliers) +
                    " inliers)");
  }

  // Refit on the consensus set, then polish nonlinearly.
  for (int round = 0; round < 2; ++round) {
    std::vector<Correspondence2D3D> inliers;
    for (std::size_t i = 0; i < n; ++i) {
      if (best.inliers[i]) inliers.push_back(corr[i]);
    }
    CameraPose start = best.pose;
    if (round == 0) {
      try {
        const CameraPose linear = PoseDlt(inliers, intrinsics);
        if (PoseCost(linear, inliers, intrinsics) <
            PoseCost(start, inliers, intrinsics)) {
          start = linear;
        }
      } catch (const Error&) {
      }
    }
    const CameraPose refined = RefinePose(start, inliers, intrinsics);
    const int count = score(refined, mask);
    if (count >= best.num_inliers || round == 0) {
      best.pose = refined;
      best.inliers = mask;
      best.num_inliers = count;
    }
  }
  if (best.num_inliers < std::max(6, config.min_inlier_count)) {
    throw Error(ErrorCode::kDegenerateConfiguration,
                "PnP refinement lost the consensus set");
  }
  return best;
}

}  // namespace orchard
