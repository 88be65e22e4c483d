#include "orchard/bundle_adjustment.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include <Eigen/Cholesky>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

namespace orchard {

CameraPose ApplyPoseIncrement(const CameraPose& pose, const Vector6d& delta) {
  return CameraPose::FromApproximateRotation(
      RotationFromAxisAngle(delta.head<3>()) * pose.rotation(),
      pose.translation() + delta.tail<3>());
}

ResidualJacobian ReprojectionJacobian(const CameraIntrinsics& intrinsics,
                                      const CameraPose& pose,
                                      const Eigen::Vector3d& point,
                                      const Eigen::Vector2d& observed) {
  const Eigen::Vector3d rotated = pose.rotation() * point;
  const Eigen::Vector3d cam = rotated + pose.translation();
  const double iz = 1.0 / cam.z();
  ResidualJacobian out;
  out.residual << intrinsics.fx * cam.x() * iz + intrinsics.cx - observed.x(),
      intrinsics.fy * cam.y() * iz + intrinsics.cy - observed.y();
  Eigen::Matrix<double, 2, 3> d_cam;
  d_cam << intrinsics.fx * iz, 0.0, -intrinsics.fx * cam.x() * iz * iz, 0.0,
      intrinsics.fy * iz, -intrinsics.fy * cam.y() * iz * iz;
  out.d_pose.leftCols<3>() = -d_cam * Skew(rotated);
  out.d_pose.rightCols<3>() = d_cam;
  out.d_point = d_cam * pose.rotation();
  return out;
}

namespace {

using Matrix6d = Eigen::Matrix<double, 6, 6>;
using Matrix63d = Eigen::Matrix<double, 6, 3>;

struct Residual {
  int pose = -1;   // index into free poses, -1 when fixed
  int point = -1;  // index into free points, -1 when fixed
  FrameIndex frame = 0;
  FruitId landmark = 0;
  Eigen::Vector2d observed;
};

class Problem {
 public:
  Problem(Reconstruction& rec, const BaOptions& options) : rec_(rec) {
    for (const auto& [frame, pose] : rec.poses) {
      if (options.fixed_frames.count(frame)) continue;
      if (options.active_frames && !options.active_frames->count(frame)) continue;
      pose_index_[frame] = static_cast<int>(pose_frames_.size());
      pose_frames_.push_back(frame);
    }
    for (const auto& [id, lm] : rec.landmarks) {
      if (options.active_landmarks && !options.active_landmarks->count(id)) continue;
      point_index_[id] = static_cast<int>(point_ids_.size());
      point_ids_.push_back(id);
    }
    for (const Observation& obs : rec.observations) {
      if (!rec.poses.count(obs.frame) || !rec.landmarks.count(obs.landmark)) continue;
      Residual r;
      r.frame = obs.frame;
      r.landmark = obs.landmark;
      r.observed = obs.point;
      if (auto it = pose_index_.find(obs.frame); it != pose_index_.end()) {
        r.pose = it->second;
      }
      if (auto it = point_index_.find(obs.landmark); it != point_index_.end()) {
        r.point = it->second;
      }
      if (r.pose < 0 && r.point < 0) continue;
      residuals_.push_back(r);
    }
    poses_.reserve(pose_frames_.size());
    for (FrameIndex f : pose_frames_) poses_.push_back(rec.poses.at(f));
    points_.reserve(point_ids_.size());
    for (FruitId id : point_ids_) points_.push_back(rec.landmarks.at(id).position);
  }

  bool empty() const {
    return residuals_.empty() || (pose_frames_.empty() && point_ids_.empty());
  }

  const CameraPose& PoseOf(const Residual& r,
                           const std::vector<CameraPose>& poses) const {
    return r.pose >= 0 ? poses[r.pose] : rec_.poses.at(r.frame);
  }
  const Eigen::Vector3d& PointOf(const Residual& r,
                                 const std::vector<Eigen::Vector3d>& points) const {
    return r.point >= 0 ? points[r.point] : rec_.landmarks.at(r.landmark).position;
  }

  double Cost(const std::vector<CameraPose>& poses,
              const std::vector<Eigen::Vector3d>& points) const {
    const CameraIntrinsics& K = rec_.intrinsics;
    double cost = 0.0;
    for (const Residual& r : residuals_) {
      const Eigen::Vector3d cam = PoseOf(r, poses).Transform(PointOf(r, points));
      if (!(cam.z() > 1e-12)) return std::numeric_limits<double>::infinity();
      const Eigen::Vector2d p(K.fx * cam.x() / cam.z() + K.cx,
                              K.fy * cam.y() / cam.z() + K.cy);
      cost += (p - r.observed).squaredNorm();
    }
    return cost;
  }

  // Normal equations of the current linearization, in block form.
  struct Linearization {
    std::vector<Matrix6d> U;
    std::vector<Eigen::Matrix3d> V;
    std::vector<Vector6d> gc;
    std::vector<Eigen::Vector3d> gp;
    // Per point: (free pose, W block) in residual order.
    std::vector<std::vector<std::pair<int, Matrix63d>>> W;
    double max_diag = 0.0;
  };

  Linearization Linearize() const {
    Linearization L;
    L.U.assign(poses_.size(), Matrix6d::Zero());
    L.gc.assign(poses_.size(), Vector6d::Zero());
    L.V.assign(points_.size(), Eigen::Matrix3d::Zero());
    L.gp.assign(points_.size(), Eigen::Vector3d::Zero());
    L.W.assign(points_.size(), {});
    for (const Residual& r : residuals_) {
      const ResidualJacobian J = ReprojectionJacobian(
          rec_.intrinsics, PoseOf(r, poses_), PointOf(r, points_), r.observed);
      if (r.pose >= 0) {
        L.U[r.pose] += J.d_pose.transpose() * J.d_pose;
        L.gc[r.pose] += J.d_pose.transpose() * J.residual;
      }
      if (r.point >= 0) {
        L.V[r.point] += J.d_point.transpose() * J.d_point;
        L.gp[r.point] += J.d_point.transpose() * J.residual;
      }
      if (r.pose >= 0 && r.point >= 0) {
        auto& blocks = L.W[r.point];
        auto it = std::find_if(blocks.begin(), blocks.end(),
                               [&](const auto& b) { return b.first == r.pose; });
        if (it == blocks.end()) {
          blocks.emplace_back(r.pose, Matrix63d::Zero());
          it = blocks.end() - 1;
        }
        it->second += J.d_pose.transpose() * J.d_point;
      }
    }
    for (const auto& U : L.U) L.max_diag = std::max(L.max_diag, U.diagonal().maxCoeff());
    for (const auto& V : L.V) L.max_diag = std::max(L.max_diag, V.diagonal().maxCoeff());
    return L;
  }

  // Solves the damped system; returns false when it is not numerically solvable.
  bool Solve(const Linearization& L, double mu, std::vector<Vector6d>& dc,
             std::vector<Eigen::Vector3d>& dp) const {
    const int nc = static_cast<int>(poses_.size());
    const int np = static_cast<int>(points_.size());
    std::vector<Eigen::Matrix3d> Vinv(np);
    for (int p = 0; p < np; ++p) {
      Eigen::Matrix3d V = L.V[p];
      V.diagonal().array() += mu;
      const Eigen::LDLT<Eigen::Matrix3d> ldlt(V);
      if (ldlt.info() != Eigen::Success) return false;
      Vinv[p] = ldlt.solve(Eigen::Matrix3d::Identity());
    }
    dc.assign(nc, Vector6d::Zero());
    dp.assign(np, Eigen::Vector3d::Zero());
    if (nc > 0) {
      // Reduced camera system S dc = b; blocks (i, j) with i <= j.
      std::vector<int> slot(static_cast<std::size_t>(nc) * nc, -1);
      std::vector<Matrix6d> blocks;
      std::vector<std::pair<int, int>> keys;
      auto block = [&](int i, int j) -> Matrix6d& {
        int& s = slot[static_cast<std::size_t>(i) * nc + j];
        if (s < 0) {
          s = static_cast<int>(blocks.size());
          blocks.push_back(Matrix6d::Zero());
          keys.emplace_back(i, j);
        }
        return blocks[s];
      };
      Eigen::VectorXd b(6 * nc);
      for (int c = 0; c < nc; ++c) {
        Matrix6d& U = block(c, c);
        U = L.U[c];
        U.diagonal().array() += mu;
        b.segment<6>(6 * c) = -L.gc[c];
      }
      std::vector<Matrix63d> WVinv;
      for (int p = 0; p < np; ++p) {
        const auto& Wp = L.W[p];
        WVinv.resize(Wp.size());
        for (std::size_t a = 0; a < Wp.size(); ++a) {
          WVinv[a] = Wp[a].second * Vinv[p];
          b.segment<6>(6 * Wp[a].first) += WVinv[a] * L.gp[p];
        }
        for (std::size_t a = 0; a < Wp.size(); ++a) {
          for (std::size_t c = 0; c < Wp.size(); ++c) {
            const int ci = Wp[a].first;
            const int cj = Wp[c].first;
            if (cj < ci) continue;
            block(ci, cj).noalias() -= WVinv[a] * Wp[c].second.transpose();
          }
        }
      }
      std::vector<Eigen::Triplet<double>> triplets;
      triplets.reserve(blocks.size() * 36);
      for (std::size_t k = 0; k < blocks.size(); ++k) {
        const auto [ci, cj] = keys[k];
        const Matrix6d& B = blocks[k];
        // Lower triangle only: entry (6cj + r, 6ci + c) = B(c, r).
        for (int r = 0; r < 6; ++r) {
          for (int c = 0; c < 6; ++c) {
            if (ci == cj && r < c) continue;
            triplets.emplace_back(6 * cj + r, 6 * ci + c, B(c, r));
          }
        }
      }
      Eigen::SparseMatrix<double> Smat(6 * nc, 6 * nc);
      Smat.setFromTriplets(triplets.begin(), triplets.end());
      Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower> solver;
      solver.compute(Smat);
      if (solver.info() != Eigen::Success) return false;
      const Eigen::VectorXd x = solver.solve(b);
      if (solver.info() != Eigen::Success || !x.allFinite()) return false;
      for (int c = 0; c < nc; ++c) dc[c] = x.segment<6>(6 * c);
    }
    for (int p = 0; p < np; ++p) {
      Eigen::Vector3d rhs = -L.gp[p];
      for (const auto& [c, W] : L.W[p]) rhs -= W.transpose() * dc[c];
      dp[p] = Vinv[p] * rhs;
      if (!dp[p].allFinite()) return false;
    }
    return true;
  }

  // Largest increment relative to the parameter scale.
  double RelativeStep(const std::vector<Vector6d>& dc,
                      const std::vector<Eigen::Vector3d>& dp) const {
    double step = 0.0, scale = 1e-12;
    for (std::size_t c = 0; c < dc.size(); ++c) {
      step = std::max(step, dc[c].cwiseAbs().maxCoeff());
      scale = std::max(scale, poses_[c].translation().cwiseAbs().maxCoeff());
    }
    for (std::size_t p = 0; p < dp.size(); ++p) {
      step = std::max(step, dp[p].cwiseAbs().maxCoeff());
      scale = std::max(scale, points_[p].cwiseAbs().maxCoeff());
    }
    return step / scale;
  }

  void Step(const std::vector<Vector6d>& dc, const std::vector<Eigen::Vector3d>& dp,
            std::vector<CameraPose>& poses, std::vector<Eigen::Vector3d>& points) const {
    poses.resize(poses_.size());
    points.resize(points_.size());
    for (std::size_t c = 0; c < poses_.size(); ++c) {
      poses[c] = ApplyPoseIncrement(poses_[c], dc[c]);
    }
    for (std::size_t p = 0; p < points_.size(); ++p) points[p] = points_[p] + dp[p];
  }

  double CurrentCost() const { return Cost(poses_, points_); }
  void Accept(std::vector<CameraPose> poses, std::vector<Eigen::Vector3d> points) {
    poses_ = std::move(poses);
    points_ = std::move(points);
  }

  void WriteBack() const {
    for (std::size_t c = 0; c < poses_.size(); ++c) {
      rec_.poses.at(pose_frames_[c]) = poses_[c];
    }
    for (std::size_t p = 0; p < points_.size(); ++p) {
      rec_.landmarks.at(point_ids_[p]).position = points_[p];
    }
  }

 private:
  Reconstruction& rec_;
  std::vector<FrameIndex> pose_frames_;
  std::vector<FruitId> point_ids_;
  std::unordered_map<FrameIndex, int> pose_index_;
  std::unordered_map<FruitId, int> point_index_;
  std::vector<Residual> residuals_;
  std::vector<CameraPose> poses_;
  std::vector<Eigen::Vector3d> points_;
};

}  // namespace

BaSummary BundleAdjust(Reconstruction& rec, const BaOptions& options) {
  Problem problem(rec, options);
  BaSummary summary;
  summary.initial_cost = problem.CurrentCost();
  summary.final_cost = summary.initial_cost;
  summary.cost_history.push_back(summary.initial_cost);
  if (problem.empty() || !std::isfinite(summary.initial_cost)) {
    summary.status = BaStatus::kStalled;
    return summary;
  }
  if (summary.initial_cost == 0.0) return summary;

  double cost = summary.initial_cost;
  double mu = -1.0;
  bool relinearize = true;
  int rejections = 0;
  Problem::Linearization L;
  std::vector<Vector6d> dc;
  std::vector<Eigen::Vector3d> dp;
  std::vector<CameraPose> trial_poses;
  std::vector<Eigen::Vector3d> trial_points;
  summary.status = BaStatus::kMaxIterations;
  while (summary.iterations < options.max_iterations) {
    if (relinearize) {
      L = problem.Linearize();
      if (mu < 0.0) mu = 1e-3 * std::max(L.max_diag, 1e-12);
      relinearize = false;
    }
    ++summary.iterations;
    if (!problem.Solve(L, mu, dc, dp)) {
      mu *= 2.0;
      continue;
    }
    if (problem.RelativeStep(dc, dp) < 1e-14) {
      summary.status = BaStatus::kConverged;
      break;
    }
    problem.Step(dc, dp, trial_poses, trial_points);
    const double trial = problem.Cost(trial_poses, trial_points);
    summary.trial_costs.push_back(trial);
    if (trial < cost) {
      const double decrease = (cost - trial) / cost;
      problem.Accept(std::move(trial_poses), std::move(trial_points));
      cost = trial;
      summary.cost_history.push_back(cost);
      mu /= 3.0;
      rejections = 0;
      relinearize = true;
      if (decrease < options.relative_tolerance || cost == 0.0) {
        summary.status = BaStatus::kConverged;
        break;
      }
    } else {
      mu *= 2.0;
      // No descent within a 1000-fold damping increase: numerically optimal.
      if (++rejections >= 10) {
        summary.status = BaStatus::kStalled;
        break;
      }
    }
  }
  problem.WriteBack();
  summary.final_cost = cost;
  return summary;
}

}  // namespace orchard
