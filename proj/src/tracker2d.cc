#include "orchard/tracker2d.h"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/SVD>

#include "orchard/assignment.h"
#include "orchard/error.h"

namespace orchard {

KfModel KfModel::Make(const Eigen::Vector4d& q_diag, const Vector6d& r_diag) {
  KfModel m;
  m.A.setIdentity();
  m.A.topRightCorner<2, 2>().setIdentity();
  m.H.setZero();
  m.H.block<2, 2>(0, 0).setIdentity();
  m.H.block<2, 2>(2, 0).setIdentity();
  m.H.block<2, 2>(4, 2).setIdentity();
  m.Q = q_diag.asDiagonal();
  m.R = r_diag.asDiagonal();
  return m;
}

KfModel KfModel::Default() { return TrackerConfig{}.Model(); }

void TrackerConfig::Validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw Error(ErrorCode::kInvalidConfig, "tracker." + field + ": " + why);
  };
  if (!(gate > 0.0)) fail("gate", "must be positive");
  if (min_track_length < 2) fail("min_track_length", "must be >= 2");
  if (!(initial_covariance.minCoeff() > 0.0)) {
    fail("P0", "entries must be positive");
  }
  if (!(process_noise.minCoeff() > 0.0)) fail("Q", "entries must be positive");
  if (!(measurement_noise.minCoeff() > 0.0)) fail("R", "entries must be positive");
  if (!(zero_flow_inflation >= 1.0)) fail("zero_flow_inflation", "must be >= 1");
}

FlowVector MeanFlow(std::span<const FlowVector> flows,
                    const FlowVector& fallback) {
  if (flows.empty()) return fallback;
  double su = 0.0, sv = 0.0;
  for (const FlowVector& f : flows) {
    su += f.du;
    sv += f.dv;
  }
  const double n = static_cast<double>(flows.size());
  return FlowVector{su / n, sv / n};
}

FlowVector MeanFlowEstimator::Update(std::span<const FlowVector> flows) {
  const FlowVector mean = MeanFlow(flows, last_nonzero_);
  if (mean.du != 0.0 || mean.dv != 0.0) last_nonzero_ = mean;
  return mean;
}

double TrackCost(const Eigen::Vector2d& predicted_center,
                 const BoundingBox& track_box, const Detection& detection) {
  const double dist2 = (predicted_center - detection.center()).squaredNorm();
  const BoundingBox predicted(predicted_center, track_box.width(),
                              track_box.height());
  const double gamma = BoxOverlap(predicted, detection.box);
  return dist2 / (track_box.area() + detection.box.area()) + (1.0 - gamma);
}

TrackState KfInitialize(const Detection& detection,
                        const FlowVector& prior_mean_flow,
                        const Eigen::Vector4d& initial_covariance, FruitId id) {
  TrackState s;
  s.id = id;
  s.x << detection.center(), prior_mean_flow.du, prior_mean_flow.dv;
  s.P = initial_covariance.asDiagonal();
  s.last_box = detection.box;
  s.last_flow = prior_mean_flow;
  s.points.push_back(TrackPoint{detection.frame, detection.center(),
                                detection.center(), detection.box.area()});
  return s;
}

TrackState KfPredict(const TrackState& state, const KfModel& model) {
  TrackState out = state;
  out.x = model.A * state.x;
  out.P = model.A * state.P * model.A.transpose() + model.Q;
  return out;
}

Measurement BuildMeasurement(const Eigen::Vector2d& predicted_center,
                             const Eigen::Vector2d& detection_center,
                             const FlowVector& mean_flow_next,
                             const FlowVector& last_flow) {
  Measurement m;
  m.z.segment<2>(0) = predicted_center;
  m.z.segment<2>(2) = detection_center;
  const double mean_norm = mean_flow_next.norm();
  if (mean_norm < 1e-9) {
    m.velocity_degenerate = true;
  } else {
    m.z.segment<2>(4) = mean_flow_next.vec() / mean_norm * last_flow.norm();
  }
  return m;
}

TrackState KfUpdate(const TrackState& prior, const Vector6d& z,
                    const KfModel& model) {
  const Matrix6d S =
      model.H * prior.P * model.H.transpose() + model.R;
  const Eigen::JacobiSVD<Matrix6d> svd(S);
  const auto& sv = svd.singularValues();
  if (!(sv(5) > 0.0) || sv(0) / sv(5) > 1e12) {
    throw Error(ErrorCode::kSingularInnovation,
                "innovation covariance is numerically singular");
  }
  const Eigen::LDLT<Matrix6d> ldlt(S);
  // K = P H^T S^-1, computed as (S^-1 H P)^T since S and P are symmetric.
  const Eigen::Matrix<double, 4, 6> K =
      ldlt.solve(model.H * prior.P).transpose();
  TrackState post = prior;
  post.x = prior.x + K * (z - model.H * prior.x);
  const Eigen::Matrix4d P =
      (Eigen::Matrix4d::Identity() - K * model.H) * prior.P;
  post.P = 0.5 * (P + P.transpose());
  return post;
}

namespace {

class Tracker {
 public:
  explicit Tracker(const TrackerConfig& config)
      : config_(config), model_(config.Model()) {
    inflated_model_ = model_;
    inflated_model_.R.bottomRightCorner<2, 2>() *= config.zero_flow_inflation;
  }

  void Process(const FrameObservation& frame) {
    frame.Validate();
    if (last_frame_ && frame.frame != *last_frame_ + 1) {
      // A gap in the stream breaks every track.
      TerminateAll();
    }
    const std::span<const FlowVector> flows =
        frame.flows ? std::span<const FlowVector>(*frame.flows)
                    : std::span<const FlowVector>();
    const FlowVector mean_flow = mean_flow_.Update(flows);

    const int m = static_cast<int>(active_.size());
    const int n = static_cast<int>(frame.detections.size());
    std::vector<char> det_used(n, 0);
    std::vector<TrackState> survivors;
    if (m > 0 && n > 0) {
      Eigen::MatrixXd cost(m, n);
      std::vector<Eigen::Vector2d> predicted(m);
      for (int i = 0; i < m; ++i) {
        predicted[i] = active_[i].position() + active_[i].last_flow.vec();
        for (int j = 0; j < n; ++j) {
          cost(i, j) = TrackCost(predicted[i], active_[i].last_box,
                                 frame.detections[j]);
        }
      }
      const Assignment pairs = HungarianAssign(cost, config_.gate);
      std::vector<int> match(m, -1);
      for (const auto& [i, j] : pairs) match[i] = j;
      for (int i = 0; i < m; ++i) {
        const int j = match[i];
        if (j < 0) {
          Finish(std::move(active_[i]));
          continue;
        }
        det_used[j] = 1;
        const Detection& det = frame.detections[j];
        TrackState prior = KfPredict(active_[i], model_);
        const Measurement meas = BuildMeasurement(
            predicted[i], det.center(), mean_flow, active_[i].last_flow);
        TrackState post = KfUpdate(
            prior, meas.z, meas.velocity_degenerate ? inflated_model_ : model_);
        post.last_box = det.box;
        post.last_flow = frame.flows ? (*frame.flows)[j]
                                     : FlowVector{post.x(2), post.x(3)};
        post.points.push_back(TrackPoint{frame.frame, post.position(),
                                         det.center(), det.box.area()});
        survivors.push_back(std::move(post));
      }
    } else {
      for (TrackState& t : active_) Finish(std::move(t));
    }
    active_ = std::move(survivors);

    for (int j = 0; j < n; ++j) {
      if (det_used[j]) continue;
      TrackState s = KfInitialize(frame.detections[j], prior_mean_flow_,
                                  config_.initial_covariance, next_id_++);
      s.last_flow = frame.flows ? (*frame.flows)[j] : prior_mean_flow_;
      ++result_.tracks_started;
      active_.push_back(std::move(s));
    }
    prior_mean_flow_ = mean_flow;
    last_frame_ = frame.frame;
  }

  TrackingResult Finalize() {
    TerminateAll();
    std::sort(result_.matches.tracks.begin(), result_.matches.tracks.end(),
              [](const FruitTrack& a, const FruitTrack& b) {
                return a.fruit_id < b.fruit_id;
              });
    return std::move(result_);
  }

 private:
  void TerminateAll() {
    for (TrackState& t : active_) Finish(std::move(t));
    active_.clear();
  }

  void Finish(TrackState track) {
    track.status = TrackStatus::kTerminated;
    if (static_cast<int>(track.points.size()) >= config_.min_track_length) {
      result_.matches.tracks.push_back(
          FruitTrack{track.id, std::move(track.points)});
    }
  }

  TrackerConfig config_;
  KfModel model_;
  KfModel inflated_model_;
  MeanFlowEstimator mean_flow_;
  FlowVector prior_mean_flow_;
  std::vector<TrackState> active_;
  std::optional<FrameIndex> last_frame_;
  FruitId next_id_ = 0;
  TrackingResult result_;
};

}  // namespace

TrackingResult RunTracking(std::span<const FrameObservation> frames,
                           const TrackerConfig& config) {
  config.Validate();
  Tracker tracker(config);
  for (const FrameObservation& frame : frames) tracker.Process(frame);
  return tracker.Finalize();
}

}  // namespace orchard
