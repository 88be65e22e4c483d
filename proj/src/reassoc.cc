#include "orchard/reassoc.h"

#include <algorithm>
#include <string>

#include "orchard/assignment.h"
#include "orchard/error.h"

namespace orchard {

void AgeCostParams::Validate() const {
  if (O0 < 1) throw Error(ErrorCode::kInvalidConfig, "reassoc.O0: must be >= 1");
  if (!(wO >= 0.0)) {
    throw Error(ErrorCode::kInvalidConfig, "reassoc.wO: must be >= 0");
  }
}

double AgeCost(int age, const AgeCostParams& params) {
  if (age < 1) {
    throw Error(ErrorCode::kInvalidArgument, "landmark age must be >= 1");
  }
  const double o0 = static_cast<double>(params.O0);
  return params.wO * std::max(0.0, 1.0 - (age - o0) / o0);
}

double LandmarkCost(const Eigen::Vector2d& projection, double landmark_area,
                    const Detection& detection, int age,
                    const AgeCostParams& params) {
  const double dist2 = (projection - detection.center()).squaredNorm();
  const BoundingBox box = BoundingBox::Square(projection, landmark_area);
  const double gamma = BoxOverlap(box, detection.box);
  return dist2 / (landmark_area + detection.box.area()) + (1.0 - gamma) +
         AgeCost(age, params);
}

double ReassocConfig::Gate() const {
  return base_gate + AgeCost(1, age);
}

void ReassocConfig::Validate() const {
  age.Validate();
  if (!(base_gate > 0.0)) {
    throw Error(ErrorCode::kInvalidConfig, "reassoc.gate: must be positive");
  }
  if (min_track_length < 2) {
    throw Error(ErrorCode::kInvalidConfig,
                "reassoc.min_track_length: must be >= 2");
  }
}

ReassocResult Reassociate(const Reconstruction& rec,
                          std::span<const FrameObservation> frames,
                          const ImageSize& image, const ReassocConfig& config) {
  config.Validate();
  std::vector<FruitId> ids;
  std::map<FruitId, double> area;
  for (const auto& [id, lm] : rec.landmarks) {
    ids.push_back(id);
    area[id] = lm.last_box_area > 0.0 ? lm.last_box_area : 1.0;
  }
  std::map<FruitId, int> matched;  // sweep matches so far
  std::map<FruitId, std::vector<TrackPoint>> points;

  std::vector<const FrameObservation*> ordered;
  for (const FrameObservation& f : frames) ordered.push_back(&f);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const auto* a, const auto* b) { return a->frame < b->frame; });

  for (const FrameObservation* frame : ordered) {
    auto pose_it = rec.poses.find(frame->frame);
    if (pose_it == rec.poses.end()) {
      throw Error(ErrorCode::kMissingPose,
                  "no pose for frame " + std::to_string(frame->frame));
    }
    const CameraPose& pose = pose_it->second;
    std::vector<FruitId> rows;
    std::vector<Eigen::Vector2d> projections;
    for (FruitId id : ids) {
      const Eigen::Vector3d& X = rec.landmarks.at(id).position;
      if (!(CameraDepth(pose, X) > 1e-12)) continue;
      const Eigen::Vector2d p = Project(rec.intrinsics, pose, X);
      if (!image.Contains(p)) continue;
      rows.push_back(id);
      projections.push_back(p);
    }
    const int m = static_cast<int>(rows.size());
    const int n = static_cast<int>(frame->detections.size());
    if (m == 0 || n == 0) continue;
    Eigen::MatrixXd cost(m, n);
    for (int i = 0; i < m; ++i) {
      const int age = 1 + matched[rows[i]];
      for (int j = 0; j < n; ++j) {
        cost(i, j) = LandmarkCost(projections[i], area[rows[i]],
                                  frame->detections[j], age, config.age);
      }
    }
    // Ages update only after the whole frame is assigned.
    for (const auto& [i, j] : HungarianAssign(cost, config.Gate())) {
      const Detection& det = frame->detections[j];
      const FruitId id = rows[i];
      ++matched[id];
      area[id] = det.box.area();
      points[id].push_back(
          TrackPoint{frame->frame, det.center(), det.center(), det.box.area()});
    }
  }

  ReassocResult out;
  out.reconstruction = rec;
  for (FruitId id : ids) {
    const int count = matched.count(id) ? matched.at(id) : 0;
    out.match_counts[id] = count;
    if (count < config.min_track_length) {
      out.discarded.push_back(id);
      out.reconstruction.landmarks.erase(id);
      continue;
    }
    // Split the matched frames into consecutive runs.
    FruitTrack run{id, {}};
    for (const TrackPoint& p : points.at(id)) {
      if (!run.points.empty() && p.frame != run.points.back().frame + 1) {
        out.matches.tracks.push_back(std::move(run));
        run = FruitTrack{id, {}};
      }
      run.points.push_back(p);
    }
    out.matches.tracks.push_back(std::move(run));
  }
  std::erase_if(out.reconstruction.observations, [&](const Observation& o) {
    return !out.reconstruction.landmarks.count(o.landmark);
  });
  out.reconstruction.RefreshLandmarkAttributes();
  return out;
}

}  // namespace orchard
