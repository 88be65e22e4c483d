#include "orchard/reconstruction.h"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numbers>
#include <optional>
#include <set>
#include <string>

#include "orchard/bundle_adjustment.h"
#include "orchard/error.h"
#include "orchard/random.h"

namespace orchard {

namespace {

double SquaredReprojection(const CameraIntrinsics& K, const CameraPose& pose,
                           const Eigen::Vector3d& X, const Eigen::Vector2d& obs) {
  const Eigen::Vector3d cam = pose.Transform(X);
  if (!(cam.z() > 1e-12)) return std::numeric_limits<double>::infinity();
  const Eigen::Vector2d p(K.fx * cam.x() / cam.z() + K.cx,
                          K.fy * cam.y() / cam.z() + K.cy);
  return ReprojectionError(p, obs);
}

}  // namespace

double Reconstruction::Cost() const {
  double cost = 0.0;
  for (const Observation& o : observations) {
    cost += SquaredReprojection(intrinsics, poses.at(o.frame),
                                landmarks.at(o.landmark).position, o.point);
  }
  return cost;
}

double Reconstruction::RmsReprojection() const {
  if (observations.empty()) return 0.0;
  return std::sqrt(Cost() / static_cast<double>(observations.size()));
}

double Reconstruction::MeanReprojection() const {
  if (observations.empty()) return 0.0;
  double sum = 0.0;
  for (const Observation& o : observations) {
    sum += std::sqrt(SquaredReprojection(intrinsics, poses.at(o.frame),
                                         landmarks.at(o.landmark).position,
                                         o.point));
  }
  return sum / static_cast<double>(observations.size());
}

void Reconstruction::Validate() const {
  for (const Observation& o : observations) {
    if (!poses.count(o.frame)) {
      throw Error(ErrorCode::kMissingPose,
                  "observation in frame " + std::to_string(o.frame) +
                      " has no pose");
    }
    if (!landmarks.count(o.landmark)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "observation references unknown landmark " +
                      std::to_string(o.landmark));
    }
  }
}

void Reconstruction::RefreshLandmarkAttributes() {
  for (auto& [id, lm] : landmarks) {
    lm.observed_frames.clear();
    lm.depth_by_frame.clear();
  }
  std::map<FruitId, FrameIndex> latest;
  for (const Observation& o : observations) {
    Landmark& lm = landmarks.at(o.landmark);
    lm.observed_frames.insert(o.frame);
    lm.depth_by_frame[o.frame] = CameraDepth(poses.at(o.frame), lm.position);
    auto it = latest.find(o.landmark);
    if (it == latest.end() || o.frame >= it->second) {
      latest[o.landmark] = o.frame;
      lm.last_box_area = o.box_area;
    }
  }
}

void Reconstruction::NormalizeScale() {
  const auto a = poses.find(initial_pair.first);
  const auto b = poses.find(initial_pair.second);
  if (a == poses.end() || b == poses.end()) return;
  const double baseline = (b->second.Center() - a->second.Center()).norm();
  if (!(baseline > 0.0) || !std::isfinite(baseline)) return;
  const double s = 1.0 / baseline;
  for (auto& [frame, pose] : poses) {
    pose = CameraPose(pose.rotation(), s * pose.translation());
  }
  for (auto& [id, lm] : landmarks) lm.position *= s;
}

void SfmConfig::Validate() const {
  essential.Validate("sfm.essential");
  pnp.Validate("sfm.pnp");
  auto fail = [](const std::string& field, const std::string& why) {
    throw Error(ErrorCode::kInvalidConfig, "sfm." + field + ": " + why);
  };
  if (!(min_triangulation_angle_deg >= 0.0)) {
    fail("min_triangulation_angle_deg", "must be >= 0");
  }
  if (!(min_initial_pair_angle_deg >= 0.0)) {
    fail("min_initial_pair_angle_deg", "must be >= 0");
  }
  if (min_shared_tracks < 8) fail("min_shared_tracks", "must be >= 8");
  if (local_ba_window < 1) fail("local_ba_window", "must be >= 1");
  if (global_ba_interval < 1) fail("global_ba_interval", "must be >= 1");
  if (ba_max_iterations < 1) fail("ba_max_iterations", "must be >= 1");
  if (!(ba_relative_tolerance > 0.0)) fail("ba_relative_tolerance", "must be positive");
  if (!(outlier_threshold > 0.0)) fail("outlier_threshold", "must be positive");
  if (!(min_registered_fraction >= 0.0 && min_registered_fraction <= 1.0)) {
    fail("min_registered_fraction", "must be in [0, 1]");
  }
}

namespace {

// Observations of the match set by frame and by fruit. Each (fruit, frame)
// keeps its first point.
struct TrackIndex {
  std::map<FrameIndex, std::map<FruitId, TrackPoint>> by_frame;
  std::map<FruitId, std::map<FrameIndex, TrackPoint>> by_fruit;

  explicit TrackIndex(const FeatureMatchSet& matches) {
    for (const FruitTrack& t : matches.tracks) {
      for (const TrackPoint& p : t.points) {
        by_frame[p.frame].try_emplace(t.fruit_id, p);
        by_fruit[t.fruit_id].try_emplace(p.frame, p);
      }
    }
  }
};

struct PairGeometry {
  CameraPose relative;
  std::vector<FruitId> inliers;  // in front of both cameras
  double median_angle_deg = 0.0;
};

std::uint64_t PairSeed(std::uint64_t seed, FrameIndex a, FrameIndex b) {
  return SplitMix64(seed ^ SplitMix64((static_cast<std::uint64_t>(a) << 32) ^
                                      static_cast<std::uint64_t>(b)));
}

std::optional<PairGeometry> EstimatePair(const TrackIndex& index, FrameIndex f1,
                                         FrameIndex f2,
                                         const CameraIntrinsics& intrinsics,
                                         const SfmConfig& config) {
  const auto& a = index.by_frame.at(f1);
  const auto& b = index.by_frame.at(f2);
  std::vector<FruitId> shared;
  std::vector<PointMatch> matches;
  for (const auto& [id, p] : a) {
    auto it = b.find(id);
    if (it == b.end()) continue;
    shared.push_back(id);
    matches.push_back({p.position, it->second.position});
  }
  if (static_cast<int>(shared.size()) < config.min_shared_tracks) return std::nullopt;

  Rng rng(PairSeed(config.seed, f1, f2));
  EssentialEstimate E;
  try {
    E = EstimateEssentialRansac(matches, intrinsics, config.essential, rng);
  } catch (const Error&) {
    return std::nullopt;
  }
  std::vector<Eigen::Vector2d> n1, n2;
  std::vector<FruitId> ids;
  for (std::size_t i = 0; i < shared.size(); ++i) {
    if (!E.inliers[i]) continue;
    n1.push_back(intrinsics.Normalize(matches[i].first));
    n2.push_back(intrinsics.Normalize(matches[i].second));
    ids.push_back(shared[i]);
  }
  RelativePose rel;
  try {
    rel = RecoverRelativePose(E.E, n1, n2);
  } catch (const Error&) {
    return std::nullopt;
  }
  const CameraIntrinsics unit{1.0, 1.0, 0.0, 0.0};
  PairGeometry out;
  out.relative = rel.pose;
  std::vector<double> angles;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (!rel.in_front[i]) continue;
    const ViewObservation views[2] = {{CameraPose::Identity(), n1[i]},
                                      {rel.pose, n2[i]}};
    const Eigen::Vector4d h = TriangulateLinear(views, unit);
    if (!(std::abs(h.w()) > 1e-14 * h.head<3>().norm())) continue;
    angles.push_back(MaxTriangulationAngle(views, h.head<3>() / h.w()) * 180.0 /
                     std::numbers::pi);
    out.inliers.push_back(ids[i]);
  }
  if (angles.empty()) return std::nullopt;
  const std::size_t mid = angles.size() / 2;
  std::nth_element(angles.begin(), angles.begin() + mid, angles.end());
  out.median_angle_deg = angles[mid];
  return out;
}

// Drops observations behind the camera or beyond the reprojection threshold,
// then landmarks left with fewer than two observations.
int FilterOutliers(Reconstruction& rec, double threshold) {
  const double thr2 = threshold * threshold;
  const std::size_t before = rec.observations.size();
  std::erase_if(rec.observations, [&](const Observation& o) {
    return !(SquaredReprojection(rec.intrinsics, rec.poses.at(o.frame),
                                 rec.landmarks.at(o.landmark).position,
                                 o.point) <= thr2);
  });
  std::map<FruitId, int> counts;
  for (const Observation& o : rec.observations) ++counts[o.landmark];
  std::erase_if(rec.landmarks, [&](const auto& kv) {
    auto it = counts.find(kv.first);
    return it == counts.end() || it->second < 2;
  });
  std::erase_if(rec.observations, [&](const Observation& o) {
    return !rec.landmarks.count(o.landmark);
  });
  return static_cast<int>(before - rec.observations.size());
}

void GlobalAdjust(Reconstruction& rec, const SfmConfig& config) {
  BaOptions options;
  options.max_iterations = config.ba_max_iterations;
  options.relative_tolerance = config.ba_relative_tolerance;
  options.fixed_frames = {rec.initial_pair.first};
  BundleAdjust(rec, options);
  rec.NormalizeScale();
}

void LocalAdjust(Reconstruction& rec, const std::deque<FrameIndex>& window,
                 const SfmConfig& config) {
  BaOptions options;
  options.max_iterations = config.ba_max_iterations;
  options.relative_tolerance = config.ba_relative_tolerance;
  options.fixed_frames = {rec.initial_pair.first};
  options.active_frames = std::set<FrameIndex>(window.begin(), window.end());
  std::set<FruitId> active;
  for (const Observation& o : rec.observations) {
    if (options.active_frames->count(o.frame)) active.insert(o.landmark);
  }
  options.active_landmarks = std::move(active);
  BundleAdjust(rec, options);
  rec.NormalizeScale();
}

// Triangulates a fruit from every registered frame that sees it; observations
// that do not reproject within the threshold are left out.
bool TryAddLandmark(Reconstruction& rec, const TrackIndex& index, FruitId id,
                    const SfmConfig& config) {
  std::vector<ViewObservation> views;
  std::vector<const TrackPoint*> points;
  for (const auto& [frame, p] : index.by_fruit.at(id)) {
    auto it = rec.poses.find(frame);
    if (it == rec.poses.end()) continue;
    views.push_back({it->second, p.position});
    points.push_back(&p);
  }
  if (views.size() < 2) return false;
  Eigen::Vector3d X;
  try {
    X = Triangulate(views, rec.intrinsics, config.min_triangulation_angle_deg);
  } catch (const Error&) {
    return false;
  }
  const double thr2 = config.outlier_threshold * config.outlier_threshold;
  std::vector<Observation> accepted;
  for (std::size_t i = 0; i < views.size(); ++i) {
    if (SquaredReprojection(rec.intrinsics, views[i].pose, X, views[i].pixel) <=
        thr2) {
      accepted.push_back({id, points[i]->frame, points[i]->position,
                          points[i]->box_area});
    }
  }
  if (accepted.size() < 2) return false;
  Landmark lm;
  lm.id = id;
  lm.position = X;
  rec.landmarks[id] = lm;
  rec.observations.insert(rec.observations.end(), accepted.begin(), accepted.end());
  return true;
}

}  // namespace

InitialPair SelectInitialPair(const FeatureMatchSet& matches,
                              const CameraIntrinsics& intrinsics,
                              const SfmConfig& config) {
  config.Validate();
  const TrackIndex index(matches);
  std::vector<FrameIndex> frames;
  for (const auto& [f, obs] : index.by_frame) frames.push_back(f);
  std::optional<InitialPair> best;
  double best_score = -1.0;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    for (std::size_t j = i + 1; j < frames.size(); ++j) {
      const auto geo = EstimatePair(index, frames[i], frames[j], intrinsics, config);
      if (!geo) continue;
      const int n = static_cast<int>(geo->inliers.size());
      if (n < config.essential.min_inlier_count) continue;
      if (geo->median_angle_deg < config.min_initial_pair_angle_deg) continue;
      const double score = n * geo->median_angle_deg;
      if (score > best_score) {
        best_score = score;
        best = InitialPair{frames[i], frames[j], n, geo->median_angle_deg};
      }
    }
  }
  if (!best) {
    throw Error(ErrorCode::kNoValidPair,
                "no frame pair has enough verified matches and parallax");
  }
  return *best;
}

Reconstruction InitializeTwoView(const FeatureMatchSet& matches,
                                 const InitialPair& pair,
                                 const CameraIntrinsics& intrinsics,
                                 const SfmConfig& config) {
  const TrackIndex index(matches);
  if (!index.by_frame.count(pair.first) || !index.by_frame.count(pair.second)) {
    throw Error(ErrorCode::kNoValidPair, "initial pair frames have no tracks");
  }
  const auto geo = EstimatePair(index, pair.first, pair.second, intrinsics, config);
  if (!geo) {
    throw Error(ErrorCode::kNoValidPair, "initial pair failed verification");
  }
  Reconstruction rec;
  rec.intrinsics = intrinsics;
  rec.initial_pair = {pair.first, pair.second};
  rec.poses[pair.first] = CameraPose::Identity();
  rec.poses[pair.second] = geo->relative;
  const double thr2 = config.outlier_threshold * config.outlier_threshold;
  for (FruitId id : geo->inliers) {
    const TrackPoint& p1 = index.by_fruit.at(id).at(pair.first);
    const TrackPoint& p2 = index.by_fruit.at(id).at(pair.second);
    const ViewObservation views[2] = {{rec.poses[pair.first], p1.position},
                                      {rec.poses[pair.second], p2.position}};
    Eigen::Vector3d X;
    try {
      X = Triangulate(views, intrinsics, config.min_triangulation_angle_deg);
    } catch (const Error&) {
      continue;
    }
    if (SquaredReprojection(intrinsics, views[0].pose, X, p1.position) > thr2 ||
        SquaredReprojection(intrinsics, views[1].pose, X, p2.position) > thr2) {
      continue;
    }
    Landmark lm;
    lm.id = id;
    lm.position = X;
    rec.landmarks[id] = lm;
    rec.observations.push_back({id, pair.first, p1.position, p1.box_area});
    rec.observations.push_back({id, pair.second, p2.position, p2.box_area});
  }
  if (static_cast<int>(rec.landmarks.size()) < config.min_shared_tracks) {
    throw Error(ErrorCode::kNoValidPair,
                "too few landmarks triangulated from the initial pair");
  }
  GlobalAdjust(rec, config);
  FilterOutliers(rec, config.outlier_threshold);
  rec.RefreshLandmarkAttributes();
  return rec;
}

Reconstruction Reconstruct(const FeatureMatchSet& matches,
                           const CameraIntrinsics& intrinsics,
                           const SfmConfig& config) {
  config.Validate();
  intrinsics.Validate();
  const TrackIndex index(matches);
  if (index.by_frame.size() < 2) {
    throw Error(ErrorCode::kNoValidPair, "matches span fewer than two frames");
  }
  const InitialPair pair = SelectInitialPair(matches, intrinsics, config);
  Reconstruction rec = InitializeTwoView(matches, pair, intrinsics, config);

  std::deque<FrameIndex> window = {pair.first, pair.second};
  std::map<FrameIndex, int> failed_with;  // correspondence count at last failure
  int since_global = 0;
  const double thr2 = config.outlier_threshold * config.outlier_threshold;
  while (true) {
    // Next frame: most 2D-3D correspondences, lowest index on ties.
    std::optional<FrameIndex> next;
    int next_count = 0;
    for (const auto& [frame, obs] : index.by_frame) {
      if (rec.poses.count(frame)) continue;
      int count = 0;
      for (const auto& [id, p] : obs) count += rec.landmarks.count(id) ? 1 : 0;
      if (auto it = failed_with.find(frame);
          it != failed_with.end() && count <= it->second) {
        continue;
      }
      if (count > next_count) {
        next_count = count;
        next = frame;
      }
    }
    if (!next || next_count < 6) break;
    const FrameIndex frame = *next;
    std::vector<Correspondence2D3D> corr;
    std::vector<FruitId> corr_ids;
    for (const auto& [id, p] : index.by_frame.at(frame)) {
      auto it = rec.landmarks.find(id);
      if (it == rec.landmarks.end()) continue;
      corr.push_back({it->second.position, p.position});
      corr_ids.push_back(id);
    }
    Rng rng(PairSeed(config.seed, frame, -1));
    PnpEstimate estimate;
    try {
      estimate = PnpRansac(corr, intrinsics, config.pnp, rng);
    } catch (const Error&) {
      failed_with[frame] = next_count;
      continue;
    }
    rec.poses[frame] = estimate.pose;
    for (std::size_t i = 0; i < corr.size(); ++i) {
      if (!estimate.inliers[i]) continue;
      if (SquaredReprojection(intrinsics, estimate.pose, corr[i].point,
                              corr[i].pixel) > thr2) {
        continue;
      }
      const TrackPoint& p = index.by_frame.at(frame).at(corr_ids[i]);
      rec.observations.push_back({corr_ids[i], frame, p.position, p.box_area});
    }
    for (const auto& [id, p] : index.by_frame.at(frame)) {
      if (!rec.landmarks.count(id)) TryAddLandmark(rec, index, id, config);
    }

    window.push_back(frame);
    while (static_cast<int>(window.size()) > config.local_ba_window) {
      window.pop_front();
    }
    LocalAdjust(rec, window, config);
    if (++since_global >= config.global_ba_interval) {
      GlobalAdjust(rec, config);
      since_global = 0;
    }
    FilterOutliers(rec, config.outlier_threshold);
  }

  GlobalAdjust(rec, config);
  if (FilterOutliers(rec, config.outlier_threshold) > 0) GlobalAdjust(rec, config);
  rec.RefreshLandmarkAttributes();
  const double registered = static_cast<double>(rec.poses.size());
  const double total = static_cast<double>(index.by_frame.size());
  if (registered < config.min_registered_fraction * total) {
    throw Error(ErrorCode::kReconstructionTooSparse,
                "registered " + std::to_string(rec.poses.size()) + " of " +
                    std::to_string(index.by_frame.size()) + " frames");
  }
  return rec;
}

}  // namespace orchard
