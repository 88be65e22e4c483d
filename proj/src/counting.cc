#include "orchard/counting.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>
#include <limits>
#include <numeric>
#include <string>

#include "orchard/error.h"

namespace orchard {

ObservationFlowProvider::ObservationFlowProvider(
    std::span<const FrameObservation> frames, double radius)
    : radius_(radius) {
  for (const FrameObservation& f : frames) frames_[f.frame] = &f;
}

std::optional<Eigen::Vector2d> ObservationFlowProvider::Refine(
    FrameIndex frame, const Eigen::Vector2d& position,
    const Eigen::Vector2d& /*guess*/) const {
  auto it = frames_.find(frame);
  if (it == frames_.end() || !it->second->flows) return std::nullopt;
  const FrameObservation& obs = *it->second;
  int best = -1;
  double best_d = radius_ * radius_;
  for (std::size_t j = 0; j < obs.detections.size(); ++j) {
    const double d = (obs.detections[j].center() - position).squaredNorm();
    if (d <= best_d) {
      best_d = d;
      best = static_cast<int>(j);
    }
  }
  if (best < 0) return std::nullopt;
  return (*obs.flows)[best].vec();
}

SimulatorFlowProvider::SimulatorFlowProvider(const OrchardScene& scene, Pass pass)
    : scene_(scene), pass_(pass) {}

std::optional<Eigen::Vector2d> SimulatorFlowProvider::Refine(
    FrameIndex frame, const Eigen::Vector2d& position,
    const Eigen::Vector2d& /*guess*/) const {
  const auto& traj = scene_.Trajectory(pass_);
  if (frame < 0 || frame >= static_cast<FrameIndex>(traj.size())) return std::nullopt;
  const CameraPose& pose = traj[frame];
  const Eigen::Vector3d* best = nullptr;
  double best_d = std::numeric_limits<double>::infinity();
  for (const Tree& tree : scene_.trees) {
    for (const Fruit& fruit : tree.fruits) {
      if (!(CameraDepth(pose, fruit.position) > 1e-12)) continue;
      const double d =
          (Project(scene_.intrinsics(), pose, fruit.position) - position).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = &fruit.position;
      }
    }
  }
  if (!best) return std::nullopt;
  return TrueFlow(scene_, pass_, frame, *best);
}

void RefineConfig::Validate() const {
  if (!(max_divergence > 0.0)) {
    throw Error(ErrorCode::kInvalidConfig, "refine.max_divergence: must be positive");
  }
  if (!(search_radius > 0.0)) {
    throw Error(ErrorCode::kInvalidConfig, "refine.search_radius: must be positive");
  }
}

FeatureMatchSet RefineMatches(const FeatureMatchSet& matches,
                              const FlowProvider& provider,
                              const RefineConfig& config, RefineStats* stats) {
  config.Validate();
  RefineStats local;
  FeatureMatchSet out;
  out.tracks.reserve(matches.tracks.size());
  for (const FruitTrack& track : matches.tracks) {
    FruitTrack refined{track.fruit_id, track.points};
    if (refined.points.empty()) {
      out.tracks.push_back(std::move(refined));
      continue;
    }
    Eigen::Vector2d p = track.points.front().detection_center;
    refined.points.front().position = p;
    for (std::size_t i = 1; i < track.points.size(); ++i) {
      const Eigen::Vector2d guess = track.points[i].position - p;
      Eigen::Vector2d d = guess;
      const auto r = provider.Refine(track.points[i - 1].frame, p, guess);
      if (!r) {
        ++local.unavailable;
      } else if ((*r - guess).norm() > config.max_divergence) {
        ++local.diverged;
      } else {
        d = *r;
        ++local.refined;
      }
      p += d;
      refined.points[i].position = p;
    }
    out.tracks.push_back(std::move(refined));
  }
  if (stats) *stats = local;
  return out;
}

void PipelineOptions::Validate() const {
  tracker.Validate();
  sfm.Validate();
  reassoc.Validate();
  trunk.Validate();
  refine.Validate();
  intrinsics.Validate();
  if (vote_window < 0) {
    throw Error(ErrorCode::kInvalidConfig, "vote.window: must be >= 0");
  }
  if (image.rows <= 0 || image.cols <= 0) {
    throw Error(ErrorCode::kInvalidConfig, "image: dimensions must be positive");
  }
  if (threads < 1) throw Error(ErrorCode::kInvalidConfig, "threads: must be >= 1");
}

namespace {

class StageTimer {
 public:
  StageTimer(SideResult& result, std::string stage)
      : result_(result), stage_(std::move(stage)),
        start_(std::chrono::steady_clock::now()) {}
  ~StageTimer() {
    result_.stage_seconds[stage_] +=
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_)
            .count();
  }

 private:
  SideResult& result_;
  std::string stage_;
  std::chrono::steady_clock::time_point start_;
};

template <typename F>
auto RunStage(SideResult& result, const std::string& stage, Pass side, F&& fn) {
  StageTimer timer(result, stage);
  try {
    return fn();
  } catch (const Error& e) {
    throw StageError(stage, side, e);
  }
}

// Majority tree over the landmark's observations that fall inside a region.
int TreeFromMask(const TreeMask& mask, const Reconstruction& rec, FruitId id) {
  std::map<int, int> votes;
  for (const Observation& o : rec.observations) {
    if (o.landmark != id) continue;
    auto it = mask.find(o.frame);
    if (it == mask.end()) continue;
    for (const TreeRegion& r : it->second) {
      if (o.point.x() >= r.u_min && o.point.x() <= r.u_max &&
          o.point.y() >= r.v_min && o.point.y() <= r.v_max) {
        ++votes[r.tree];
        break;
      }
    }
  }
  int best = -1, best_votes = 0;
  for (const auto& [tree, n] : votes) {
    if (n > best_votes) {
      best = tree;
      best_votes = n;
    }
  }
  return best;
}

}  // namespace

SideResult RunSide(const SideInput& input, Pass side, const PipelineOptions& options,
                   const FlowProvider* provider) {
  SideResult result;
  result.side = side;
  const std::span<const FrameObservation> frames(input.frames);

  const TrackingResult tracking = RunStage(result, "tracking", side, [&] {
    return RunTracking(frames, options.tracker);
  });
  result.raw_track_count = static_cast<int>(tracking.matches.tracks.size());

  result.first = RunStage(result, "sfm", side, [&] {
    return Reconstruct(tracking.matches, options.intrinsics, options.sfm);
  });
  result.first_landmarks = static_cast<int>(result.first.landmarks.size());
  result.first_rms = result.first.RmsReprojection();

  FeatureMatchSet to_refine = tracking.matches;
  if (options.enable_reassociation) {
    std::vector<FrameObservation> posed;
    for (const FrameObservation& f : input.frames) {
      if (result.first.poses.count(f.frame)) posed.push_back(f);
    }
    const ReassocResult ra = RunStage(result, "reassociation", side, [&] {
      return Reassociate(result.first, posed, options.image, options.reassoc);
    });
    result.reassociated_landmarks = static_cast<int>(ra.reconstruction.landmarks.size());
    to_refine = ra.matches;
  } else {
    result.reassociated_landmarks = result.first_landmarks;
  }

  const ObservationFlowProvider observed(frames, options.refine.search_radius);
  const FlowProvider& flow = provider ? *provider : observed;
  const FeatureMatchSet refined = RunStage(result, "refinement", side, [&] {
    return RefineMatches(to_refine, flow, options.refine);
  });

  result.final = RunStage(result, "final_sfm", side, [&] {
    return Reconstruct(refined, options.intrinsics, options.sfm);
  });
  result.final_landmarks = static_cast<int>(result.final.landmarks.size());
  result.final_rms = result.final.RmsReprojection();
  result.registered_frames = static_cast<int>(result.final.poses.size());

  RunStage(result, "trunk_depth", side, [&] {
    for (const TrunkTrack& t : BuildTrunkTracks(frames, options.image, options.trunk)) {
      try {
        result.profiles.push_back(
            ComputeDepthProfile(t, result.final, options.sfm.min_triangulation_angle_deg));
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kEmptyProfile) throw;
      }
    }
    return 0;
  });
  return result;
}

namespace {

void AssignAndVote(SideResult& side, const SideInput& input, bool voting,
                   const PipelineOptions& options) {
  if (voting && side.profiles.empty()) {
    throw StageError("centroid_vote", side.side,
                     Error(ErrorCode::kEmptyProfile,
                           "no trunk depth profile for centroid voting"));
  }
  const Eigen::Vector3d axis = RowAxis(side.profiles, side.final);
  for (const auto& [id, lm] : side.final.landmarks) {
    FruitMapEntry e;
    e.landmark = id;
    e.position = lm.position;
    e.side = side.side;
    if (!lm.observed_frames.empty()) {
      e.first_frame = *lm.observed_frames.begin();
      e.last_frame = *lm.observed_frames.rbegin();
    }
    const TrunkDepthProfile* trunk = nullptr;
    if (!side.profiles.empty()) {
      trunk = &side.profiles[NearestTrunk(lm.position, side.profiles, axis)];
    }
    if (input.tree_mask) {
      e.tree = TreeFromMask(*input.tree_mask, side.final, id);
    } else if (trunk) {
      e.tree = trunk->trunk;
    } else {
      e.tree = 0;
    }
    if (!voting) {
      e.counted = true;
    } else {
      try {
        const VoteTally t = CentroidVote(lm, *trunk, e.last_frame, options.vote_window);
        e.votes_before = t.before;
        e.votes_after = t.after;
        e.counted = t.counted();
      } catch (const Error& err) {
        if (err.code() != ErrorCode::kNoOverlappingFrames) throw;
        e.counted = false;
      }
    }
    side.fruits.push_back(e);
  }
}

}  // namespace

PipelineResult CountPipeline(const std::optional<SideInput>& east,
                             const std::optional<SideInput>& west,
                             const PipelineOptions& options,
                             const FlowProvider* east_provider,
                             const FlowProvider* west_provider) {
  options.Validate();
  if (!east && !west) {
    throw Error(ErrorCode::kEmptyInput, "no side to count");
  }
  PipelineResult out;
  std::optional<SideResult> east_result, west_result;
  if (east && west && options.threads >= 2) {
    auto future = std::async(std::launch::async, [&] {
      return RunSide(*west, Pass::kWest, options, west_provider);
    });
    east_result = RunSide(*east, Pass::kEast, options, east_provider);
    west_result = future.get();
  } else {
    if (east) east_result = RunSide(*east, Pass::kEast, options, east_provider);
    if (west) west_result = RunSide(*west, Pass::kWest, options, west_provider);
  }
  const bool single = !(east && west);
  const bool voting = options.enable_centroid_voting &&
                      !(single && options.single_side_skips_voting);
  out.report.single_side = single;
  if (east_result) {
    AssignAndVote(*east_result, *east, voting, options);
    out.sides.push_back(std::move(*east_result));
  }
  if (west_result) {
    AssignAndVote(*west_result, *west, voting, options);
    out.sides.push_back(std::move(*west_result));
  }
  for (const SideResult& s : out.sides) {
    out.report.raw_track_counts[PassName(s.side)] = s.raw_track_count;
    for (const TrunkDepthProfile& p : s.profiles) out.report.per_tree[p.trunk];
    for (const FruitMapEntry& e : s.fruits) {
      out.fruits.push_back(e);
      if (e.tree < 0) continue;
      TreeCount& tc = out.report.per_tree[e.tree];
      if (e.counted) ++tc.estimated;
    }
  }
  for (const auto& [tree, tc] : out.report.per_tree) {
    out.report.total_estimated += tc.estimated;
  }
  return out;
}

void AttachGroundTruth(CountReport& report, const std::map<int, int>& truth) {
  for (const auto& [tree, n] : truth) report.per_tree[tree].ground_truth = n;
  report.signed_errors.clear();
  std::vector<int> est, gt, errors;
  std::vector<std::pair<double, double>> pairs;
  int total = 0;
  for (const auto& [tree, tc] : report.per_tree) {
    if (!tc.ground_truth) continue;
    est.push_back(tc.estimated);
    gt.push_back(*tc.ground_truth);
    errors.push_back(tc.estimated - *tc.ground_truth);
    report.signed_errors[tree] = errors.back();
    pairs.emplace_back(*tc.ground_truth, tc.estimated);
    total += *tc.ground_truth;
  }
  if (gt.empty()) return;
  report.total_ground_truth = total;
  report.l1_loss = static_cast<int>(L1Loss(est, gt));
  report.abs_error = ErrorStats(errors);
  report.signed_error = SignedErrorStats(errors);
  try {
    report.regression = FitRegression(pairs);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kDegenerateInput) throw;
    report.regression.reset();
  }
}

long long L1Loss(std::span<const int> estimates, std::span<const int> truths) {
  if (estimates.size() != truths.size()) {
    throw Error(ErrorCode::kLengthMismatch,
                "estimates and truths differ in length");
  }
  long long sum = 0;
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    sum += std::llabs(static_cast<long long>(estimates[i]) - truths[i]);
  }
  return sum;
}

Regression FitRegression(std::span<const std::pair<double, double>> pairs) {
  if (pairs.size() < 2) {
    throw Error(ErrorCode::kDegenerateInput, "regression needs two pairs");
  }
  const double n = static_cast<double>(pairs.size());
  double mx = 0.0, my = 0.0;
  for (const auto& [x, y] : pairs) {
    mx += x;
    my += y;
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (const auto& [x, y] : pairs) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
    syy += (y - my) * (y - my);
  }
  if (!(sxx > 0.0)) {
    throw Error(ErrorCode::kDegenerateInput, "ground truth is constant");
  }
  Regression r;
  r.slope = sxy / sxx;
  r.intercept = my - r.slope * mx;
  double ss_res = 0.0;
  for (const auto& [x, y] : pairs) {
    const double e = y - (r.slope * x + r.intercept);
    ss_res += e * e;
  }
  r.r2 = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
  return r;
}

namespace {

ErrorSummary MeanStd(const std::vector<double>& v) {
  ErrorSummary s;
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  if (v.size() < 2) return s;
  double ss = 0.0;
  for (double x : v) ss += (x - s.mean) * (x - s.mean);
  s.stddev = std::sqrt(ss / static_cast<double>(v.size() - 1));
  return s;
}

}  // namespace

ErrorSummary ErrorStats(std::span<const int> errors) {
  if (errors.empty()) throw Error(ErrorCode::kEmptyInput, "no errors");
  std::vector<double> v;
  for (int e : errors) v.push_back(std::abs(e));
  return MeanStd(v);
}

ErrorSummary SignedErrorStats(std::span<const int> errors) {
  if (errors.empty()) throw Error(ErrorCode::kEmptyInput, "no errors");
  return MeanStd(std::vector<double>(errors.begin(), errors.end()));
}

}  // namespace orchard
