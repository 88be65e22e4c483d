#include "orchard/trunk_depth.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include <Eigen/Eigenvalues>

#include "orchard/error.h"
#include "orchard/geometry.h"

namespace orchard {

void TrunkTrackConfig::Validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw Error(ErrorCode::kInvalidConfig, "trunk." + field + ": " + why);
  };
  if (span < 2) fail("span", "must be >= 2");
  if (!(max_flow_error > 0.0)) fail("max_flow_error", "must be positive");
  if (!(search_radius > 0.0)) fail("search_radius", "must be positive");
  if (min_start_corners < 1) fail("min_start_corners", "must be >= 1");
}

bool InMiddleThird(const Eigen::Vector2d& pixel, const ImageSize& image) {
  const double third = image.cols / 3.0;
  return pixel.y() >= third && pixel.y() <= 2.0 * third;
}

namespace {

struct FrameCorners {
  std::vector<Eigen::Vector2d> position;
  std::vector<std::optional<Eigen::Vector2d>> flow;
};

// Corners per (trunk, frame).
using CornerIndex = std::map<TrunkId, std::map<FrameIndex, FrameCorners>>;

CornerIndex IndexCorners(std::span<const FrameObservation> frames) {
  CornerIndex index;
  for (const FrameObservation& f : frames) {
    if (!f.trunk_corners) continue;
    for (const TrunkCorner& c : *f.trunk_corners) {
      FrameCorners& fc = index[c.trunk][f.frame];
      fc.position.push_back(c.position);
      fc.flow.push_back(c.flow ? std::optional<Eigen::Vector2d>(c.flow->vec())
                               : std::nullopt);
    }
  }
  return index;
}

int Nearest(const std::vector<Eigen::Vector2d>& pts, const Eigen::Vector2d& q) {
  int best = -1;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double d = (pts[i] - q).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(i);
    }
  }
  return best;
}

}  // namespace

std::vector<TrunkTrack> BuildTrunkTracks(std::span<const FrameObservation> frames,
                                         const ImageSize& image,
                                         const TrunkTrackConfig& config) {
  config.Validate();
  const CornerIndex index = IndexCorners(frames);
  std::vector<TrunkTrack> out;
  for (const auto& [trunk, by_frame] : index) {
    auto has_span = [&](FrameIndex s) {
      for (int i = 0; i < config.span; ++i) {
        if (!by_frame.count(s + i)) return false;
      }
      return true;
    };
    std::optional<FrameIndex> start;
    if (auto it = config.start_frames.find(trunk); it != config.start_frames.end()) {
      if (has_span(it->second)) start = it->second;
    } else {
      for (const auto& [frame, fc] : by_frame) {
        const auto middle = std::count_if(
            fc.position.begin(), fc.position.end(),
            [&](const Eigen::Vector2d& p) { return InMiddleThird(p, image); });
        if (middle >= config.min_start_corners && has_span(frame)) {
          start = frame;
          break;
        }
      }
    }
    if (!start) continue;

    TrunkTrack track;
    track.trunk = trunk;
    track.start_frame = *start;
    const FrameCorners& first = by_frame.at(*start);
    for (std::size_t c = 0; c < first.position.size(); ++c) {
      if (!InMiddleThird(first.position[c], image)) continue;
      CornerTrack chain = {{*start, first.position[c]}};
      std::optional<Eigen::Vector2d> flow = first.flow[c];
      bool ok = true;
      for (int i = 1; i < config.span && ok; ++i) {
        const FrameIndex prev_frame = *start + i - 1;
        const FrameCorners& prev = by_frame.at(prev_frame);
        const FrameCorners& next = by_frame.at(*start + i);
        Eigen::Vector2d predicted = chain.back().second;
        double tolerance = config.max_flow_error;
        if (flow) {
          predicted += *flow;
        } else {
          // Fall back to the mean flow of the trunk's corners in this frame.
          Eigen::Vector2d sum = Eigen::Vector2d::Zero();
          int count = 0;
          for (const auto& f : prev.flow) {
            if (f) {
              sum += *f;
              ++count;
            }
          }
          if (count > 0) {
            predicted += sum / count;
          } else {
            tolerance = config.search_radius;
          }
        }
        const int j = Nearest(next.position, predicted);
        if (j < 0 || (next.position[j] - predicted).norm() > tolerance) {
          ok = false;
          break;
        }
        // Mutual check: the matched corner must pick this chain back.
        std::vector<Eigen::Vector2d> predictions(prev.position.size());
        for (std::size_t k = 0; k < prev.position.size(); ++k) {
          predictions[k] = prev.position[k] + (prev.flow[k] ? *prev.flow[k]
                                                            : predicted - chain.back().second);
        }
        const int back = Nearest(predictions, next.position[j]);
        if (back < 0 ||
            (prev.position[back] - chain.back().second).squaredNorm() > 1e-18) {
          ok = false;
          break;
        }
        chain.emplace_back(*start + i, next.position[j]);
        flow = next.flow[j];
      }
      if (ok) track.corner_tracks.push_back(std::move(chain));
    }
    if (!track.corner_tracks.empty()) out.push_back(std::move(track));
  }
  return out;
}

double TrunkDepthQ3(std::vector<double> depths) {
  if (depths.empty()) {
    throw Error(ErrorCode::kEmptyInput, "no depths for the third quartile");
  }
  std::sort(depths.begin(), depths.end());
  const double rank = 0.75 * static_cast<double>(depths.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(rank));
  const std::size_t hi = std::min(lo + 1, depths.size() - 1);
  const double frac = rank - static_cast<double>(lo);
  return depths[lo] + frac * (depths[hi] - depths[lo]);
}

void FillProfileGaps(std::map<FrameIndex, double>& depth_by_frame) {
  std::vector<std::pair<FrameIndex, double>> known(depth_by_frame.begin(),
                                                   depth_by_frame.end());
  for (std::size_t i = 0; i + 1 < known.size(); ++i) {
    const auto [f0, d0] = known[i];
    const auto [f1, d1] = known[i + 1];
    for (FrameIndex f = f0 + 1; f < f1; ++f) {
      const double t = static_cast<double>(f - f0) / static_cast<double>(f1 - f0);
      depth_by_frame[f] = d0 + t * (d1 - d0);
    }
  }
}

TrunkDepthProfile ComputeDepthProfile(const TrunkTrack& track,
                                      const Reconstruction& rec,
                                      double min_angle_deg) {
  std::vector<Eigen::Vector3d> points;
  for (const CornerTrack& chain : track.corner_tracks) {
    std::vector<ViewObservation> views;
    for (const auto& [frame, pixel] : chain) {
      auto it = rec.poses.find(frame);
      if (it != rec.poses.end()) views.push_back({it->second, pixel});
    }
    if (views.size() < 2) continue;
    try {
      points.push_back(Triangulate(views, rec.intrinsics, min_angle_deg));
    } catch (const Error&) {
      // Skipped: degenerate or behind a camera.
    }
  }
  if (points.empty()) {
    throw Error(ErrorCode::kEmptyProfile,
                "no corner of trunk " + std::to_string(track.trunk) +
                    " could be triangulated");
  }
  TrunkDepthProfile profile;
  profile.trunk = track.trunk;
  for (const Eigen::Vector3d& p : points) profile.position += p;
  profile.position /= static_cast<double>(points.size());
  for (const auto& [frame, pose] : rec.poses) {
    std::vector<double> depths;
    for (const Eigen::Vector3d& p : points) {
      const double d = CameraDepth(pose, p);
      if (d > 0.0) depths.push_back(d);
    }
    if (!depths.empty()) profile.depth_by_frame[frame] = TrunkDepthQ3(depths);
  }
  FillProfileGaps(profile.depth_by_frame);
  return profile;
}

namespace {

Eigen::Vector3d PrincipalAxis(const std::vector<Eigen::Vector3d>& pts) {
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (const auto& p : pts) mean += p;
  mean /= static_cast<double>(pts.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : pts) cov += (p - mean) * (p - mean).transpose();
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
  return eig.eigenvectors().col(2).normalized();
}

}  // namespace

Eigen::Vector3d RowAxis(std::span<const TrunkDepthProfile> profiles,
                        const Reconstruction& rec) {
  std::vector<Eigen::Vector3d> pts;
  if (profiles.size() >= 2) {
    for (const auto& p : profiles) pts.push_back(p.position);
  } else {
    for (const auto& [frame, pose] : rec.poses) pts.push_back(pose.Center());
  }
  if (pts.size() < 2) return Eigen::Vector3d::UnitX();
  return PrincipalAxis(pts);
}

std::size_t NearestTrunk(const Eigen::Vector3d& point,
                         std::span<const TrunkDepthProfile> profiles,
                         const Eigen::Vector3d& axis) {
  if (profiles.empty()) {
    throw Error(ErrorCode::kEmptyInput, "no trunk profiles");
  }
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    const double d = std::abs(axis.dot(point - profiles[i].position));
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

VoteTally CentroidVote(const Landmark& landmark, const TrunkDepthProfile& profile,
                       FrameIndex k, int window) {
  VoteTally tally;
  for (FrameIndex f = k - window; f <= k; ++f) {
    auto li = landmark.depth_by_frame.find(f);
    auto ti = profile.depth_by_frame.find(f);
    if (li == landmark.depth_by_frame.end() || ti == profile.depth_by_frame.end()) {
      continue;
    }
    if (li->second < ti->second) {
      ++tally.before;
    } else {
      ++tally.after;
    }
  }
  if (tally.before + tally.after == 0) {
    throw Error(ErrorCode::kNoOverlappingFrames,
                "landmark " + std::to_string(landmark.id) +
                    " shares no frame with the trunk profile");
  }
  return tally;
}

}  // namespace orchard
