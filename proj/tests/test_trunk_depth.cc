#include <doctest.h>

#include <algorithm>
#include <random>

#include "orchard/error.h"
#include "orchard/trunk_depth.h"
#include "test_support.h"

using namespace orchard;

namespace {

ErrorCode CodeOf(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kInvalidArgument;
}

const ImageSize kImage{720, 960};

// Frames 0..n-1 of one trunk: corners translate by (0, 2) per frame.
std::vector<FrameObservation> ShiftingCorners(const std::vector<Eigen::Vector2d>& start,
                                              int n) {
  std::vector<FrameObservation> frames;
  for (int k = 0; k < n; ++k) {
    std::vector<TrunkCorner> corners;
    for (const auto& p : start) {
      corners.push_back({0, p + Eigen::Vector2d(0, 2.0 * k), FlowVector{0.0, 2.0}});
    }
    frames.push_back({k, {}, std::nullopt, corners});
  }
  return frames;
}

std::vector<Eigen::Vector2d> MiddleColumn(int n) {
  std::vector<Eigen::Vector2d> pts;
  for (int i = 0; i < n; ++i) pts.emplace_back(100.0 + 40.0 * i, 480.0);
  return pts;
}

Reconstruction TruthPoses(const OrchardScene& scene, Pass pass) {
  Reconstruction rec;
  rec.intrinsics = scene.intrinsics();
  const auto& traj = scene.Trajectory(pass);
  for (std::size_t k = 0; k < traj.size(); ++k) rec.poses[static_cast<int>(k)] = traj[k];
  return rec;
}

Landmark LandmarkWithDepths(const std::map<FrameIndex, double>& depths) {
  Landmark lm;
  lm.id = 1;
  lm.depth_by_frame = depths;
  for (const auto& [f, d] : depths) lm.observed_frames.insert(f);
  return lm;
}

TrunkDepthProfile ConstantProfile(double depth, int first, int last) {
  TrunkDepthProfile p;
  for (int f = first; f <= last; ++f) p.depth_by_frame[f] = depth;
  return p;
}

std::map<FrameIndex, double> Constant(double depth, int first, int last) {
  std::map<FrameIndex, double> m;
  for (int f = first; f <= last; ++f) m[f] = depth;
  return m;
}

}  // namespace

TEST_CASE("simulated corner tracks follow the true corners") {
  const OrchardScene scene = GenerateScene(testing::TwoSideConfig(), 1);
  const auto frames = Observations(SynthesizePass(scene, Pass::kEast));
  const auto tracks = BuildTrunkTracks(frames, scene.image_size(), TrunkTrackConfig{});
  REQUIRE(tracks.size() == scene.trees.size());
  for (const TrunkTrack& track : tracks) {
    const Tree& tree = scene.trees.at(track.trunk);
    CHECK(!track.corner_tracks.empty());
    for (const CornerTrack& chain : track.corner_tracks) {
      REQUIRE(chain.size() == 4);
      CHECK(chain.front().first == track.start_frame);
      CHECK(InMiddleThird(chain.front().second, scene.image_size()));
      // Identify the corner in the start frame, then follow it.
      const CameraPose& first_pose = scene.east_trajectory[chain.front().first];
      const auto it = std::find_if(tree.corners.begin(), tree.corners.end(), [&](const auto& X) {
        return (Project(scene.intrinsics(), first_pose, X) - chain.front().second).norm() < 1e-9;
      });
      REQUIRE(it != tree.corners.end());
      for (std::size_t i = 0; i < chain.size(); ++i) {
        CHECK(chain[i].first == track.start_frame + static_cast<int>(i));
        const Eigen::Vector2d truth =
            Project(scene.intrinsics(), scene.east_trajectory[chain[i].first], *it);
        CHECK((chain[i].second - truth).norm() < 1e-9);
      }
    }
  }
}

TEST_CASE("start-frame corners outside the middle third are excluded") {
  auto start = MiddleColumn(12);
  start.emplace_back(300.0, 0.1 * 960.0);
  const auto tracks = BuildTrunkTracks(ShiftingCorners(start, 6), kImage, TrunkTrackConfig{});
  REQUIRE(tracks.size() == 1);
  CHECK(tracks[0].start_frame == 0);
  CHECK(tracks[0].corner_tracks.size() == 12);
  for (const CornerTrack& chain : tracks[0].corner_tracks) {
    CHECK(chain.front().second.y() == 480.0);
  }
}

TEST_CASE("span rule and start frame selection") {
  const auto frames = ShiftingCorners(MiddleColumn(12), 6);
  // Three frames left after frame 3.
  TrunkTrackConfig late;
  late.start_frames = {{0, 3}};
  CHECK(BuildTrunkTracks(frames, kImage, late).empty());
  TrunkTrackConfig ok;
  ok.start_frames = {{0, 2}};
  REQUIRE(BuildTrunkTracks(frames, kImage, ok).size() == 1);
  CHECK(BuildTrunkTracks(frames, kImage, ok)[0].start_frame == 2);
  // Too short a sequence starts nothing.
  CHECK(BuildTrunkTracks(ShiftingCorners(MiddleColumn(12), 3), kImage, TrunkTrackConfig{})
            .empty());
  // Too few middle-third corners.
  CHECK(BuildTrunkTracks(ShiftingCorners(MiddleColumn(9), 6), kImage, TrunkTrackConfig{})
            .empty());
}

TEST_CASE("corners whose flow misses by more than a pixel are dropped") {
  auto frames = ShiftingCorners(MiddleColumn(12), 4);
  (*frames[0].trunk_corners)[5].flow = FlowVector{0.0, 3.5};
  const auto tracks = BuildTrunkTracks(frames, kImage, TrunkTrackConfig{});
  REQUIRE(tracks.size() == 1);
  CHECK(tracks[0].corner_tracks.size() == 11);
}

TEST_CASE("third quartile examples") {
  CHECK(TrunkDepthQ3({2, 4, 6, 8}) == doctest::Approx(6.5).epsilon(1e-15));
  CHECK(TrunkDepthQ3({5}) == 5.0);
  std::vector<double> v = {3.1, 0.2, 9.9, 4.4, 7.0, 1.5, 2.2};
  const double q = TrunkDepthQ3(v);
  std::sort(v.begin(), v.end());
  do {
    CHECK(TrunkDepthQ3(v) == q);
  } while (std::next_permutation(v.begin(), v.end()));
  CHECK(CodeOf([] { TrunkDepthQ3({}); }) == ErrorCode::kEmptyInput);
}

TEST_CASE("gap filling interpolates linearly") {
  std::map<FrameIndex, double> d = {{10, 2.0}, {14, 4.0}};
  FillProfileGaps(d);
  CHECK(d.size() == 5);
  CHECK(d.at(12) == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(d.at(11) == doctest::Approx(2.5).epsilon(1e-15));
  CHECK(!d.count(9));
  CHECK(!d.count(15));
}

TEST_CASE("noiseless depth profile matches the true trunk depth") {
  const OrchardScene scene = GenerateScene(testing::TwoSideConfig(), 2);
  const auto frames = Observations(SynthesizePass(scene, Pass::kEast));
  const Reconstruction rec = TruthPoses(scene, Pass::kEast);
  for (const TrunkTrack& track : BuildTrunkTracks(frames, scene.image_size(), TrunkTrackConfig{})) {
    const TrunkDepthProfile profile = ComputeDepthProfile(track, rec);
    const Tree& tree = scene.trees.at(track.trunk);
    CHECK(profile.depth_by_frame.size() == rec.poses.size());
    for (const auto& [frame, depth] : profile.depth_by_frame) {
      std::vector<double> truth;
      for (const auto& X : tree.corners) truth.push_back(CameraDepth(rec.poses.at(frame), X));
      const double trunk_line = TrunkDepthQ3(truth);
      CHECK(depth > 0.0);
      CHECK(std::abs(depth - trunk_line) < 0.01 * trunk_line);
    }
  }
}

TEST_CASE("zero baseline leaves the profile empty") {
  const auto frames = ShiftingCorners(MiddleColumn(12), 4);
  TrunkTrack track;
  track.trunk = 0;
  for (const auto& p : MiddleColumn(12)) {
    CornerTrack chain;
    for (int k = 0; k < 4; ++k) chain.emplace_back(k, p);
    track.corner_tracks.push_back(chain);
  }
  Reconstruction rec;
  rec.intrinsics = {700, 700, 360, 480};
  for (int k = 0; k < 4; ++k) rec.poses[k] = CameraPose::Identity();
  CHECK(CodeOf([&] { ComputeDepthProfile(track, rec); }) == ErrorCode::kEmptyProfile);
}

TEST_CASE("centroid vote examples") {
  const TrunkDepthProfile trunk = ConstantProfile(2.0, 0, 40);
  const VoteTally near = CentroidVote(LandmarkWithDepths(Constant(1.0, 0, 40)), trunk, 20);
  CHECK(near.before == 16);
  CHECK(near.after == 0);
  CHECK(near.counted());
  CHECK(!CentroidVote(LandmarkWithDepths(Constant(3.0, 0, 40)), trunk, 20).counted());
  // Equal depth votes after.
  CHECK(!CentroidVote(LandmarkWithDepths(Constant(2.0, 0, 40)), trunk, 20).counted());

  std::map<FrameIndex, double> split;
  for (int f = 5; f <= 20; ++f) split[f] = f <= 12 ? 1.0 : 3.0;
  const VoteTally tie = CentroidVote(LandmarkWithDepths(split), trunk, 20);
  CHECK(tie.before == 8);
  CHECK(tie.after == 8);
  CHECK(!tie.counted());

  // The window is truncated at the sequence start.
  const VoteTally early = CentroidVote(LandmarkWithDepths(Constant(1.0, 0, 40)), trunk, 3);
  CHECK(early.before == 4);
  CHECK(CodeOf([&] {
          CentroidVote(LandmarkWithDepths(Constant(1.0, 50, 60)), trunk, 55);
        }) == ErrorCode::kNoOverlappingFrames);
}

TEST_CASE("votes are scale invariant and monotone in landmark depth") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.5, 4.0);
  for (int t = 0; t < 200; ++t) {
    std::map<FrameIndex, double> lm, tr;
    for (int f = 0; f < 30; ++f) {
      lm[f] = u(rng);
      tr[f] = u(rng);
    }
    TrunkDepthProfile trunk;
    trunk.depth_by_frame = tr;
    const bool counted = CentroidVote(LandmarkWithDepths(lm), trunk, 25).counted();

    const double s = 0.01 + 10.0 * u(rng);
    std::map<FrameIndex, double> lm_s = lm;
    TrunkDepthProfile trunk_s = trunk;
    for (auto& [f, d] : lm_s) d *= s;
    for (auto& [f, d] : trunk_s.depth_by_frame) d *= s;
    CHECK(CentroidVote(LandmarkWithDepths(lm_s), trunk_s, 25).counted() == counted);

    std::map<FrameIndex, double> closer = lm;
    for (auto& [f, d] : closer) d *= 0.5 + 0.5 * (u(rng) - 0.5) / 3.5;
    if (counted) CHECK(CentroidVote(LandmarkWithDepths(closer), trunk, 25).counted());
  }
}

TEST_CASE("a far-side fruit is counted by exactly one pass") {
  const OrchardScene scene = GenerateScene(testing::TwoSideConfig(), 4);
  const Tree& tree = scene.trees[1];
  const Eigen::Vector3d trunk_point = 0.5 * (tree.trunk_base + tree.trunk_top);
  const Eigen::Vector3d away =
      (trunk_point - scene.east_trajectory.front().Center()).cwiseProduct(Eigen::Vector3d(0, 1, 0)).normalized();
  const Eigen::Vector3d fruit = trunk_point + 0.3 * away + Eigen::Vector3d(0, 0, 0.4);

  int counted = 0;
  for (Pass pass : {Pass::kEast, Pass::kWest}) {
    const auto frames = Observations(SynthesizePass(scene, pass));
    const Reconstruction rec = TruthPoses(scene, pass);
    const auto tracks = BuildTrunkTracks(frames, scene.image_size(), TrunkTrackConfig{});
    std::vector<TrunkDepthProfile> profiles;
    for (const auto& t : tracks) profiles.push_back(ComputeDepthProfile(t, rec));
    const Eigen::Vector3d axis = RowAxis(profiles, rec);
    const TrunkDepthProfile& profile = profiles.at(NearestTrunk(fruit, profiles, axis));
    CHECK(profile.trunk == tree.id);

    // Observed while the fruit projects into the image.
    std::map<FrameIndex, double> depths;
    for (const auto& [k, pose] : rec.poses) {
      if (CameraDepth(pose, fruit) <= 0) continue;
      if (scene.image_size().Contains(Project(rec.intrinsics, pose, fruit))) {
        depths[k] = CameraDepth(pose, fruit);
      }
    }
    REQUIRE(!depths.empty());
    const FrameIndex last = depths.rbegin()->first;
    counted += CentroidVote(LandmarkWithDepths(depths), profile, last).counted();
  }
  CHECK(counted == 1);
}
