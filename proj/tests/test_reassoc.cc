#include <doctest.h>

#include "orchard/error.h"
#include "orchard/reassoc.h"
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

// Reconstruction with the true east poses and one landmark per listed fruit.
Reconstruction TruthReconstruction(const OrchardScene& scene) {
  Reconstruction rec;
  rec.intrinsics = scene.intrinsics();
  for (std::size_t k = 0; k < scene.east_trajectory.size(); ++k) {
    rec.poses[static_cast<FrameIndex>(k)] = scene.east_trajectory[k];
  }
  rec.initial_pair = {0, static_cast<FrameIndex>(scene.east_trajectory.size()) - 1};
  return rec;
}

void AddLandmark(Reconstruction& rec, FruitId id, const Eigen::Vector3d& X) {
  rec.landmarks[id] = Landmark{id, X, 100.0, {}, {}};
}

}  // namespace

TEST_CASE("age cost examples") {
  const AgeCostParams p;
  CHECK(AgeCost(7, p) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(AgeCost(14, p) == 0.0);
  CHECK(AgeCost(100, p) == 0.0);
  CHECK(AgeCost(1, p) == doctest::Approx(13.0 / 14.0).epsilon(1e-15));
  for (int age = 1; age < 30; ++age) CHECK(AgeCost(age + 1, p) <= AgeCost(age, p));
  CHECK(CodeOf([&] { AgeCost(0, p); }) == ErrorCode::kInvalidArgument);
  CHECK(CodeOf([] { AgeCostParams{0, 0.5}.Validate(); }) == ErrorCode::kInvalidConfig);
}

TEST_CASE("landmark cost examples") {
  const AgeCostParams p;
  const Eigen::Vector2d c(100, 200);
  const Detection det{0, BoundingBox::Square(c, 400.0), 1.0};
  CHECK(LandmarkCost(c, 400.0, det, 14, p) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(LandmarkCost(c, 400.0, det, 7, p) == doctest::Approx(0.5).epsilon(1e-12));
  // Disjoint boxes: distance term plus a full overlap penalty.
  const Eigen::Vector2d far(100, 260);
  CHECK(LandmarkCost(far, 400.0, det, 14, p) ==
        doctest::Approx(3600.0 / 800.0 + 1.0).epsilon(1e-12));
  for (int age = 1; age < 20; ++age) {
    CHECK(LandmarkCost(far, 400.0, det, age + 1, p) <= LandmarkCost(far, 400.0, det, age, p));
  }
  // The gate admits a brand-new landmark on a coincident detection.
  const ReassocConfig config;
  CHECK(LandmarkCost(c, 400.0, det, 1, p) <= config.Gate());
  CHECK(config.Gate() == doctest::Approx(2.0 + 13.0 / 14.0));
}

TEST_CASE("noiseless sweep keeps every landmark") {
  const OrchardScene scene = GenerateScene(testing::SingleTreeConfig(), 1);
  const auto frames = Observations(SynthesizePass(scene, Pass::kEast));
  Reconstruction rec = TruthReconstruction(scene);
  for (const Fruit& f : scene.trees[0].fruits) AddLandmark(rec, f.id, f.position);
  const ReassocConfig config;
  const ReassocResult r = Reassociate(rec, frames, scene.image_size(), config);
  CHECK(r.discarded.empty());
  CHECK(r.reconstruction.landmarks.size() == rec.landmarks.size());
  std::map<FruitId, int> run_points;
  for (const FruitTrack& t : r.matches.tracks) {
    run_points[t.fruit_id] += static_cast<int>(t.points.size());
    for (std::size_t i = 1; i < t.points.size(); ++i) {
      CHECK(t.points[i].frame == t.points[i - 1].frame + 1);
    }
    // Matched positions are the fruit's own detections.
    const Eigen::Vector3d& X = scene.FindFruit(t.fruit_id).position;
    for (const TrackPoint& p : t.points) {
      CHECK((p.position - Project(scene.intrinsics(), rec.poses.at(p.frame), X)).norm() < 1e-9);
    }
  }
  for (const auto& [id, n] : run_points) {
    CHECK(n == r.match_counts.at(id));
    CHECK(n >= config.min_track_length);
  }
}

TEST_CASE("a fruit split by a dropout keeps one landmark") {
  SimulationConfig c = testing::SingleTreeConfig();
  c.noise.dropout_burst_min = 2;
  c.noise.dropout_burst_length = 2;
  c.noise.dropout_fraction = 0.5;
  const OrchardScene scene = GenerateScene(c, 2);
  const auto frames = Observations(SynthesizePass(scene, Pass::kEast));
  Reconstruction rec = TruthReconstruction(scene);
  std::map<FruitId, FruitId> duplicate_of;
  FruitId next = 1000000;
  for (const Fruit& f : scene.trees[0].fruits) {
    AddLandmark(rec, f.id, f.position);
    const FruitPassState& st = scene.pass_states.at({0, f.id});
    if (st.dropout_frames.empty()) continue;
    // The track resumed after the gap became a second, slightly offset landmark.
    AddLandmark(rec, next, f.position + Eigen::Vector3d(1e-4, -1e-4, 1e-4));
    duplicate_of[next++] = f.id;
  }
  REQUIRE(duplicate_of.size() >= 5);
  const ReassocResult r = Reassociate(rec, frames, scene.image_size(), ReassocConfig{});
  for (const auto& [dup, original] : duplicate_of) {
    const bool a = r.reconstruction.landmarks.count(original) > 0;
    const bool b = r.reconstruction.landmarks.count(dup) > 0;
    CHECK(a != b);
    const FruitId survivor = a ? original : dup;
    const FruitId loser = a ? dup : original;
    CHECK(r.match_counts.at(survivor) > r.match_counts.at(loser));
  }
  for (const Fruit& f : scene.trees[0].fruits) {
    if (!duplicate_of.count(f.id)) CHECK(r.reconstruction.landmarks.count(f.id) == 1);
  }
}

TEST_CASE("identical landmarks: the older claim wins every frame") {
  const OrchardScene scene = GenerateScene(testing::SingleTreeConfig(), 3);
  const Fruit& fruit = scene.trees[0].fruits[0];
  // Only this fruit's detections, so the two landmarks compete for one.
  std::vector<FrameObservation> frames;
  for (const SynthesizedFrame& f : SynthesizePass(scene, Pass::kEast)) {
    FrameObservation obs{f.observation.frame, {}, std::nullopt, std::nullopt};
    for (std::size_t i = 0; i < f.truth.size(); ++i) {
      if (f.truth[i] == fruit.id) obs.detections.push_back(f.observation.detections[i]);
    }
    frames.push_back(obs);
  }
  Reconstruction rec = TruthReconstruction(scene);
  AddLandmark(rec, 5, fruit.position);
  AddLandmark(rec, 9, fruit.position);
  const ReassocResult r = Reassociate(rec, frames, scene.image_size(), ReassocConfig{});
  // Equal ages tie-break to the first row; from then on age decides.
  CHECK(r.match_counts.at(5) > 0);
  CHECK(r.match_counts.at(9) == 0);
  CHECK(r.reconstruction.landmarks.count(5) == 1);
  CHECK(r.reconstruction.landmarks.count(9) == 0);
}

TEST_CASE("landmarks behind the camera never match") {
  const OrchardScene scene = GenerateScene(testing::SingleTreeConfig(), 4);
  const auto frames = Observations(SynthesizePass(scene, Pass::kEast));
  Reconstruction rec = TruthReconstruction(scene);
  const Fruit& fruit = scene.trees[0].fruits[0];
  AddLandmark(rec, fruit.id, fruit.position);
  // Mirror of the fruit through the first camera center.
  const Eigen::Vector3d C = rec.poses.at(0).Center();
  AddLandmark(rec, 77, 2.0 * C - fruit.position);
  const ReassocResult r = Reassociate(rec, frames, scene.image_size(), ReassocConfig{});
  CHECK(r.match_counts.at(77) == 0);
  CHECK(r.reconstruction.landmarks.count(77) == 0);
  CHECK(r.reconstruction.landmarks.count(fruit.id) == 1);
}

TEST_CASE("sweep never creates landmarks and prunes short tracks") {
  SimulationConfig c = testing::SingleTreeConfig();
  c.noise.detection_center_sigma = 1.0;
  c.noise.missed_detection_rate = 0.3;
  c.noise.spurious_detection_rate = 0.5;
  const OrchardScene scene = GenerateScene(c, 5);
  const auto frames = Observations(SynthesizePass(scene, Pass::kEast));
  Reconstruction rec = TruthReconstruction(scene);
  for (const Fruit& f : scene.trees[0].fruits) AddLandmark(rec, f.id, f.position);
  rec.observations.push_back({scene.trees[0].fruits[0].id, 0, {1, 1}, 1.0});
  ReassocConfig config;
  config.min_track_length = 10;
  const ReassocResult r = Reassociate(rec, frames, scene.image_size(), config);
  CHECK(r.reconstruction.landmarks.size() <= rec.landmarks.size());
  for (const auto& [id, lm] : r.reconstruction.landmarks) {
    CHECK(rec.landmarks.count(id) == 1);
    CHECK(r.match_counts.at(id) >= config.min_track_length);
  }
  for (FruitId id : r.discarded) CHECK(r.match_counts.at(id) < config.min_track_length);
  CHECK(r.discarded.size() + r.reconstruction.landmarks.size() == rec.landmarks.size());
  for (const FruitTrack& t : r.matches.tracks) CHECK(r.reconstruction.landmarks.count(t.fruit_id));
}

TEST_CASE("frames without a pose are rejected") {
  const OrchardScene scene = GenerateScene(testing::SingleTreeConfig(), 6);
  const auto frames = Observations(SynthesizePass(scene, Pass::kEast));
  Reconstruction rec = TruthReconstruction(scene);
  rec.poses.erase(7);
  CHECK(CodeOf([&] { Reassociate(rec, frames, scene.image_size(), ReassocConfig{}); }) ==
        ErrorCode::kMissingPose);
}
