#include <doctest.h>

#include <random>
#include <set>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "orchard/assignment.h"
#include "orchard/error.h"
#include "orchard/tracker2d.h"
#include "test_support.h"

using namespace orchard;

namespace {

Detection Det(FrameIndex k, Eigen::Vector2d c, double size = 10.0) {
  return Detection{k, BoundingBox(c, size, size), 1.0};
}

}  // namespace

TEST_CASE("mean flow") {
  const std::vector<FlowVector> two{{1, 2}, {3, 4}};
  CHECK(MeanFlow(two).du == doctest::Approx(2.0));
  CHECK(MeanFlow(two).dv == doctest::Approx(3.0));
  const std::vector<FlowVector> one{{5, 5}};
  CHECK(MeanFlow(one).du == 5.0);
  MeanFlowEstimator est;
  est.Update(std::vector<FlowVector>{{2, 0}});
  const FlowVector empty = est.Update({});
  CHECK(empty.du == 2.0);
  CHECK(empty.dv == 0.0);
  MeanFlowEstimator fresh;
  CHECK(fresh.Update({}).norm() == 0.0);
}

TEST_CASE("track cost") {
  const BoundingBox box({10, 10}, 5, 5);
  CHECK(TrackCost({10, 10}, box, Detection{0, box, 1.0}) == doctest::Approx(0.0));
  // Area 25 boxes, thin along v so the (3, 4) offset leaves them disjoint.
  const BoundingBox thin({0, 0}, 1, 25);
  const Detection det{0, BoundingBox({13, 14}, 1, 25), 1.0};
  CHECK(TrackCost({10, 10}, thin, det) == doctest::Approx(1.5));
  const BoundingBox wide({0, 0}, 2, 25);
  const Detection det2{0, BoundingBox({13, 14}, 2, 25), 1.0};
  CHECK(TrackCost({10, 10}, wide, det2) == doctest::Approx(1.25));
}

TEST_CASE("hungarian examples") {
  Eigen::MatrixXd c(2, 2);
  c << 1, 2, 2, 1;
  const Assignment a = HungarianAssign(c);
  CHECK(a == Assignment{{0, 0}, {1, 1}});
  CHECK(AssignmentCost(c, a) == 2.0);
  c << 1, 1, 1, 1;
  CHECK(HungarianAssign(c) == Assignment{{0, 0}, {1, 1}});
  c << 1, 5, 5, 3;
  CHECK(HungarianAssign(c, 2.0) == Assignment{{0, 0}});
}

TEST_CASE("hungarian matches exhaustive search on random 4x6 matrices") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (int t = 0; t < 100; ++t) {
    Eigen::MatrixXd c(4, 6);
    for (int i = 0; i < c.size(); ++i) c(i) = u(rng);
    const Assignment a = HungarianAssign(c);
    CHECK(a.size() == 4);
    CHECK(AssignmentCost(c, a) == doctest::Approx(testing::BruteForceAssignmentCost(c)).epsilon(1e-12));
  }
}

TEST_CASE("raising the gate never reduces the number of matches") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 4.0);
  std::uniform_int_distribution<int> dim(1, 6);
  for (int t = 0; t < 300; ++t) {
    Eigen::MatrixXd c(dim(rng), dim(rng));
    for (int i = 0; i < c.size(); ++i) c(i) = u(rng);
    std::size_t prev = 0;
    for (double gate : {0.5, 1.0, 2.0, 3.0, 5.0}) {
      const Assignment a = HungarianAssign(c, gate);
      for (const auto& [i, j] : a) CHECK(c(i, j) <= gate);
      CHECK(a.size() >= prev);
      prev = a.size();
    }
  }
}

TEST_CASE("kf initialize and predict") {
  const Eigen::Vector4d p0(9, 9, 4, 4);
  const TrackState s = KfInitialize(Det(0, {100, 200}), FlowVector{2, -1}, p0);
  CHECK(s.x == Eigen::Vector4d(100, 200, 2, -1));
  CHECK(KfInitialize(Det(0, {100, 200}), FlowVector{}, p0).velocity().norm() == 0.0);
  CHECK(KfInitialize(Det(0, {1, 2}), FlowVector{3, 4}, p0).x ==
        KfInitialize(Det(0, {1, 2}), FlowVector{3, 4}, p0).x);

  const KfModel model = KfModel::Default();
  TrackState a = s;
  a.x << 0, 0, 1, 1;
  CHECK(KfPredict(a, model).x == Eigen::Vector4d(1, 1, 1, 1));
  a.x << 5, 5, 0, 0;
  CHECK(KfPredict(a, model).x == Eigen::Vector4d(5, 5, 0, 0));

  std::mt19937_64 rng(3);
  for (int t = 0; t < 50; ++t) {
    a.P = testing::RandomSpd(rng);
    const double expect = (model.A * a.P * model.A.transpose()).trace() + model.Q.trace();
    CHECK(KfPredict(a, model).P.trace() == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("build measurement") {
  const Measurement m = BuildMeasurement({1, 2}, {1, 2}, FlowVector{0, 3}, FlowVector{4, 0});
  CHECK((m.z - (Vector6d() << 1, 2, 1, 2, 0, 4).finished()).norm() < 1e-12);
  CHECK_FALSE(m.velocity_degenerate);
  const Measurement z = BuildMeasurement({1, 2}, {1, 2}, FlowVector{0, 0}, FlowVector{4, 0});
  CHECK(z.velocity_degenerate);
  CHECK(z.z.tail<2>().norm() == 0.0);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-5, 5);
  for (int t = 0; t < 100; ++t) {
    const FlowVector last{u(rng), u(rng)};
    const Measurement r = BuildMeasurement({0, 0}, {0, 0}, FlowVector{u(rng), u(rng)}, last);
    CHECK(r.z.tail<2>().norm() == doctest::Approx(last.norm()).epsilon(1e-12));
  }
}

TEST_CASE("kf update fixtures") {
  const KfModel model = KfModel::Default();
  TrackState prior = KfInitialize(Det(0, {10, 20}), FlowVector{1, 2}, {9, 9, 4, 4});
  const Vector6d z = model.H * prior.x;
  CHECK((KfUpdate(prior, z, model).x - prior.x).norm() < 1e-12);

  TrackState tiny = prior;
  tiny.P = 1e-10 * Eigen::Matrix4d::Identity();
  const Vector6d far = (Vector6d() << 50, 60, 70, 80, 9, 9).finished();
  CHECK((KfUpdate(tiny, far, model).x - prior.x).norm() < 1e-6);

  TrackState singular = prior;
  singular.P.setZero();
  KfModel bad = model;
  bad.R.diagonal() << 1, 1, 1, 1, 1, 1e-14;
  CHECK_THROWS_AS(KfUpdate(singular, z, bad), Error);
}

TEST_CASE("kf step matches a textbook implementation") {
  const TrackerConfig cfg;
  const KfModel model = cfg.Model();
  const testing::TextbookKf oracle(cfg.process_noise, cfg.measurement_noise);
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-50, 50);
  for (int t = 0; t < 100; ++t) {
    TrackState s;
    s.x << u(rng), u(rng), u(rng) / 10, u(rng) / 10;
    s.P = testing::RandomSpd(rng);
    Vector6d z;
    for (int i = 0; i < 6; ++i) z(i) = u(rng);
    const TrackState post = KfUpdate(KfPredict(s, model), z, model);
    Eigen::VectorXd x = s.x;
    Eigen::MatrixXd P = s.P;
    oracle.Step(x, P, z);
    CHECK((post.x - x).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((post.P - P).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("covariance contracts and stays positive definite over 1000 cycles") {
  const KfModel model = KfModel::Default();
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n(0.0, 3.0);
  TrackState s = KfInitialize(Det(0, {0, 0}), FlowVector{1, 1}, {9, 9, 4, 4});
  for (int k = 0; k < 1000; ++k) {
    const TrackState prior = KfPredict(s, model);
    Vector6d z = model.H * prior.x;
    for (int i = 0; i < 6; ++i) z(i) += n(rng);
    s = KfUpdate(prior, z, model);
    CHECK(s.P.trace() <= prior.P.trace());
    CHECK((s.P - s.P.transpose()).norm() == 0.0);
    CHECK(Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d>(s.P).eigenvalues().minCoeff() > 0.0);
  }
}

TEST_CASE("a static detection yields one track at its center") {
  std::vector<FrameObservation> frames;
  for (int k = 0; k < 10; ++k) {
    FrameObservation f;
    f.frame = k;
    f.detections = {Det(k, {300, 400})};
    f.flows = std::vector<FlowVector>{{0, 0}};
    frames.push_back(f);
  }
  const TrackingResult r = RunTracking(frames, TrackerConfig{});
  REQUIRE(r.matches.tracks.size() == 1);
  CHECK(r.matches.tracks[0].points.size() == 10);
  for (const TrackPoint& p : r.matches.tracks[0].points) {
    CHECK((p.position - Eigen::Vector2d(300, 400)).norm() < 1e-6);
  }
}

TEST_CASE("two separated fruits keep their identities; a dropout splits a track") {
  std::vector<FrameObservation> frames;
  for (int k = 0; k < 12; ++k) {
    FrameObservation f;
    f.frame = k;
    const Eigen::Vector2d a(200, 100 + 20.0 * k), b(500, 150 + 20.0 * k);
    f.detections.push_back(Det(k, a));
    f.flows = std::vector<FlowVector>{{0, 20}};
    if (k != 6) {
      f.detections.push_back(Det(k, b));
      f.flows->push_back({0, 20});
    }
    frames.push_back(f);
  }
  const TrackingResult r = RunTracking(frames, TrackerConfig{});
  REQUIRE(r.matches.tracks.size() == 3);
  int a_tracks = 0, b_tracks = 0;
  for (const FruitTrack& t : r.matches.tracks) {
    const double row = t.points.front().detection_center.x();
    for (const TrackPoint& p : t.points) CHECK(p.detection_center.x() == row);
    for (std::size_t i = 1; i < t.points.size(); ++i) {
      CHECK(t.points[i].frame == t.points[i - 1].frame + 1);
    }
    (row == 200 ? a_tracks : b_tracks)++;
  }
  CHECK(a_tracks == 1);
  CHECK(b_tracks == 2);
}

TEST_CASE("noiseless simulator: one track per fruit visible for three frames") {
  const OrchardScene scene = GenerateScene(testing::SingleTreeConfig(), 5);
  const auto frames = SynthesizePass(scene, Pass::kEast);
  std::map<FruitId, int> visible;
  for (const auto& f : frames) {
    for (FruitId id : f.truth) ++visible[id];
  }
  int expected = 0;
  for (const auto& [id, n] : visible) expected += n >= 3;
  const TrackingResult r = RunTracking(Observations(frames), TrackerConfig{});
  CHECK(static_cast<int>(r.matches.tracks.size()) == expected);
  // Every track follows exactly one fruit.
  std::set<FruitId> fruits;
  for (const FruitTrack& t : r.matches.tracks) {
    std::set<FruitId> ids;
    for (const TrackPoint& p : t.points) {
      const auto& f = frames[p.frame];
      for (std::size_t i = 0; i < f.truth.size(); ++i) {
        if (f.observation.detections[i].center() == p.detection_center) ids.insert(f.truth[i]);
      }
    }
    CHECK(ids.size() == 1);
    fruits.insert(*ids.begin());
  }
  CHECK(fruits.size() == r.matches.tracks.size());
}
