#include <doctest.h>

#include <random>

#include <Eigen/Geometry>

#include "orchard/core_model.h"
#include "orchard/error.h"
#include "test_support.h"

using namespace orchard;

namespace {

const CameraIntrinsics kIntr{100.0, 100.0, 50.0, 50.0};

ErrorCode CodeOf(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kInvalidArgument;
}

}  // namespace

TEST_CASE("project on and off the optical axis") {
  const CameraPose id;
  CHECK((Project(kIntr, id, {0, 0, 2}) - Eigen::Vector2d(50, 50)).norm() < 1e-12);
  CHECK((Project(kIntr, id, {1, 0, 2}) - Eigen::Vector2d(100, 50)).norm() < 1e-12);
  CHECK(CodeOf([&] { Project(kIntr, id, {0, 0, -1}); }) == ErrorCode::kNonPositiveDepth);
}

TEST_CASE("reprojection error is the squared distance") {
  CHECK(ReprojectionError({3, 4}, {3, 4}) == 0.0);
  CHECK(ReprojectionError({0, 0}, {3, 4}) == doctest::Approx(25.0));
  CHECK(ReprojectionError({1, 1}, {2, 3}) == doctest::Approx(5.0));
}

TEST_CASE("camera depth") {
  CHECK(CameraDepth(CameraPose(), {0, 0, 5}) == doctest::Approx(5.0));
  CHECK(CameraDepth(CameraPose(Eigen::Matrix3d::Identity(), {0, 0, -2}), {0, 0, 5}) ==
        doctest::Approx(3.0));
  // Rotation taking world x onto camera z, checked against the explicit product.
  Eigen::Matrix3d R;
  R << 0, 1, 0, 0, 0, 1, 1, 0, 0;
  const Eigen::Vector3d X(4, 0, 0);
  CHECK((R * X).z() == doctest::Approx(4.0));
  CHECK(CameraDepth(CameraPose(R, Eigen::Vector3d::Zero()), X) == doctest::Approx(4.0));
}

TEST_CASE("box overlap") {
  const BoundingBox a({0, 0}, 1, 1);
  CHECK(BoxOverlap(a, a) == doctest::Approx(1.0));
  CHECK(BoxOverlap(a, BoundingBox({5, 5}, 1, 1)) == 0.0);
  CHECK(BoxOverlap(a, BoundingBox({0.5, 0}, 1, 1)) == doctest::Approx(0.5 / 1.5));
  CHECK(CodeOf([] { BoundingBox({0, 0}, 0.0, 1.0); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("projection round trip and overlap symmetry over random inputs") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const CameraIntrinsics intr{700, 700, 360, 480};
  for (int i = 0; i < 200; ++i) {
    const CameraPose pose(testing::RandomRotation(rng, 3.0), {u(rng), u(rng), u(rng)});
    Eigen::Vector3d X = pose.rotation().transpose() *
                        (Eigen::Vector3d(u(rng), u(rng), 3.0 + u(rng)) - pose.translation());
    const Eigen::Vector2d p = Project(intr, pose, X);
    const double depth = CameraDepth(pose, X);
    const Eigen::Vector2d n = intr.Normalize(p);
    const Eigen::Vector3d back =
        pose.rotation().transpose() * (depth * Eigen::Vector3d(n.x(), n.y(), 1.0) -
                                       pose.translation());
    CHECK((back - X).norm() < 1e-9);
    CHECK(ReprojectionError(p, p) == 0.0);
    CHECK(ReprojectionError(p, p + Eigen::Vector2d(u(rng), u(rng))) >= 0.0);

    // Depth is unchanged by a roll about the camera axis applied after the pose.
    const Eigen::Matrix3d roll =
        Eigen::AngleAxisd(3.0 * u(rng), Eigen::Vector3d::UnitZ()).toRotationMatrix();
    const CameraPose rolled(roll * pose.rotation(), roll * pose.translation());
    CHECK(CameraDepth(rolled, X) == doctest::Approx(depth).epsilon(1e-12));

    const BoundingBox a({u(rng), u(rng)}, 1.0 + u(rng) * 0.5, 1.0 + u(rng) * 0.5);
    const BoundingBox b({u(rng), u(rng)}, 1.0 + u(rng) * 0.5, 1.0 + u(rng) * 0.5);
    CHECK(BoxOverlap(a, b) == BoxOverlap(b, a));
  }
}

TEST_CASE("pose construction rejects non-rotations") {
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  R(0, 1) = 2e-9;
  CHECK(CodeOf([&] { CameraPose(R, Eigen::Vector3d::Zero()); }) ==
        ErrorCode::kInvalidArgument);
  R = Eigen::Matrix3d::Identity();
  R(2, 2) = -1.0;
  CHECK(CodeOf([&] { CameraPose(R, Eigen::Vector3d::Zero()); }) ==
        ErrorCode::kInvalidArgument);
  R = Eigen::Matrix3d::Identity();
  R(0, 1) = 1e-10;
  CHECK_NOTHROW(CameraPose(R, Eigen::Vector3d::Zero()));
}
