#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "gsrefine/geometry.hpp"
#include "test_util.hpp"

using namespace gsrefine;
using testutil::random_pose;
using testutil::random_rotation;

namespace {
const CameraIntrinsics kCam{100.0, 100.0, 160.0, 120.0, 320, 240};
}

TEST_CASE("project: principal-axis point lands on the principal point") {
  const auto p = project(kCam, Pose{}, {0, 0, 5});
  REQUIRE(p.has_value());
  CHECK(p->pixel.x() == doctest::Approx(160).epsilon(1e-12));
  CHECK(p->pixel.y() == doctest::Approx(120).epsilon(1e-12));
  CHECK(p->depth == doctest::Approx(5).epsilon(1e-12));
}

TEST_CASE("project: unit lateral offset maps through fx/Z") {
  const auto p = project(kCam, Pose{}, {1, 0, 5});
  REQUIRE(p.has_value());
  CHECK(p->pixel.x() == doctest::Approx(180).epsilon(1e-12));
  CHECK(p->pixel.y() == doctest::Approx(120).epsilon(1e-12));
}

TEST_CASE("project: behind-camera point is an explicit non-value") {
  CHECK_FALSE(project(kCam, Pose{}, {0, 0, -1}).has_value());
  CHECK_FALSE(project(kCam, Pose{}, {0, 0, 0}).has_value());
}

TEST_CASE("backproject: principal axis and projection inverse") {
  const Eigen::Vector3d x = backproject(kCam, Pose{}, {160, 120}, 7.0);
  CHECK((x - Eigen::Vector3d(0, 0, 7)).norm() < 1e-12);
  const Eigen::Vector3d y = backproject(kCam, Pose{}, {180, 120}, 5.0);
  CHECK((y - Eigen::Vector3d(1, 0, 5)).norm() < 1e-12);
}

TEST_CASE("backproject rejects non-positive depth") {
  CHECK_THROWS_AS(backproject(kCam, Pose{}, {160, 120}, 0.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(backproject(kCam, Pose{}, {160, 120}, -1.0),
                  std::invalid_argument);
}

TEST_CASE("project/backproject round-trips 1000 random samples") {
  Rng rng(42);
  for (int i = 0; i < 1000; ++i) {
    const Pose pose = random_pose(rng);
    const Eigen::Vector2d px(rng.uniform(0.0, 319.0), rng.uniform(0.0, 239.0));
    const double depth = rng.uniform(0.1, 50.0);
    const Eigen::Vector3d world = backproject(kCam, pose, px, depth);
    const auto back = project(kCam, pose, world);
    REQUIRE(back.has_value());
    CHECK((back->pixel - px).norm() < 1e-9);
    CHECK(std::abs(back->depth - depth) < 1e-9);
  }
}

TEST_CASE("compose/inverse identities") {
  Rng rng(7);
  const Pose p = random_pose(rng);
  const Pose id;

  const Pose left = compose(id, p);
  CHECK(rotation_error_deg(left, p) < 1e-12);
  CHECK((left.translation - p.translation).norm() < 1e-12);

  const Pose round = compose(p, inverse(p));
  CHECK(rotation_error_deg(round, id) < 1e-9);
  CHECK(round.translation.norm() < 1e-9);
}

TEST_CASE("two 90-degree z rotations compose to 180 degrees") {
  const Pose rz90{Rotation::axis_angle({0, 0, 1}, M_PI / 2),
                  Eigen::Vector3d::Zero()};
  const Pose both = compose(rz90, rz90);
  const Pose rz180{Rotation::axis_angle({0, 0, 1}, M_PI),
                   Eigen::Vector3d::Zero()};
  CHECK(rotation_error_deg(both, rz180) < 1e-12);
}

TEST_CASE("compose is associative") {
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    const Pose a = random_pose(rng), b = random_pose(rng),
               c = random_pose(rng);
    const Pose ab_c = compose(compose(a, b), c);
    const Pose a_bc = compose(a, compose(b, c));
    CHECK(rotation_error_deg(ab_c, a_bc) < 1e-9);
    CHECK((ab_c.translation - a_bc.translation).norm() < 1e-9);
  }
}

TEST_CASE("pose errors: identical, rotation-only, center-offset cases") {
  Rng rng(9);
  const Pose p = random_pose(rng);
  CHECK(rotation_error_deg(p, p) == doctest::Approx(0).epsilon(1e-12));
  CHECK(translation_error(p, p) == doctest::Approx(0).epsilon(1e-12));

  const Pose rot10 = Pose::from_center(
      Rotation::axis_angle({0, 0, 1}, 10 * M_PI / 180) * p.rotation,
      p.center());
  CHECK(rotation_error_deg(p, rot10) == doctest::Approx(10).epsilon(1e-9));
  CHECK(translation_error(p, rot10) < 1e-12);

  const Pose shifted =
      Pose::from_center(p.rotation, p.center() + Eigen::Vector3d(3, 4, 0));
  CHECK(rotation_error_deg(p, shifted) < 1e-9);
  CHECK(translation_error(p, shifted) == doctest::Approx(5).epsilon(1e-12));
}

TEST_CASE("rotation_error_deg is symmetric and satisfies the triangle inequality") {
  Rng rng(21);
  for (int i = 0; i < 300; ++i) {
    const Pose a = random_pose(rng), b = random_pose(rng),
               c = random_pose(rng);
    CHECK(std::abs(rotation_error_deg(a, b) - rotation_error_deg(b, a)) <
          1e-9);
    CHECK(rotation_error_deg(a, c) <=
          rotation_error_deg(a, b) + rotation_error_deg(b, c) + 1e-6);
  }
}

TEST_CASE("quaternion/matrix round-trip preserves rotation") {
  Rng rng(1234);
  for (int i = 0; i < 10000; ++i) {
    const Rotation r = random_rotation(rng);
    const Rotation back = Rotation::from_matrix(r.matrix());
    CHECK(r.angle_to(back) < 1e-9);
  }
}

TEST_CASE("rotation matrices are orthonormal with unit determinant") {
  Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    const Eigen::Matrix3d m = random_rotation(rng).matrix();
    CHECK((m * m.transpose() - Eigen::Matrix3d::Identity()).norm() < 1e-9);
    CHECK(m.determinant() == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("jitter: zero magnitudes return the pose exactly") {
  Rng rng(8);
  const Pose p = random_pose(rng);
  const Pose j = jitter(p, 0, 0, 99);
  CHECK(rotation_error_deg(p, j) == doctest::Approx(0).epsilon(1e-13));
  CHECK(translation_error(p, j) == doctest::Approx(0).epsilon(1e-13));
}

TEST_CASE("jitter magnitudes are exact as constructed") {
  Rng rng(8);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Pose p = random_pose(rng);
    const Pose jr = jitter(p, 10.0, 0.0, seed);
    CHECK(rotation_error_deg(p, jr) == doctest::Approx(10.0).epsilon(1e-7));
    CHECK(translation_error(p, jr) < 1e-9);
    const Pose jt = jitter(p, 0.0, 2.5, seed);
    CHECK(translation_error(p, jt) == doctest::Approx(2.5).epsilon(1e-7));
    CHECK(rotation_error_deg(p, jt) < 1e-9);
  }
}

TEST_CASE("jitter is deterministic per seed") {
  Rng rng(31);
  const Pose p = random_pose(rng);
  const Pose a = jitter(p, 5, 1, 7), b = jitter(p, 5, 1, 7);
  CHECK(a.translation == b.translation);
  CHECK(a.rotation.quat().coeffs() == b.rotation.quat().coeffs());
  const Pose c = jitter(p, 5, 1, 8);
  CHECK(rotation_error_deg(a, c) > 1e-3);  // different seed, different axis
}

TEST_CASE("pose text format round-trips at full precision") {
  Rng rng(55);
  std::vector<Pose> poses;
  for (int i = 0; i < 20; ++i) {
    poses.push_back(random_pose(rng));
  }
  const auto path =
      std::filesystem::temp_directory_path() / "gsrefine_pose_roundtrip.txt";
  save_poses(poses, path);
  const std::vector<Pose> loaded = load_poses(path);
  REQUIRE(loaded.size() == poses.size());
  for (std::size_t i = 0; i < poses.size(); ++i) {
    CHECK(rotation_error_deg(poses[i], loaded[i]) < 1e-12);
    CHECK((poses[i].translation - loaded[i].translation).norm() < 1e-12);
  }
  std::filesystem::remove(path);
}

TEST_CASE("pose file errors carry line numbers") {
  namespace fs = std::filesystem;
  const auto path = fs::temp_directory_path() / "gsrefine_pose_bad.txt";
  {
    std::FILE* f = std::fopen(path.c_str(), "w");
    std::fputs("1 0 0 0 0 0 0\n1 0 0\n", f);
    std::fclose(f);
  }
  CHECK_THROWS_WITH_AS(load_poses(path), doctest::Contains("line 2"),
                       std::runtime_error);
  fs::remove(path);
}

TEST_CASE("intrinsics validation") {
  CHECK_NOTHROW(validate_intrinsics(kCam));
  CameraIntrinsics bad = kCam;
  bad.fx = 0;
  CHECK_THROWS_AS(validate_intrinsics(bad), std::invalid_argument);
  bad = kCam;
  bad.height = -1;
  CHECK_THROWS_AS(validate_intrinsics(bad), std::invalid_argument);
}
