#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "gsrefine/matching.hpp"
#include "gsrefine/relpose.hpp"
#include "gsrefine/renderer.hpp"
#include "test_util.hpp"

using namespace gsrefine;
using testutil::look_at;
using testutil::random_pose;
using testutil::random_rotation;

namespace {

PointMapEstimate uniform_pointmap(int w, int h, double z) {
  PointMapEstimate pm;
  pm.width = w;
  pm.height = h;
  pm.points.assign(std::size_t(w) * h, Eigen::Vector3d(0, 0, z));
  pm.valid.assign(std::size_t(w) * h, 1);
  return pm;
}

DepthMap uniform_depth(int w, int h, double z) {
  DepthMap d(w, h);
  std::fill(d.depth.begin(), d.depth.end(), z);
  std::fill(d.valid.begin(), d.valid.end(), 1);
  return d;
}

}  // namespace

TEST_CASE("recover_scale: uniform half-depth point map gives s = 2 exactly") {
  const PointMapEstimate pm = uniform_pointmap(20, 20, 1.5);
  const DepthMap depth = uniform_depth(20, 20, 3.0);
  const ScaleEstimate est = recover_scale(pm, depth);
  CHECK(est.s == 2.0);
  CHECK(est.sample_count == 400);
  CHECK(est.dispersion == 0.0);
}

TEST_CASE("recover_scale: median shrugs off 20% outlier ratios") {
  PointMapEstimate pm = uniform_pointmap(20, 20, 1.5);
  Rng rng(3);
  for (int i = 0; i < 80; ++i) {  // 20% of 400
    pm.points[i].z() = rng.uniform(10.0, 100.0);
  }
  const DepthMap depth = uniform_depth(20, 20, 3.0);
  const ScaleEstimate est = recover_scale(pm, depth);
  CHECK(est.s == 2.0);
}

TEST_CASE("recover_scale refuses thin overlap") {
  PointMapEstimate pm = uniform_pointmap(10, 10, 1.0);
  std::fill(pm.valid.begin(), pm.valid.end(), 0);
  for (int i = 0; i < kMinScaleSamples - 1; ++i) {
    pm.valid[i] = 1;
  }
  const DepthMap depth = uniform_depth(10, 10, 2.0);
  CHECK_THROWS_WITH_AS(recover_scale(pm, depth),
                       doctest::Contains("jointly valid"),
                       std::runtime_error);
}

TEST_CASE("recover_scale is exactly scale-equivariant") {
  Rng rng(9);
  PointMapEstimate pm = uniform_pointmap(15, 15, 1.0);
  DepthMap depth = uniform_depth(15, 15, 1.0);
  for (std::size_t i = 0; i < pm.points.size(); ++i) {
    pm.points[i].z() = rng.uniform(0.5, 3.0);
    depth.depth[i] = rng.uniform(0.5, 3.0);
  }
  const double s1 = recover_scale(pm, depth).s;
  PointMapEstimate scaled = pm;
  for (auto& p : scaled.points) {
    p *= 4.0;
  }
  const double s2 = recover_scale(scaled, depth).s;
  CHECK(s2 == doctest::Approx(s1 / 4.0).epsilon(1e-12));
}

TEST_CASE("recover_scale against the oracle point map corruption") {
  RoomSpec spec;
  spec.count = 3000;
  spec.seed = 5;
  const SplatScene scene = synth_scene(spec);
  const CameraIntrinsics k = testutil::qvga_intrinsics();
  const Pose pose = look_at({0, 0, 0}, {2, 2, 0});
  const RenderedView view = render(scene, k, pose, RenderOptions::for_scene(scene));
  const DepthMap depth = normalized_depth(view);
  OraclePointMapParams p;
  p.scale_corruption = 1.0 / 3.0;
  p.seed = 2;
  const PointMapEstimate pm =
      oracle_pointmap_from_depth(depth, k, pose, pose, p);
  const ScaleEstimate est = recover_scale(pm, depth);
  CHECK(est.s == doctest::Approx(3.0).epsilon(1e-9));
  CHECK(est.dispersion < 1e-9);
}

TEST_CASE("compose_refined identities and hand case") {
  Rng rng(4);
  const Pose initial = random_pose(rng);
  const Pose same = compose_refined(initial, Rotation::identity(),
                                    Eigen::Vector3d::Zero(), 2.0);
  CHECK(rotation_error_deg(same, initial) < 1e-12);
  CHECK((same.translation - initial.translation).norm() < 1e-12);

  // R_rel = 90 deg about z, t_hat = (1,0,0), t_rel = (0,0,1), s = 2
  // -> t' = (0,1,2).
  Pose hat;
  hat.translation = {1, 0, 0};
  const Rotation rz90 = Rotation::axis_angle({0, 0, 1}, M_PI / 2);
  const Pose out = compose_refined(hat, rz90, {0, 0, 1}, 2.0);
  CHECK((out.translation - Eigen::Vector3d(0, 1, 2)).norm() < 1e-12);
  CHECK(out.rotation.angle_to(rz90 * hat.rotation) < 1e-12);

  CHECK_THROWS_AS(compose_refined(hat, rz90, {0, 0, 1}, 0.0),
                  std::invalid_argument);
}

TEST_CASE("compose_refined equals the homogeneous-matrix oracle") {
  Rng rng(10);
  double worst = 0;
  for (int i = 0; i < 10000; ++i) {
    const Pose initial = random_pose(rng);
    const Rotation rel = random_rotation(rng);
    const Eigen::Vector3d t_rel(rng.normal(), rng.normal(), rng.normal());
    const double s = rng.uniform(0.1, 5.0);
    const Pose composed = compose_refined(initial, rel, t_rel, s);

    Eigen::Matrix4d rel_h = Eigen::Matrix4d::Identity();
    rel_h.topLeftCorner<3, 3>() = rel.matrix();
    rel_h.topRightCorner<3, 1>() = s * t_rel;
    const Eigen::Matrix4d prod = rel_h * initial.matrix();
    worst = std::max(worst,
                     (composed.matrix() - prod).cwiseAbs().maxCoeff());
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("composing the true relative pose recovers the query pose") {
  Rng rng(12);
  for (int i = 0; i < 50; ++i) {
    const Pose render_pose = random_pose(rng);
    const Pose query_pose = random_pose(rng);
    const Pose rel = compose(query_pose, inverse(render_pose));
    const double s = rng.uniform(0.2, 5.0);
    // The matcher reports translation at corrupted scale 1/s.
    const Pose refined =
        compose_refined(render_pose, rel.rotation, rel.translation / s, s);
    CHECK(rotation_error_deg(refined, query_pose) < 1e-9);
    CHECK(translation_error(refined, query_pose) < 1e-9);
  }
}

TEST_CASE("refined rotation is independent of the scale") {
  Rng rng(14);
  const Pose initial = random_pose(rng);
  const Rotation rel = random_rotation(rng);
  const Eigen::Vector3d t_rel(0.3, -0.2, 0.9);
  const Pose a = compose_refined(initial, rel, t_rel, 0.5);
  const Pose b = compose_refined(initial, rel, t_rel, 5.0);
  CHECK(a.rotation.angle_to(b.rotation) == 0.0);
  CHECK((a.translation - b.translation).norm() > 0.1);
}

TEST_CASE("point map file round-trips") {
  Rng rng(6);
  PointMapEstimate pm = uniform_pointmap(12, 9, 1.0);
  for (std::size_t i = 0; i < pm.points.size(); ++i) {
    if (i % 7 == 0) {
      pm.valid[i] = 0;
      pm.points[i].setZero();
    } else {
      pm.points[i] = {rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0),
                      rng.uniform(0.5, 4.0)};
    }
  }
  pm.rel_rotation = random_rotation(rng);
  pm.rel_translation = {0.1, 0.2, -0.3};
  const auto path =
      std::filesystem::temp_directory_path() / "gsrefine_pm.txt";
  save_pointmap(pm, path);
  const PointMapEstimate loaded = load_pointmap(path);
  REQUIRE(loaded.width == pm.width);
  REQUIRE(loaded.points.size() == pm.points.size());
  for (std::size_t i = 0; i < pm.points.size(); ++i) {
    CHECK(loaded.valid[i] == pm.valid[i]);
    if (pm.valid[i]) {
      CHECK((loaded.points[i] - pm.points[i]).norm() < 1e-7);
    }
  }
  CHECK(loaded.rel_rotation.angle_to(pm.rel_rotation) < 1e-12);
  CHECK((loaded.rel_translation - pm.rel_translation).norm() < 1e-12);
  std::filesystem::remove(path);
}

TEST_CASE("point map loader rejects invalid z for valid pixels") {
  const auto path =
      std::filesystem::temp_directory_path() / "gsrefine_pm_bad.txt";
  {
    std::ofstream out(path);
    out << "PTMAP v1 2 1\n";
    out << "0.1 0.2 -1.0 1\n";
    out << "0 0 0 0\n";
    out << "REL 1 0 0 0 0 0 0\n";
  }
  CHECK_THROWS_WITH_AS(load_pointmap(path), doctest::Contains("positive z"),
                       std::runtime_error);
  std::filesystem::remove(path);
}
