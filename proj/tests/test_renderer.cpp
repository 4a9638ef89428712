#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>

#include "gsrefine/kernels.hpp"
#include "gsrefine/renderer.hpp"
#include "test_util.hpp"

using namespace gsrefine;
using testutil::random_rotation;

namespace {

const CameraIntrinsics kMicroCam{40.0, 40.0, 16.0, 16.0, 32, 32};

SplatScene micro_scene(int n, std::uint64_t seed) {
  Rng rng(seed);
  SplatScene scene;
  for (int i = 0; i < n; ++i) {
    Gaussian3D g;
    g.mean = {rng.uniform(-1.2, 1.2), rng.uniform(-1.2, 1.2),
              rng.uniform(1.5, 4.0)};
    g.scale = {rng.uniform(0.05, 0.5), rng.uniform(0.05, 0.5),
               rng.uniform(0.05, 0.5)};
    g.orientation = random_rotation(rng);
    g.opacity = rng.uniform(0.1, 1.0);
    g.color = {rng.uniform(), rng.uniform(), rng.uniform()};
    scene.gaussians.push_back(g);
  }
  scene.scene_scale = compute_scene_scale(scene.gaussians);
  return scene;
}

RenderOptions micro_options() {
  RenderOptions opts;
  opts.near_clip = 0.05;
  return opts;
}

double max_view_difference(const RenderedView& a, const RenderedView& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.alpha.size(); ++i) {
    m = std::max(m, std::abs(a.rgb.r[i] - b.rgb.r[i]));
    m = std::max(m, std::abs(a.rgb.g[i] - b.rgb.g[i]));
    m = std::max(m, std::abs(a.rgb.b[i] - b.rgb.b[i]));
    m = std::max(m, std::abs(a.depth_raw[i] - b.depth_raw[i]));
    m = std::max(m, std::abs(a.alpha[i] - b.alpha[i]));
  }
  return m;
}

}  // namespace

TEST_CASE("empty scene renders background, zero depth, zero alpha") {
  SplatScene scene;
  scene.scene_scale = 1.0;
  RenderOptions opts = micro_options();
  opts.background = {0.25, 0.5, 0.75};
  const RenderedView v = render(scene, kMicroCam, Pose{}, opts);
  for (std::size_t i = 0; i < v.alpha.size(); ++i) {
    CHECK(v.rgb.r[i] == 0.25);
    CHECK(v.rgb.g[i] == 0.5);
    CHECK(v.rgb.b[i] == 0.75);
    CHECK(v.depth_raw[i] == 0.0);
    CHECK(v.alpha[i] == 0.0);
  }
  const RenderedView ref = brute_force_reference(scene, kMicroCam, Pose{}, opts);
  CHECK(max_view_difference(v, ref) == 0.0);
}

TEST_CASE("single opaque splat composites its exact depth") {
  SplatScene scene;
  Gaussian3D g;
  g.mean = {0, 0, 5};
  g.scale = {0.3, 0.3, 0.3};
  g.opacity = 1.0;
  g.color = {1, 0, 0};
  scene.gaussians.push_back(g);
  scene.scene_scale = 1.0;
  RenderOptions opts = micro_options();
  opts.alpha_max = 1.0;  // exact hand case: effective alpha reaches 1
  const RenderedView v = render(scene, kMicroCam, Pose{}, opts);
  const std::size_t center = v.idx(16, 16);
  CHECK(v.depth_raw[center] == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(v.alpha[center] == doctest::Approx(1.0).epsilon(1e-12));
  const RenderedView ref = brute_force_reference(scene, kMicroCam, Pose{}, opts);
  CHECK(max_view_difference(v, ref) < 1e-9);
}

TEST_CASE("two coincident splats reproduce the hand-evaluated composite") {
  // alpha 0.5 at depth 2, then alpha 1.0 at depth 4:
  // depth = 0.5*2 + 0.5*1.0*4 = 3.0
  SplatScene scene;
  Gaussian3D a;
  a.mean = {0, 0, 2};
  a.scale = {0.3, 0.3, 0.3};
  a.opacity = 0.5;
  a.color = {1, 0, 0};
  Gaussian3D b = a;
  b.mean = {0, 0, 4};
  b.opacity = 1.0;
  b.color = {0, 1, 0};
  scene.gaussians = {a, b};
  scene.scene_scale = compute_scene_scale(scene.gaussians);
  RenderOptions opts = micro_options();
  opts.alpha_max = 1.0;
  const RenderedView v = render(scene, kMicroCam, Pose{}, opts);
  const std::size_t center = v.idx(16, 16);
  CHECK(v.depth_raw[center] == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(v.alpha[center] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(v.rgb.r[center] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(v.rgb.g[center] == doctest::Approx(0.5).epsilon(1e-12));

  const DepthMap d = normalized_depth(v);
  CHECK(d.valid[center] == 1);
  CHECK(d.depth[center] == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("oracle equivalence on 50 random micro-scenes") {
  double worst = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const SplatScene scene = micro_scene(3 + seed % 18, seed);
    Rng rng(seed * 31 + 5);
    const Pose pose = jitter(Pose{}, rng.uniform(0.0, 15.0),
                             rng.uniform(0.0, 0.3), seed);
    const RenderOptions opts = micro_options();
    const RenderedView fast = render(scene, kMicroCam, pose, opts);
    const RenderedView ref =
        brute_force_reference(scene, kMicroCam, pose, opts);
    worst = std::max(worst, max_view_difference(fast, ref));
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("render is bit-identical across kernel backends") {
  if (!kernels::avx2_supported()) {
    return;
  }
  const SplatScene scene = micro_scene(20, 3);
  const kernels::Backend before = kernels::active_backend();
  kernels::force_backend(kernels::Backend::scalar);
  const RenderedView a = render(scene, kMicroCam, Pose{}, micro_options());
  kernels::force_backend(kernels::Backend::avx2);
  const RenderedView b = render(scene, kMicroCam, Pose{}, micro_options());
  kernels::force_backend(before);
  CHECK(std::memcmp(a.rgb.r.data(), b.rgb.r.data(),
                    a.rgb.r.size() * sizeof(double)) == 0);
  CHECK(std::memcmp(a.depth_raw.data(), b.depth_raw.data(),
                    a.depth_raw.size() * sizeof(double)) == 0);
  CHECK(std::memcmp(a.alpha.data(), b.alpha.data(),
                    a.alpha.size() * sizeof(double)) == 0);
}

TEST_CASE("render twice gives bit-identical output") {
  const SplatScene scene = micro_scene(15, 8);
  const RenderedView a = render(scene, kMicroCam, Pose{}, micro_options());
  const RenderedView b = render(scene, kMicroCam, Pose{}, micro_options());
  CHECK(a.rgb.r == b.rgb.r);
  CHECK(a.depth_raw == b.depth_raw);
}

TEST_CASE("depth_raw stays within alpha times the max contributor depth") {
  for (std::uint64_t seed = 50; seed < 60; ++seed) {
    const SplatScene scene = micro_scene(12, seed);
    const RenderedView v =
        render(scene, kMicroCam, Pose{}, micro_options());
    double max_depth = 0;
    for (const Gaussian3D& g : scene.gaussians) {
      max_depth = std::max(max_depth, g.mean.z());
    }
    for (std::size_t i = 0; i < v.alpha.size(); ++i) {
      CHECK(v.depth_raw[i] >= 0.0);
      CHECK(v.depth_raw[i] <= v.alpha[i] * max_depth + 1e-12);
      CHECK(v.alpha[i] >= 0.0);
      CHECK(v.alpha[i] <= 1.0);
      if (v.alpha[i] == 0.0) {
        CHECK(v.depth_raw[i] == 0.0);
      }
    }
  }
}

TEST_CASE("normalized_depth divides by alpha and masks thin coverage") {
  SplatScene scene;
  Gaussian3D g;
  g.mean = {0, 0, 3};
  g.scale = {0.4, 0.4, 0.4};
  g.opacity = 0.3;  // accumulated alpha stays below 0.5
  g.color = {1, 1, 1};
  scene.gaussians.push_back(g);
  scene.scene_scale = 1.0;
  const RenderedView v = render(scene, kMicroCam, Pose{}, micro_options());
  const std::size_t center = v.idx(16, 16);
  CHECK(v.alpha[center] == doctest::Approx(0.3).epsilon(1e-9));
  const DepthMap d = normalized_depth(v, 0.5);
  CHECK(d.valid[center] == 0);
  const DepthMap d2 = normalized_depth(v, 0.25);
  CHECK(d2.valid[center] == 1);
  CHECK(d2.depth[center] == doctest::Approx(3.0).epsilon(1e-9));
  CHECK_THROWS_AS(normalized_depth(v, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(normalized_depth(v, 1.0), std::invalid_argument);
}

TEST_CASE("fully opaque pixel normalizes to its raw depth") {
  SplatScene scene;
  Gaussian3D g;
  g.mean = {0, 0, 5};
  g.scale = {0.5, 0.5, 0.5};
  g.opacity = 1.0;
  scene.gaussians.push_back(g);
  scene.scene_scale = 1.0;
  RenderOptions opts = micro_options();
  opts.alpha_max = 1.0;
  const RenderedView v = render(scene, kMicroCam, Pose{}, opts);
  const DepthMap d = normalized_depth(v);
  const std::size_t center = v.idx(16, 16);
  REQUIRE(d.valid[center] == 1);
  CHECK(d.depth[center] == v.depth_raw[center]);
}

TEST_CASE("resolution equivariance: doubled intrinsics downsample to the original") {
  // A smooth scene: large soft splats.
  Rng rng(3);
  SplatScene scene;
  for (int i = 0; i < 8; ++i) {
    Gaussian3D g;
    g.mean = {rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8),
              rng.uniform(2.0, 3.0)};
    g.scale = {0.6, 0.6, 0.6};
    g.opacity = rng.uniform(0.4, 0.9);
    g.color = {rng.uniform(), rng.uniform(), rng.uniform()};
    scene.gaussians.push_back(g);
  }
  scene.scene_scale = compute_scene_scale(scene.gaussians);

  const CameraIntrinsics base{40, 40, 16, 16, 32, 32};
  const CameraIntrinsics doubled{80, 80, 32, 32, 64, 64};
  const RenderedView lo = render(scene, base, Pose{}, micro_options());
  const RenderedView hi = render(scene, doubled, Pose{}, micro_options());
  double worst = 0;
  for (int y = 0; y < 32; ++y) {
    for (int x = 0; x < 32; ++x) {
      auto box = [&](const std::vector<double>& img) {
        return 0.25 * (img[hi.idx(2 * x, 2 * y)] + img[hi.idx(2 * x + 1, 2 * y)] +
                       img[hi.idx(2 * x, 2 * y + 1)] +
                       img[hi.idx(2 * x + 1, 2 * y + 1)]);
      };
      worst = std::max(worst, std::abs(lo.rgb.r[lo.idx(x, y)] - box(hi.rgb.r)));
      worst = std::max(worst, std::abs(lo.rgb.g[lo.idx(x, y)] - box(hi.rgb.g)));
      worst = std::max(worst, std::abs(lo.rgb.b[lo.idx(x, y)] - box(hi.rgb.b)));
    }
  }
  CHECK(worst < 5e-2);
}

TEST_CASE("degenerate splats are skipped and counted") {
  SplatScene scene;
  Gaussian3D g;
  g.mean = {0, 0, 3};
  g.scale = {1e-300, 1e-300, 1e-300};  // collapses to a zero screen footprint
  g.opacity = 0.9;
  scene.gaussians.push_back(g);
  scene.scene_scale = 1.0;
  RenderOptions opts = micro_options();
  opts.lowpass_dilation = 0.0;  // no dilation rescue
  const RenderedView v = render(scene, kMicroCam, Pose{}, opts);
  CHECK(v.skipped_degenerate == 1);
  for (double a : v.alpha) {
    CHECK(a == 0.0);
  }
}

TEST_CASE("render options are validated") {
  SplatScene scene;
  scene.scene_scale = 1.0;
  RenderOptions opts = micro_options();
  opts.near_clip = 0.0;
  CHECK_THROWS_AS(render(scene, kMicroCam, Pose{}, opts),
                  std::invalid_argument);
  opts = micro_options();
  opts.alpha_cutoff = 1.0;
  CHECK_THROWS_AS(render(scene, kMicroCam, Pose{}, opts),
                  std::invalid_argument);
}

TEST_CASE("image and depth raster files round-trip") {
  const SplatScene scene = micro_scene(10, 21);
  const RenderedView v = render(scene, kMicroCam, Pose{}, micro_options());
  namespace fs = std::filesystem;
  const auto ppm = fs::temp_directory_path() / "gsrefine_render.ppm";
  const auto dpt = fs::temp_directory_path() / "gsrefine_render.dpt";
  save_ppm(v.rgb, ppm);
  const Image img = load_ppm(ppm);
  REQUIRE(img.width == 32);
  REQUIRE(img.height == 32);
  double worst = 0;
  for (std::size_t i = 0; i < img.npixels(); ++i) {
    worst = std::max(worst, std::abs(img.r[i] - v.rgb.r[i]));
  }
  CHECK(worst <= 0.5 / 255.0 + 1e-12);  // 8-bit quantization only

  const DepthMap d = normalized_depth(v, 0.3);
  save_depth(d, dpt);
  const DepthMap d2 = load_depth(dpt);
  REQUIRE(d2.width == d.width);
  for (std::size_t i = 0; i < d.depth.size(); ++i) {
    CHECK(d2.valid[i] == d.valid[i]);
    if (d.valid[i]) {
      CHECK(d2.depth[i] == doctest::Approx(d.depth[i]).epsilon(1e-6));
    }
  }
  fs::remove(ppm);
  fs::remove(dpt);
}
