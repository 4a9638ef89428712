#pragma once

#include <Eigen/Core>

#include "gsrefine/geometry.hpp"
#include "gsrefine/image.hpp"
#include "gsrefine/scene.hpp"

namespace gsrefine {

struct RenderOptions {
  double near_clip = 0.05;            // world units, camera-space z cull
  double transmittance_floor = 1e-4;  // stop compositing below this
  double alpha_cutoff = 1.0 / 255.0;  // per-sample opacity below this is dropped
  double lowpass_dilation = 0.3;      // px^2 added to the screen covariance
  Eigen::Vector3d background = Eigen::Vector3d::Zero();
  double alpha_max = 0.99;            // per-sample opacity clamp

  static RenderOptions for_scene(const SplatScene& scene) {
    RenderOptions o;
    o.near_clip = 0.01 * scene.scene_scale;
    return o;
  }
};

struct RenderedView {
  Image rgb;
  std::vector<double> depth_raw;  // transmittance-weighted z, 0 where uncovered
  std::vector<double> alpha;      // accumulated opacity in [0, 1]
  int width = 0, height = 0;
  int skipped_degenerate = 0;  // splats dropped for a non-invertible screen covariance

  std::size_t idx(int x, int y) const { return std::size_t(y) * width + x; }
};

/// Software rasterizer. Per pixel, contributors are composited strictly
/// front to back by camera-space z of the gaussian mean (ties by input
/// order); depth accumulates sum_i d_i * alpha_i * prod_j<i (1 - alpha_j).
/// The background blends into RGB under the remaining transmittance,
/// never into depth. Deterministic: identical inputs give bit-identical
/// output.
RenderedView render(const SplatScene& scene, const CameraIntrinsics& k,
                    const Pose& pose, const RenderOptions& opts);

/// Independent reference: every gaussian evaluated at every pixel with an
/// exact global z-sort and no bounding-box culling, in plain double
/// arithmetic with std::exp. Intended for micro-scenes (<= 64x64,
/// <= 100 gaussians).
RenderedView brute_force_reference(const SplatScene& scene,
                                   const CameraIntrinsics& k, const Pose& pose,
                                   const RenderOptions& opts);

/// depth_raw / alpha where alpha >= alpha_min, invalid elsewhere.
/// alpha_min must lie in (0, 1).
DepthMap normalized_depth(const RenderedView& view, double alpha_min = 0.5);

}  // namespace gsrefine
