#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "gsrefine/geometry.hpp"
#include "gsrefine/image.hpp"
#include "gsrefine/scene.hpp"

namespace gsrefine {

/// Subpixel coordinate u is inside an image of width w when it rounds to
/// a pixel index in [0, w-1], i.e. -0.5 <= u < w - 0.5.
inline bool pixel_in_bounds(const Eigen::Vector2d& p, int w, int h) {
  return p.x() >= -0.5 && p.x() < w - 0.5 && p.y() >= -0.5 && p.y() < h - 0.5;
}

struct Correspondence {
  Eigen::Vector2d pixel_q;  // query image, subpixel
  Eigen::Vector2d pixel_r;  // rendered image, subpixel
  double confidence = 1.0;  // in [0, 1]
};

struct MatchSet {
  std::vector<Correspondence> matches;
  int query_width = 0, query_height = 0;
  int render_width = 0, render_height = 0;
};

/// Thrown when too few covisible samples exist to form matches.
struct CovisibilityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct OracleMatchParams {
  int count = 300;            // requested correspondences
  double noise_px = 0.0;      // isotropic pixel noise on inlier pairs
  double outlier_frac = 0.0;  // in [0, 1)
  std::uint64_t seed = 0;
};

struct OracleMatchResult {
  MatchSet set;
  std::vector<int> outlier_indices;  // hidden from consumers of `set`
};

/// Stand-in for a learned matcher: samples surface points of the rendered
/// view (from its normalized depth), projects them into both views, and
/// corrupts the result per the params. Inliers get confidence 1, outliers
/// uniform [0, 1). Throws CovisibilityError on fewer than 4 covisible
/// samples. Deterministic per seed.
OracleMatchResult oracle_match(const SplatScene& scene,
                               const CameraIntrinsics& k,
                               const Pose& pose_query_gt,
                               const Pose& pose_render,
                               const OracleMatchParams& params);

/// Same, but fed an already-rendered normalized depth map of the render
/// view (what the pipeline uses, to keep a single render per refinement).
OracleMatchResult oracle_match_from_depth(const DepthMap& render_depth,
                                          const CameraIntrinsics& k,
                                          const Pose& pose_query_gt,
                                          const Pose& pose_render,
                                          const OracleMatchParams& params);

/// Match file: `MATCHES v1`, `query=<W>x<H>`, `render=<W>x<H>`, then lines
/// `uq vq ur vr conf` (6 decimals). Out-of-bounds pixels and bad
/// confidences are rejected with their record number.
MatchSet load_matches(const std::filesystem::path& path);
void save_matches(const MatchSet& set, const std::filesystem::path& path);

/// Per-pixel 3D points in the matcher's local (scale-ambiguous) camera
/// frame, plus the matcher's relative pose estimate from render to query.
struct PointMapEstimate {
  int width = 0, height = 0;
  std::vector<Eigen::Vector3d> points;
  std::vector<std::uint8_t> valid;
  Rotation rel_rotation;
  Eigen::Vector3d rel_translation = Eigen::Vector3d::Zero();  // scale-ambiguous

  std::size_t idx(int x, int y) const { return std::size_t(y) * width + x; }
};

struct OraclePointMapParams {
  double scale_corruption = 1.0;  // multiplies true geometry (this is 1/s)
  double noise_3d = 0.0;
  std::uint64_t seed = 0;
};

/// True render-view camera-frame geometry scaled by scale_corruption with
/// optional Gaussian noise; relative pose is the true render-to-query
/// transform with translation scaled the same way.
PointMapEstimate oracle_pointmap(const SplatScene& scene,
                                 const CameraIntrinsics& k,
                                 const Pose& pose_query_gt,
                                 const Pose& pose_render,
                                 const OraclePointMapParams& params);

PointMapEstimate oracle_pointmap_from_depth(const DepthMap& render_depth,
                                            const CameraIntrinsics& k,
                                            const Pose& pose_query_gt,
                                            const Pose& pose_render,
                                            const OraclePointMapParams& params);

}  // namespace gsrefine
