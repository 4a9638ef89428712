#pragma once

#include <filesystem>

#include "gsrefine/geometry.hpp"
#include "gsrefine/image.hpp"
#include "gsrefine/matching.hpp"

namespace gsrefine {

struct ScaleEstimate {
  double s = 1.0;          // rendered depth / point-map z
  int sample_count = 0;
  double dispersion = 0;   // median absolute deviation of the ratios
};

/// Minimum jointly-valid pixels before a scale is trusted.
inline constexpr int kMinScaleSamples = 50;

/// Median of per-pixel (rendered z-depth / point-map local z) over pixels
/// valid in both inputs. Throws std::runtime_error on insufficient
/// overlap or a non-positive median.
ScaleEstimate recover_scale(const PointMapEstimate& pointmap,
                            const DepthMap& depth);

/// Refined pose [R_rel R | R_rel t + s t_rel] under the world-to-camera
/// convention. Requires s > 0.
Pose compose_refined(const Pose& initial, const Rotation& rel_rotation,
                     const Eigen::Vector3d& rel_translation, double s);

/// Point-map file: `PTMAP v1 <W> <H>`, one `x y z valid` line per pixel
/// (row major), then a `REL qw qx qy qz tx ty tz` trailer.
PointMapEstimate load_pointmap(const std::filesystem::path& path);
void save_pointmap(const PointMapEstimate& pm,
                   const std::filesystem::path& path);

}  // namespace gsrefine
