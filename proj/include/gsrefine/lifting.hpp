#pragma once

#include <vector>

#include <Eigen/Core>

#include "gsrefine/geometry.hpp"
#include "gsrefine/image.hpp"
#include "gsrefine/matching.hpp"

namespace gsrefine {

/// Per-pixel world points of a rendered view; every valid entry
/// re-projects to its own pixel under (K, pose).
struct CoordinateMap {
  int width = 0, height = 0;
  std::vector<Eigen::Vector3d> points;
  std::vector<std::uint8_t> valid;

  std::size_t idx(int x, int y) const { return std::size_t(y) * width + x; }
};

/// A query pixel paired with a world point.
struct Corr2D3D {
  Eigen::Vector2d pixel_q;
  Eigen::Vector3d point_world;
  double confidence = 1.0;
};

/// Backprojects every valid pixel of a normalized depth map.
CoordinateMap coordinate_map(const DepthMap& depth, const CameraIntrinsics& k,
                             const Pose& pose);

struct LiftResult {
  std::vector<Corr2D3D> corrs;
  int dropped_invalid = 0;  // render pixel had no valid depth
  int dropped_border = 0;   // within 1 px of the render image border
};

/// Samples the coordinate map at the nearest integer pixel to pixel_r of
/// each match. Matches on invalid pixels or within 1 px of the border are
/// dropped (and counted). Throws std::invalid_argument when the match
/// set's render dimensions disagree with the map.
LiftResult lift_matches(const MatchSet& matches, const CoordinateMap& cmap);

}  // namespace gsrefine
