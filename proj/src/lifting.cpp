#include "gsrefine/lifting.hpp"

#include <cmath>
#include <stdexcept>

namespace gsrefine {

CoordinateMap coordinate_map(const DepthMap& depth, const CameraIntrinsics& k,
                             const Pose& pose) {
  CoordinateMap cmap;
  cmap.width = depth.width;
  cmap.height = depth.height;
  cmap.points.assign(depth.depth.size(), Eigen::Vector3d::Zero());
  cmap.valid = depth.valid;
  const Pose inv = inverse(pose);
  for (int y = 0; y < depth.height; ++y) {
    for (int x = 0; x < depth.width; ++x) {
      const std::size_t i = cmap.idx(x, y);
      if (!cmap.valid[i]) {
        continue;
      }
      const double z = depth.depth[i];
      cmap.points[i] = inv.apply(Eigen::Vector3d(
          (x - k.cx) / k.fx * z, (y - k.cy) / k.fy * z, z));
    }
  }
  return cmap;
}

LiftResult lift_matches(const MatchSet& matches, const CoordinateMap& cmap) {
  if (matches.render_width != cmap.width ||
      matches.render_height != cmap.height) {
    throw std::invalid_argument(
        "lift_matches: match set render dimensions disagree with the "
        "coordinate map");
  }
  LiftResult out;
  out.corrs.reserve(matches.matches.size());
  for (const Correspondence& c : matches.matches) {
    const int x = static_cast<int>(std::lround(c.pixel_r.x()));
    const int y = static_cast<int>(std::lround(c.pixel_r.y()));
    if (x < 1 || x > cmap.width - 2 || y < 1 || y > cmap.height - 2) {
      ++out.dropped_border;
      continue;
    }
    const std::size_t i = cmap.idx(x, y);
    if (!cmap.valid[i]) {
      ++out.dropped_invalid;
      continue;
    }
    out.corrs.push_back(Corr2D3D{c.pixel_q, cmap.points[i], c.confidence});
  }
  return out;
}

}  // namespace gsrefine
