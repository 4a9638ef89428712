#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "gsrefine/geometry.hpp"

namespace gsrefine {

/// Anisotropic 3D gaussian with opacity and view-independent color.
struct Gaussian3D {
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  Eigen::Vector3d scale = Eigen::Vector3d::Ones();  // std deviations, > 0
  Rotation orientation;
  double opacity = 1.0;  // in (0, 1]
  Eigen::Vector3d color = Eigen::Vector3d::Zero();  // RGB in [0, 1]

  /// Sigma = R diag(s^2) R^T, symmetric positive definite.
  Eigen::Matrix3d covariance() const;
};

struct SplatScene {
  std::vector<Gaussian3D> gaussians;
  double scene_scale = 1.0;  // bounding-box diagonal of the means
  std::string name;
};

/// Bounding-box diagonal of the means; 1.0 for an empty list.
double compute_scene_scale(const std::vector<Gaussian3D>& gaussians);

/// Throws std::runtime_error naming the first offending record on any
/// invariant violation (scale <= 0, opacity outside (0,1], color outside
/// [0,1], non-finite fields).
void validate_scene(const SplatScene& scene);

/// Text format: header `SPLATSCENE v1`, `count=<N>`, `scale=<f>`, then one
/// line per gaussian: `mx my mz sx sy sz qw qx qy qz opacity r g b`,
/// 9 significant digits.
SplatScene load_scene(const std::filesystem::path& path);
void save_scene(const SplatScene& scene, const std::filesystem::path& path);

struct RoomSpec {
  double width = 4.0;   // x extent, world units
  double depth = 4.0;   // y extent
  double height = 3.0;  // z extent
  int count = 5000;
  std::uint64_t seed = 0;
};

/// Box-room scene: gaussians scattered on the six interior wall planes of
/// a box centered at the origin, with a hash-based procedural color
/// texture so renders are feature rich. Deterministic given the seed.
SplatScene synth_scene(const RoomSpec& spec);

/// Similarity transform y = scale * R * x + t.
struct Similarity {
  Rotation rotation;
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  double scale = 1.0;
};

SplatScene transform_scene(const SplatScene& scene, const Similarity& g);

/// The rigid camera pose that views transform_scene(scene, g) exactly as
/// `pose` views `scene` (RGB and alpha identical; depth scales by g.scale).
Pose transformed_camera(const Pose& pose, const Similarity& g);

}  // namespace gsrefine
