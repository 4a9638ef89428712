#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace gsrefine {

/// 3D rotation stored as a unit quaternion. Every constructor normalizes,
/// so |q| = 1 holds at all times.
class Rotation {
 public:
  Rotation() : q_(Eigen::Quaterniond::Identity()) {}
  explicit Rotation(const Eigen::Quaterniond& q) : q_(q.normalized()) {}
  Rotation(double w, double x, double y, double z) : q_(w, x, y, z) {
    q_.normalize();
  }

  static Rotation identity() { return Rotation(); }
  static Rotation from_matrix(const Eigen::Matrix3d& m) {
    return Rotation(Eigen::Quaterniond(m));
  }
  /// Rotation of `angle_rad` about `axis` (need not be unit length).
  static Rotation axis_angle(const Eigen::Vector3d& axis, double angle_rad);

  const Eigen::Quaterniond& quat() const { return q_; }
  Eigen::Matrix3d matrix() const { return q_.toRotationMatrix(); }

  Rotation operator*(const Rotation& rhs) const {
    return Rotation(q_ * rhs.q_);
  }
  Eigen::Vector3d operator*(const Eigen::Vector3d& v) const { return q_ * v; }
  Rotation inverse() const { return Rotation(q_.conjugate()); }

  /// Geodesic angle to another rotation, radians in [0, pi].
  double angle_to(const Rotation& other) const;

 private:
  Eigen::Quaterniond q_;
};

/// Rigid world-to-camera transform: x_cam = R * x_world + t.
struct Pose {
  Rotation rotation;
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  Eigen::Vector3d apply(const Eigen::Vector3d& x_world) const {
    return rotation * x_world + translation;
  }
  /// Camera center in world coordinates, C = -R^T t.
  Eigen::Vector3d center() const {
    return rotation.inverse() * (-translation);
  }
  static Pose from_center(const Rotation& r, const Eigen::Vector3d& center) {
    return Pose{r, -(r * center)};
  }
  Eigen::Matrix4d matrix() const;
};

Pose compose(const Pose& a, const Pose& b);  // x -> a(b(x))
Pose inverse(const Pose& p);

/// Geodesic angle of R_a * R_b^T, degrees in [0, 180].
double rotation_error_deg(const Pose& a, const Pose& b);
/// Euclidean distance between camera centers, world units.
double translation_error(const Pose& a, const Pose& b);

/// Perturb a pose by a rotation of exactly `rot_deg` about a uniformly
/// random axis and a camera-center shift of exactly `trans_mag` in a
/// uniformly random direction. Deterministic given the seed.
Pose jitter(const Pose& p, double rot_deg, double trans_mag,
            std::uint64_t seed);

/// Pinhole camera. Pixel (i, j) is sampled at continuous coordinates
/// (i, j), i.e. pixel centers sit on the integer grid.
struct CameraIntrinsics {
  double fx = 0, fy = 0, cx = 0, cy = 0;
  int width = 0, height = 0;
};

/// Throws std::invalid_argument on fx/fy/width/height <= 0.
void validate_intrinsics(const CameraIntrinsics& k);

struct Projection {
  Eigen::Vector2d pixel;
  double depth;  // camera-space z
};

/// Projects a world point; empty when the point is at or behind the camera
/// plane (z <= 1e-12). Bounds are the caller's concern.
std::optional<Projection> project(const CameraIntrinsics& k, const Pose& pose,
                                  const Eigen::Vector3d& x_world);

/// Inverse of project for a given depth. Throws std::invalid_argument on
/// depth <= 0.
Eigen::Vector3d backproject(const CameraIntrinsics& k, const Pose& pose,
                            const Eigen::Vector2d& pixel, double z_depth);

/// Pose text format, one pose per line: `qw qx qy qz tx ty tz`
/// (world-to-camera), 17 significant digits.
std::vector<Pose> load_poses(const std::filesystem::path& path);
void save_poses(const std::vector<Pose>& poses,
                const std::filesystem::path& path);

}  // namespace gsrefine
