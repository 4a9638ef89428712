#include "gsrefine/geometry.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "gsrefine/rng.hpp"

namespace gsrefine {

Rotation Rotation::axis_angle(const Eigen::Vector3d& axis, double angle_rad) {
  const double n = axis.norm();
  if (n < 1e-300) {
    return Rotation();
  }
  return Rotation(Eigen::Quaterniond(Eigen::AngleAxisd(angle_rad, axis / n)));
}

double Rotation::angle_to(const Rotation& other) const {
  const Eigen::Quaterniond rel = q_ * other.q_.conjugate();
  // atan2 form is stable near 0 and pi, unlike acos of the scalar part.
  return 2.0 * std::atan2(rel.vec().norm(), std::abs(rel.w()));
}

Eigen::Matrix4d Pose::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rotation.matrix();
  m.topRightCorner<3, 1>() = translation;
  return m;
}

Pose compose(const Pose& a, const Pose& b) {
  return Pose{a.rotation * b.rotation, a.rotation * b.translation + a.translation};
}

Pose inverse(const Pose& p) {
  const Rotation rinv = p.rotation.inverse();
  return Pose{rinv, -(rinv * p.translation)};
}

double rotation_error_deg(const Pose& a, const Pose& b) {
  return a.rotation.angle_to(b.rotation) * 180.0 / M_PI;
}

double translation_error(const Pose& a, const Pose& b) {
  return (a.center() - b.center()).norm();
}

Pose jitter(const Pose& p, double rot_deg, double trans_mag,
            std::uint64_t seed) {
  Rng rng(seed);
  const Eigen::Vector3d rot_axis = rng.unit_vector();
  const Eigen::Vector3d shift_dir = rng.unit_vector();
  const Rotation delta =
      Rotation::axis_angle(rot_axis, rot_deg * M_PI / 180.0);
  const Rotation r_new = delta * p.rotation;
  const Eigen::Vector3d c_new = p.center() + trans_mag * shift_dir;
  return Pose::from_center(r_new, c_new);
}

void validate_intrinsics(const CameraIntrinsics& k) {
  if (!(k.fx > 0) || !(k.fy > 0)) {
    throw std::invalid_argument("intrinsics: focal lengths must be positive");
  }
  if (k.width <= 0 || k.height <= 0) {
    throw std::invalid_argument("intrinsics: image size must be positive");
  }
}

std::optional<Projection> project(const CameraIntrinsics& k, const Pose& pose,
                                  const Eigen::Vector3d& x_world) {
  const Eigen::Vector3d xc = pose.apply(x_world);
  if (xc.z() <= 1e-12) {
    return std::nullopt;
  }
  return Projection{{k.fx * xc.x() / xc.z() + k.cx,
                     k.fy * xc.y() / xc.z() + k.cy},
                    xc.z()};
}

Eigen::Vector3d backproject(const CameraIntrinsics& k, const Pose& pose,
                            const Eigen::Vector2d& pixel, double z_depth) {
  if (!(z_depth > 0)) {
    throw std::invalid_argument("backproject: depth must be positive");
  }
  const Eigen::Vector3d x_cam((pixel.x() - k.cx) / k.fx * z_depth,
                              (pixel.y() - k.cy) / k.fy * z_depth, z_depth);
  return inverse(pose).apply(x_cam);
}

std::vector<Pose> load_poses(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open pose file: " + path.string());
  }
  std::vector<Pose> poses;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') {
      continue;
    }
    std::istringstream ls(line);
    double qw, qx, qy, qz, tx, ty, tz;
    if (!(ls >> qw >> qx >> qy >> qz >> tx >> ty >> tz)) {
      throw std::runtime_error(path.string() + ": line " +
                               std::to_string(lineno) + ": expected 7 fields");
    }
    if (!std::isfinite(qw + qx + qy + qz + tx + ty + tz)) {
      throw std::runtime_error(path.string() + ": line " +
                               std::to_string(lineno) + ": non-finite value");
    }
    const double qn = std::sqrt(qw * qw + qx * qx + qy * qy + qz * qz);
    if (qn < 1e-12) {
      throw std::runtime_error(path.string() + ": line " +
                               std::to_string(lineno) + ": zero quaternion");
    }
    poses.push_back(Pose{Rotation(qw, qx, qy, qz), {tx, ty, tz}});
  }
  return poses;
}

void save_poses(const std::vector<Pose>& poses,
                const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write pose file: " + path.string());
  }
  char buf[256];
  for (const Pose& p : poses) {
    const Eigen::Quaterniond& q = p.rotation.quat();
    std::snprintf(buf, sizeof(buf),
                  "%.17g %.17g %.17g %.17g %.17g %.17g %.17g\n", q.w(), q.x(),
                  q.y(), q.z(), p.translation.x(), p.translation.y(),
                  p.translation.z());
    out << buf;
  }
  if (!out) {
    throw std::runtime_error("error writing pose file: " + path.string());
  }
}

}  // namespace gsrefine
