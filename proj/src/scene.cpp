#include "gsrefine/scene.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "gsrefine/rng.hpp"

namespace gsrefine {

Eigen::Matrix3d Gaussian3D::covariance() const {
  const Eigen::Matrix3d r = orientation.matrix();
  return r * scale.array().square().matrix().asDiagonal() * r.transpose();
}

double compute_scene_scale(const std::vector<Gaussian3D>& gaussians) {
  if (gaussians.empty()) {
    return 1.0;
  }
  Eigen::Vector3d lo = gaussians.front().mean;
  Eigen::Vector3d hi = lo;
  for (const Gaussian3D& g : gaussians) {
    lo = lo.cwiseMin(g.mean);
    hi = hi.cwiseMax(g.mean);
  }
  const double diag = (hi - lo).norm();
  return diag > 0 ? diag : 1.0;
}

namespace {

void check_record(const Gaussian3D& g, std::size_t index) {
  const auto fail = [index](const std::string& what) {
    throw std::runtime_error("scene record " + std::to_string(index) + ": " +
                             what);
  };
  if (!g.mean.allFinite() || !g.scale.allFinite() || !g.color.allFinite() ||
      !std::isfinite(g.opacity) ||
      !g.orientation.quat().coeffs().allFinite()) {
    fail("non-finite value");
  }
  if (!(g.scale.minCoeff() > 0)) {
    fail("scale components must be positive");
  }
  if (!(g.opacity > 0) || g.opacity > 1.0) {
    fail("opacity must be in (0, 1]");
  }
  if (g.color.minCoeff() < 0 || g.color.maxCoeff() > 1.0) {
    fail("color channels must be in [0, 1]");
  }
}

}  // namespace

void validate_scene(const SplatScene& scene) {
  for (std::size_t i = 0; i < scene.gaussians.size(); ++i) {
    check_record(scene.gaussians[i], i);
  }
  if (!(scene.scene_scale > 0)) {
    throw std::runtime_error("scene_scale must be positive");
  }
  const double recomputed = compute_scene_scale(scene.gaussians);
  if (std::abs(recomputed - scene.scene_scale) > 1e-6) {
    throw std::runtime_error("scene_scale " + std::to_string(scene.scene_scale) +
                             " disagrees with bounding-box diagonal " +
                             std::to_string(recomputed));
  }
}

SplatScene load_scene(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open scene file: " + path.string());
  }
  std::string line;
  if (!std::getline(in, line) || line != "SPLATSCENE v1") {
    throw std::runtime_error(path.string() + ": malformed header (magic)");
  }
  std::size_t count = 0;
  double scale = 0;
  if (!std::getline(in, line) ||
      std::sscanf(line.c_str(), "count=%zu", &count) != 1) {
    throw std::runtime_error(path.string() + ": malformed header (count)");
  }
  if (!std::getline(in, line) ||
      std::sscanf(line.c_str(), "scale=%lf", &scale) != 1) {
    throw std::runtime_error(path.string() + ": malformed header (scale)");
  }
  SplatScene scene;
  scene.name = path.stem().string();
  scene.scene_scale = scale;
  scene.gaussians.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::getline(in, line)) {
      throw std::runtime_error(path.string() + ": truncated at record " +
                               std::to_string(i));
    }
    std::istringstream ls(line);
    Gaussian3D g;
    double qw, qx, qy, qz;
    if (!(ls >> g.mean.x() >> g.mean.y() >> g.mean.z() >> g.scale.x() >>
          g.scale.y() >> g.scale.z() >> qw >> qx >> qy >> qz >> g.opacity >>
          g.color.x() >> g.color.y() >> g.color.z())) {
      throw std::runtime_error(path.string() + ": record " +
                               std::to_string(i) + ": expected 14 fields");
    }
    if (!std::isfinite(qw + qx + qy + qz) ||
        std::sqrt(qw * qw + qx * qx + qy * qy + qz * qz) < 1e-12) {
      throw std::runtime_error(path.string() + ": record " +
                               std::to_string(i) + ": bad quaternion");
    }
    g.orientation = Rotation(qw, qx, qy, qz);
    check_record(g, i);
    scene.gaussians.push_back(g);
  }
  validate_scene(scene);
  return scene;
}

void save_scene(const SplatScene& scene, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write scene file: " + path.string());
  }
  char buf[512];
  out << "SPLATSCENE v1\n";
  out << "count=" << scene.gaussians.size() << "\n";
  std::snprintf(buf, sizeof(buf), "scale=%.9g\n", scene.scene_scale);
  out << buf;
  for (const Gaussian3D& g : scene.gaussians) {
    const Eigen::Quaterniond& q = g.orientation.quat();
    std::snprintf(buf, sizeof(buf),
                  "%.9g %.9g %.9g %.9g %.9g %.9g %.9g %.9g %.9g %.9g %.9g "
                  "%.9g %.9g %.9g\n",
                  g.mean.x(), g.mean.y(), g.mean.z(), g.scale.x(),
                  g.scale.y(), g.scale.z(), q.w(), q.x(), q.y(), q.z(),
                  g.opacity, g.color.x(), g.color.y(), g.color.z());
    out << buf;
  }
  if (!out) {
    throw std::runtime_error("error writing scene file: " + path.string());
  }
}

namespace {

std::uint64_t hash3(std::int64_t x, std::int64_t y, std::int64_t z,
                    std::uint64_t seed) {
  std::uint64_t h = seed ^ 0x9E3779B97F4A7C15ULL;
  for (std::uint64_t v : {std::uint64_t(x), std::uint64_t(y), std::uint64_t(z)}) {
    h ^= v + 0x9E3779B97F4A7C15ULL + (h << 6) + (h >> 2);
    h *= 0xBF58476D1CE4E5B9ULL;
    h ^= h >> 27;
  }
  return h;
}

double hash_unit(std::uint64_t h, int lane) {
  return static_cast<double>((h >> (8 * lane)) & 0xFFFF) / 65535.0;
}

/// Trilinearly interpolated value noise, one RGB sample per lattice cell.
Eigen::Vector3d value_noise_rgb(const Eigen::Vector3d& p, double freq,
                                std::uint64_t seed) {
  const Eigen::Vector3d q = p * freq;
  const Eigen::Vector3d f = q.array().floor();
  const Eigen::Vector3d w = q - f;
  Eigen::Vector3d acc = Eigen::Vector3d::Zero();
  for (int dz = 0; dz < 2; ++dz) {
    for (int dy = 0; dy < 2; ++dy) {
      for (int dx = 0; dx < 2; ++dx) {
        const std::uint64_t h =
            hash3(std::int64_t(f.x()) + dx, std::int64_t(f.y()) + dy,
                  std::int64_t(f.z()) + dz, seed);
        const double wx = dx ? w.x() : 1.0 - w.x();
        const double wy = dy ? w.y() : 1.0 - w.y();
        const double wz = dz ? w.z() : 1.0 - w.z();
        acc += wx * wy * wz *
               Eigen::Vector3d(hash_unit(h, 0), hash_unit(h, 1),
                               hash_unit(h, 2));
      }
    }
  }
  return acc;
}

struct Wall {
  Eigen::Vector3d origin, tan_u, tan_v, normal;  // tan_u x tan_v = normal
  double len_u, len_v;
};

}  // namespace

SplatScene synth_scene(const RoomSpec& spec) {
  if (!(spec.width > 0) || !(spec.depth > 0) || !(spec.height > 0)) {
    throw std::invalid_argument("synth_scene: room dimensions must be positive");
  }
  if (spec.count < 1) {
    throw std::invalid_argument("synth_scene: gaussian count must be >= 1");
  }
  const double hw = spec.width / 2, hd = spec.depth / 2, hh = spec.height / 2;
  const Eigen::Vector3d ex(1, 0, 0), ey(0, 1, 0), ez(0, 0, 1);
  // Six walls of the box. The frame sign is irrelevant to a symmetric
  // gaussian, so opposite walls share one right-handed frame.
  const Wall walls[6] = {
      {{-hw, -hd, -hh}, ey, ez, ex, spec.depth, spec.height},  // x = -hw
      {{hw, -hd, -hh}, ey, ez, ex, spec.depth, spec.height},   // x = +hw
      {{-hw, -hd, -hh}, ez, ex, ey, spec.height, spec.width},  // y = -hd
      {{-hw, hd, -hh}, ez, ex, ey, spec.height, spec.width},   // y = +hd
      {{-hw, -hd, -hh}, ex, ey, ez, spec.width, spec.depth},   // z = -hh (floor)
      {{-hw, -hd, hh}, ex, ey, ez, spec.width, spec.depth},    // z = +hh (ceiling)
  };
  double total_area = 0;
  for (const Wall& w : walls) {
    total_area += w.len_u * w.len_v;
  }
  const double spacing = std::sqrt(total_area / spec.count);

  Rng rng(spec.seed);
  SplatScene scene;
  scene.name = "synth-room";
  scene.gaussians.reserve(spec.count);
  // Area-weighted wall choice keeps the splat density uniform.
  for (int i = 0; i < spec.count; ++i) {
    double pick = rng.uniform() * total_area;
    int wi = 0;
    for (; wi < 5; ++wi) {
      const double area = walls[wi].len_u * walls[wi].len_v;
      if (pick < area) {
        break;
      }
      pick -= area;
    }
    const Wall& w = walls[wi];
    const double u = rng.uniform() * w.len_u;
    const double v = rng.uniform() * w.len_v;
    Gaussian3D g;
    g.mean = w.origin + u * w.tan_u + v * w.tan_v;
    const double spin = rng.uniform(0.0, 2.0 * M_PI);
    Eigen::Matrix3d frame;
    frame.col(0) = w.tan_u;
    frame.col(1) = w.tan_v;
    frame.col(2) = w.normal;
    g.orientation = Rotation::from_matrix(frame) *
                    Rotation::axis_angle(ez, spin);
    g.scale = {spacing * rng.uniform(0.9, 1.8), spacing * rng.uniform(0.9, 1.8),
               spacing * 0.02};
    g.opacity = rng.uniform(0.65, 0.95);
    // Two-octave value noise plus a per-splat tint; clamped away from the
    // extremes so exposure transforms have headroom.
    Eigen::Vector3d c = 0.7 * value_noise_rgb(g.mean, 1.7, spec.seed) +
                        0.3 * value_noise_rgb(g.mean, 6.1, spec.seed ^ 0xA5);
    c += Eigen::Vector3d(rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05),
                         rng.uniform(-0.05, 0.05));
    g.color = c.cwiseMax(0.05).cwiseMin(0.95);
    scene.gaussians.push_back(g);
  }
  scene.scene_scale = compute_scene_scale(scene.gaussians);
  return scene;
}

SplatScene transform_scene(const SplatScene& scene, const Similarity& g) {
  if (!(g.scale > 0)) {
    throw std::invalid_argument("transform_scene: scale must be positive");
  }
  SplatScene out;
  out.name = scene.name;
  out.gaussians.reserve(scene.gaussians.size());
  for (const Gaussian3D& s : scene.gaussians) {
    Gaussian3D t = s;
    t.mean = g.scale * (g.rotation * s.mean) + g.translation;
    t.scale = g.scale * s.scale;
    t.orientation = g.rotation * s.orientation;
    out.gaussians.push_back(t);
  }
  out.scene_scale = compute_scene_scale(out.gaussians);
  return out;
}

Pose transformed_camera(const Pose& pose, const Similarity& g) {
  // With y = k R x + t, the camera [Rc Rᵀ | k tc - Rc Rᵀ t] maps y to
  // k * (camera coordinates of x), which projects identically.
  const Rotation r_new = pose.rotation * g.rotation.inverse();
  const Eigen::Vector3d t_new =
      g.scale * pose.translation - (r_new * g.translation);
  return Pose{r_new, t_new};
}

}  // namespace gsrefine
