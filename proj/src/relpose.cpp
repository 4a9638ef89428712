#include "gsrefine/relpose.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace gsrefine {

namespace {

double median_inplace(std::vector<double>& v) {
  const std::size_t n = v.size();
  const std::size_t mid = n / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  double m = v[mid];
  if (n % 2 == 0) {
    const double lower = *std::max_element(v.begin(), v.begin() + mid);
    m = 0.5 * (lower + m);
  }
  return m;
}

}  // namespace

ScaleEstimate recover_scale(const PointMapEstimate& pointmap,
                            const DepthMap& depth) {
  if (pointmap.width != depth.width || pointmap.height != depth.height) {
    throw std::invalid_argument(
        "recover_scale: point map and depth map dimensions differ");
  }
  std::vector<double> ratios;
  ratios.reserve(pointmap.points.size());
  for (std::size_t i = 0; i < pointmap.points.size(); ++i) {
    if (!pointmap.valid[i] || !depth.valid[i]) {
      continue;
    }
    const double pz = pointmap.points[i].z();
    const double dz = depth.depth[i];
    if (!(pz > 0) || !(dz > 0)) {
      continue;
    }
    ratios.push_back(dz / pz);
  }
  if (static_cast<int>(ratios.size()) < kMinScaleSamples) {
    throw std::runtime_error("recover_scale: only " +
                             std::to_string(ratios.size()) +
                             " jointly valid pixels, need " +
                             std::to_string(kMinScaleSamples));
  }
  ScaleEstimate est;
  est.sample_count = static_cast<int>(ratios.size());
  std::vector<double> work = ratios;
  est.s = median_inplace(work);
  if (!(est.s > 0)) {
    throw std::runtime_error("recover_scale: non-positive median ratio");
  }
  work = ratios;
  for (double& r : work) {
    r = std::abs(r - est.s);
  }
  est.dispersion = median_inplace(work);
  return est;
}

Pose compose_refined(const Pose& initial, const Rotation& rel_rotation,
                     const Eigen::Vector3d& rel_translation, double s) {
  if (!(s > 0)) {
    throw std::invalid_argument("compose_refined: scale must be positive");
  }
  return Pose{rel_rotation * initial.rotation,
              rel_rotation * initial.translation + s * rel_translation};
}

PointMapEstimate load_pointmap(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open point map: " + path.string());
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error(path.string() + ": empty point map");
  }
  PointMapEstimate pm;
  if (std::sscanf(line.c_str(), "PTMAP v1 %d %d", &pm.width, &pm.height) != 2 ||
      pm.width <= 0 || pm.height <= 0) {
    throw std::runtime_error(path.string() + ": bad point map header");
  }
  const std::size_t n = std::size_t(pm.width) * pm.height;
  pm.points.assign(n, Eigen::Vector3d::Zero());
  pm.valid.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::getline(in, line)) {
      throw std::runtime_error(path.string() + ": truncated at pixel " +
                               std::to_string(i));
    }
    std::istringstream ls(line);
    double x, y, z;
    int valid;
    if (!(ls >> x >> y >> z >> valid)) {
      throw std::runtime_error(path.string() + ": pixel " + std::to_string(i) +
                               ": expected `x y z valid`");
    }
    if (valid) {
      if (!(z > 0) || !std::isfinite(x + y + z)) {
        throw std::runtime_error(path.string() + ": pixel " +
                                 std::to_string(i) +
                                 ": valid point must have finite positive z");
      }
      pm.points[i] = {x, y, z};
      pm.valid[i] = 1;
    }
  }
  if (!std::getline(in, line)) {
    throw std::runtime_error(path.string() + ": missing REL trailer");
  }
  double qw, qx, qy, qz, tx, ty, tz;
  if (std::sscanf(line.c_str(), "REL %lf %lf %lf %lf %lf %lf %lf", &qw, &qx,
                  &qy, &qz, &tx, &ty, &tz) != 7) {
    throw std::runtime_error(path.string() + ": malformed REL trailer");
  }
  pm.rel_rotation = Rotation(qw, qx, qy, qz);
  pm.rel_translation = {tx, ty, tz};
  return pm;
}

void save_pointmap(const PointMapEstimate& pm,
                   const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write point map: " + path.string());
  }
  out << "PTMAP v1 " << pm.width << " " << pm.height << "\n";
  char buf[256];
  for (std::size_t i = 0; i < pm.points.size(); ++i) {
    if (pm.valid[i]) {
      std::snprintf(buf, sizeof(buf), "%.9g %.9g %.9g 1\n", pm.points[i].x(),
                    pm.points[i].y(), pm.points[i].z());
    } else {
      std::snprintf(buf, sizeof(buf), "0 0 0 0\n");
    }
    out << buf;
  }
  const Eigen::Quaterniond& q = pm.rel_rotation.quat();
  std::snprintf(buf, sizeof(buf), "REL %.17g %.17g %.17g %.17g %.17g %.17g %.17g\n",
                q.w(), q.x(), q.y(), q.z(), pm.rel_translation.x(),
                pm.rel_translation.y(), pm.rel_translation.z());
  out << buf;
  if (!out) {
    throw std::runtime_error("error writing point map: " + path.string());
  }
}

}  // namespace gsrefine
