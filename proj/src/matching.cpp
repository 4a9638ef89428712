#include "gsrefine/matching.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "gsrefine/renderer.hpp"
#include "gsrefine/rng.hpp"

namespace gsrefine {

namespace {

// Margin wider than the match file's 1e-6 quantum, so clamped values
// stay strictly inside the bounds after formatting.
double clamp_coord(double v, int extent) {
  return std::clamp(v, -0.5 + 1e-3, extent - 0.5 - 1e-3);
}

}  // namespace

OracleMatchResult oracle_match_from_depth(const DepthMap& render_depth,
                                          const CameraIntrinsics& k,
                                          const Pose& pose_query_gt,
                                          const Pose& pose_render,
                                          const OracleMatchParams& params) {
  if (params.outlier_frac < 0 || params.outlier_frac >= 1) {
    throw std::invalid_argument("oracle_match: outlier_frac must be in [0,1)");
  }
  if (params.count < 1) {
    throw std::invalid_argument("oracle_match: count must be >= 1");
  }
  Rng rng(params.seed);

  std::vector<std::size_t> pool;
  pool.reserve(render_depth.depth.size());
  for (std::size_t i = 0; i < render_depth.depth.size(); ++i) {
    if (render_depth.valid[i]) {
      pool.push_back(i);
    }
  }

  struct Sample {
    Eigen::Vector2d pixel_q, pixel_r;
  };
  std::vector<Sample> samples;
  samples.reserve(params.count);
  // Shuffle-as-needed draw without replacement; stop once `count` samples
  // pass the covisibility test or the pool runs out.
  for (std::size_t drawn = 0;
       drawn < pool.size() && samples.size() < std::size_t(params.count);
       ++drawn) {
    const std::size_t j = drawn + rng.uniform_index(pool.size() - drawn);
    std::swap(pool[drawn], pool[j]);
    const std::size_t px = pool[drawn];
    const int x = static_cast<int>(px % render_depth.width);
    const int y = static_cast<int>(px / render_depth.width);
    const Eigen::Vector3d world = backproject(
        k, pose_render, Eigen::Vector2d(x, y), render_depth.depth[px]);
    const auto proj_q = project(k, pose_query_gt, world);
    if (!proj_q || !pixel_in_bounds(proj_q->pixel, k.width, k.height)) {
      continue;
    }
    samples.push_back(Sample{proj_q->pixel, Eigen::Vector2d(x, y)});
  }
  if (samples.size() < 4) {
    throw CovisibilityError(
        "oracle_match: fewer than 4 covisible samples (got " +
        std::to_string(samples.size()) + ")");
  }

  const int m = static_cast<int>(samples.size());
  OracleMatchResult result;
  result.set.query_width = k.width;
  result.set.query_height = k.height;
  result.set.render_width = render_depth.width;
  result.set.render_height = render_depth.height;
  result.set.matches.reserve(m);
  // The pair's pixel noise rides on the query endpoint. The render
  // endpoint stays the sampled pixel: it anchors the depth lookup, and a
  // matcher's relative disagreement is equivalent to a single offset.
  for (const Sample& s : samples) {
    Correspondence c;
    c.pixel_q = s.pixel_q;
    c.pixel_r = s.pixel_r;
    c.confidence = 1.0;
    if (params.noise_px > 0) {
      c.pixel_q.x() += params.noise_px * rng.normal();
      c.pixel_q.y() += params.noise_px * rng.normal();
      c.pixel_q.x() = clamp_coord(c.pixel_q.x(), k.width);
      c.pixel_q.y() = clamp_coord(c.pixel_q.y(), k.height);
    }
    result.set.matches.push_back(c);
  }

  // Replace the render side of a random subset with uniform in-bounds
  // pixels; their labels live only in the diagnostics.
  const int n_out = static_cast<int>(std::floor(params.outlier_frac * m));
  std::vector<int> order(m);
  for (int i = 0; i < m; ++i) {
    order[i] = i;
  }
  for (int i = 0; i < n_out; ++i) {
    const int j = i + static_cast<int>(rng.uniform_index(m - i));
    std::swap(order[i], order[j]);
  }
  result.outlier_indices.assign(order.begin(), order.begin() + n_out);
  std::sort(result.outlier_indices.begin(), result.outlier_indices.end());
  for (int idx : result.outlier_indices) {
    Correspondence& c = result.set.matches[idx];
    c.pixel_r.x() = rng.uniform(-0.5, render_depth.width - 0.5);
    c.pixel_r.y() = rng.uniform(-0.5, render_depth.height - 0.5);
    c.confidence = rng.uniform();
  }
  return result;
}

OracleMatchResult oracle_match(const SplatScene& scene,
                               const CameraIntrinsics& k,
                               const Pose& pose_query_gt,
                               const Pose& pose_render,
                               const OracleMatchParams& params) {
  const RenderedView view =
      render(scene, k, pose_render, RenderOptions::for_scene(scene));
  return oracle_match_from_depth(normalized_depth(view), k, pose_query_gt,
                                 pose_render, params);
}

MatchSet load_matches(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open match file: " + path.string());
  }
  std::string line;
  if (!std::getline(in, line) || line != "MATCHES v1") {
    throw std::runtime_error(path.string() + ": malformed header (magic)");
  }
  MatchSet set;
  if (!std::getline(in, line) ||
      std::sscanf(line.c_str(), "query=%dx%d", &set.query_width,
                  &set.query_height) != 2) {
    throw std::runtime_error(path.string() + ": malformed header (query size)");
  }
  if (!std::getline(in, line) ||
      std::sscanf(line.c_str(), "render=%dx%d", &set.render_width,
                  &set.render_height) != 2) {
    throw std::runtime_error(path.string() +
                             ": malformed header (render size)");
  }
  int record = 0;
  while (std::getline(in, line)) {
    if (line.empty()) {
      continue;
    }
    ++record;
    Correspondence c;
    std::istringstream ls(line);
    if (!(ls >> c.pixel_q.x() >> c.pixel_q.y() >> c.pixel_r.x() >>
          c.pixel_r.y() >> c.confidence)) {
      throw std::runtime_error(path.string() + ": line " +
                               std::to_string(record) + ": expected 5 fields");
    }
    if (!pixel_in_bounds(c.pixel_q, set.query_width, set.query_height)) {
      throw std::runtime_error(path.string() + ": line " +
                               std::to_string(record) +
                               ": query pixel out of bounds");
    }
    if (!pixel_in_bounds(c.pixel_r, set.render_width, set.render_height)) {
      throw std::runtime_error(path.string() + ": line " +
                               std::to_string(record) +
                               ": render pixel out of bounds");
    }
    if (c.confidence < 0 || c.confidence > 1 || !std::isfinite(c.confidence)) {
      throw std::runtime_error(path.string() + ": line " +
                               std::to_string(record) +
                               ": confidence outside [0, 1]");
    }
    set.matches.push_back(c);
  }
  return set;
}

void save_matches(const MatchSet& set, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write match file: " + path.string());
  }
  out << "MATCHES v1\n";
  out << "query=" << set.query_width << "x" << set.query_height << "\n";
  out << "render=" << set.render_width << "x" << set.render_height << "\n";
  char buf[160];
  for (const Correspondence& c : set.matches) {
    std::snprintf(buf, sizeof(buf), "%.6f %.6f %.6f %.6f %.6f\n",
                  c.pixel_q.x(), c.pixel_q.y(), c.pixel_r.x(), c.pixel_r.y(),
                  c.confidence);
    out << buf;
  }
  if (!out) {
    throw std::runtime_error("error writing match file: " + path.string());
  }
}

PointMapEstimate oracle_pointmap_from_depth(const DepthMap& render_depth,
                                            const CameraIntrinsics& k,
                                            const Pose& pose_query_gt,
                                            const Pose& pose_render,
                                            const OraclePointMapParams& params) {
  if (!(params.scale_corruption > 0)) {
    throw std::invalid_argument(
        "oracle_pointmap: scale_corruption must be positive");
  }
  Rng rng(params.seed);
  PointMapEstimate pm;
  pm.width = render_depth.width;
  pm.height = render_depth.height;
  pm.points.assign(render_depth.depth.size(), Eigen::Vector3d::Zero());
  pm.valid = render_depth.valid;
  for (int y = 0; y < pm.height; ++y) {
    for (int x = 0; x < pm.width; ++x) {
      const std::size_t i = pm.idx(x, y);
      if (!pm.valid[i]) {
        continue;
      }
      const double z = render_depth.depth[i];
      Eigen::Vector3d cam((x - k.cx) / k.fx * z, (y - k.cy) / k.fy * z, z);
      cam *= params.scale_corruption;
      if (params.noise_3d > 0) {
        cam += params.noise_3d *
               Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal());
      }
      if (cam.z() <= 0) {
        pm.valid[i] = 0;  // noise pushed the point behind the camera
        continue;
      }
      pm.points[i] = cam;
    }
  }
  const Pose rel = compose(pose_query_gt, inverse(pose_render));
  pm.rel_rotation = rel.rotation;
  pm.rel_translation = params.scale_corruption * rel.translation;
  return pm;
}

PointMapEstimate oracle_pointmap(const SplatScene& scene,
                                 const CameraIntrinsics& k,
                                 const Pose& pose_query_gt,
                                 const Pose& pose_render,
                                 const OraclePointMapParams& params) {
  const RenderedView view =
      render(scene, k, pose_render, RenderOptions::for_scene(scene));
  return oracle_pointmap_from_depth(normalized_depth(view), k, pose_query_gt,
                                    pose_render, params);
}

}  // namespace gsrefine
