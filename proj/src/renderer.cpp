#include "gsrefine/renderer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "gsrefine/kernels.hpp"

namespace gsrefine {

namespace {

constexpr double kMinBoundAlpha = 1e-12;  // bounding-box opacity floor

void check_options(const RenderOptions& opts) {
  if (!(opts.near_clip > 0)) {
    throw std::invalid_argument("render: near_clip must be positive");
  }
  if (opts.transmittance_floor < 0 || opts.transmittance_floor >= 1 ||
      opts.alpha_cutoff < 0 || opts.alpha_cutoff >= 1) {
    throw std::invalid_argument("render: floors/cutoffs must be in [0, 1)");
  }
  if (!(opts.alpha_max > 0) || opts.alpha_max > 1.0) {
    throw std::invalid_argument("render: alpha_max must be in (0, 1]");
  }
}

struct ScreenSplat {
  double z;
  int index;
  double mx, my;
  double conic_a, conic_b, conic_c;  // inverse screen covariance
  double sigma_xx, sigma_yy;         // screen covariance diagonal
  double qmax;                       // power bound for the bounding box
  double opacity;
  double cr, cg, cb;
};

/// Projects one gaussian to screen. Returns false when culled (behind the
/// near plane or nowhere above the bounding opacity floor); sets
/// `degenerate` when the screen covariance is not invertible.
bool project_splat(const Gaussian3D& g, int index, const CameraIntrinsics& k,
                   const Eigen::Matrix3d& rot, const Eigen::Vector3d& trans,
                   const RenderOptions& opts, ScreenSplat* out,
                   bool* degenerate) {
  *degenerate = false;
  const Eigen::Vector3d xc = rot * g.mean + trans;
  const double z = xc.z();
  if (z <= opts.near_clip) {
    return false;
  }
  const double cutoff = std::max(opts.alpha_cutoff, kMinBoundAlpha);
  if (g.opacity < cutoff) {
    return false;
  }
  const Eigen::Matrix3d m = rot * g.orientation.matrix();
  const Eigen::Matrix3d cov_cam =
      m * g.scale.array().square().matrix().asDiagonal() * m.transpose();
  // The affine approximation is evaluated at a frustum-bounded point;
  // an unbounded Jacobian smears grazing splats across the whole image.
  const double lim_x = 1.3 * 0.5 * k.width / k.fx;
  const double lim_y = 1.3 * 0.5 * k.height / k.fy;
  const double tx = std::clamp(xc.x() / z, -lim_x, lim_x);
  const double ty = std::clamp(xc.y() / z, -lim_y, lim_y);
  Eigen::Matrix<double, 2, 3> jac;
  jac << k.fx / z, 0, -k.fx * tx / z, 0, k.fy / z, -k.fy * ty / z;
  Eigen::Matrix2d cov2d = jac * cov_cam * jac.transpose();
  cov2d(0, 0) += opts.lowpass_dilation;
  cov2d(1, 1) += opts.lowpass_dilation;
  const double det = cov2d(0, 0) * cov2d(1, 1) - cov2d(0, 1) * cov2d(0, 1);
  if (!(det > 0) || !std::isfinite(det)) {
    *degenerate = true;
    return false;
  }
  out->z = z;
  out->index = index;
  out->mx = k.fx * xc.x() / z + k.cx;
  out->my = k.fy * xc.y() / z + k.cy;
  out->conic_a = cov2d(1, 1) / det;
  out->conic_b = -cov2d(0, 1) / det;
  out->conic_c = cov2d(0, 0) / det;
  out->sigma_xx = cov2d(0, 0);
  out->sigma_yy = cov2d(1, 1);
  out->qmax = std::log(g.opacity / cutoff);
  out->opacity = g.opacity;
  out->cr = g.color.x();
  out->cg = g.color.y();
  out->cb = g.color.z();
  return true;
}

RenderedView make_view(const CameraIntrinsics& k) {
  RenderedView view;
  view.width = k.width;
  view.height = k.height;
  view.rgb = Image(k.width, k.height);
  view.depth_raw.assign(std::size_t(k.width) * k.height, 0.0);
  view.alpha.assign(std::size_t(k.width) * k.height, 0.0);
  return view;
}

}  // namespace

RenderedView render(const SplatScene& scene, const CameraIntrinsics& k,
                    const Pose& pose, const RenderOptions& opts) {
  validate_intrinsics(k);
  check_options(opts);
  RenderedView view = make_view(k);

  const Eigen::Matrix3d rot = pose.rotation.matrix();
  std::vector<ScreenSplat> splats;
  splats.reserve(scene.gaussians.size());
  for (std::size_t i = 0; i < scene.gaussians.size(); ++i) {
    ScreenSplat s;
    bool degenerate = false;
    if (project_splat(scene.gaussians[i], static_cast<int>(i), k, rot,
                      pose.translation, opts, &s, &degenerate)) {
      splats.push_back(s);
    } else if (degenerate) {
      ++view.skipped_degenerate;
    }
  }
  std::sort(splats.begin(), splats.end(),
            [](const ScreenSplat& a, const ScreenSplat& b) {
              return a.z != b.z ? a.z < b.z : a.index < b.index;
            });

  const std::size_t npx = std::size_t(k.width) * k.height;
  std::vector<double> transmittance(npx, 1.0);
  const kernels::KernelTable& kern = kernels::active();

  for (const ScreenSplat& s : splats) {
    const double hy = std::sqrt(2.0 * s.qmax * s.sigma_yy);
    const int y0 = std::max(0, int(std::ceil(s.my - hy)));
    const int y1 = std::min(k.height - 1, int(std::floor(s.my + hy)));
    const double c2 = 0.5 * s.conic_a;
    for (int y = y0; y <= y1; ++y) {
      const double dy = y - s.my;
      const double c1 = s.conic_b * dy;
      const double c0 = 0.5 * s.conic_c * dy * dy;
      // Pixels of this row inside the qmax ellipse.
      const double disc = c1 * c1 - 4.0 * c2 * (c0 - s.qmax);
      if (disc < 0) {
        continue;
      }
      const double half = std::sqrt(disc);
      const int xs = std::max(0, int(std::ceil(s.mx + (-c1 - half) / (2 * c2))));
      const int xe =
          std::min(k.width - 1, int(std::floor(s.mx + (-c1 + half) / (2 * c2))));
      if (xs > xe) {
        continue;
      }
      kernels::CompositeRowCtx ctx;
      ctx.c2 = c2;
      ctx.c1 = c1;
      ctx.c0 = c0;
      ctx.dx0 = xs - s.mx;
      ctx.opacity = s.opacity;
      ctx.alpha_max = opts.alpha_max;
      ctx.alpha_cutoff = opts.alpha_cutoff;
      ctx.t_floor = opts.transmittance_floor;
      ctx.cr = s.cr;
      ctx.cg = s.cg;
      ctx.cb = s.cb;
      ctx.depth = s.z;
      const std::size_t base = view.idx(xs, y);
      kern.composite_row(ctx, xe - xs + 1, transmittance.data() + base,
                         view.rgb.r.data() + base, view.rgb.g.data() + base,
                         view.rgb.b.data() + base,
                         view.depth_raw.data() + base);
    }
  }

  for (std::size_t i = 0; i < npx; ++i) {
    const double t = transmittance[i];
    view.alpha[i] = 1.0 - t;
    view.rgb.r[i] += opts.background.x() * t;
    view.rgb.g[i] += opts.background.y() * t;
    view.rgb.b[i] += opts.background.z() * t;
  }
  return view;
}

RenderedView brute_force_reference(const SplatScene& scene,
                                   const CameraIntrinsics& k, const Pose& pose,
                                   const RenderOptions& opts) {
  validate_intrinsics(k);
  check_options(opts);
  RenderedView view = make_view(k);

  struct RefSplat {
    double z, mx, my;
    Eigen::Matrix2d conic;
    double opacity;
    Eigen::Vector3d color;
    int index;
  };
  const Eigen::Matrix3d rot = pose.rotation.matrix();
  std::vector<RefSplat> splats;
  for (std::size_t i = 0; i < scene.gaussians.size(); ++i) {
    const Gaussian3D& g = scene.gaussians[i];
    const Eigen::Vector3d xc = rot * g.mean + pose.translation;
    if (xc.z() <= opts.near_clip) {
      continue;
    }
    const Eigen::Matrix3d cov_cam = rot * g.covariance() * rot.transpose();
    const double lim_x = 1.3 * 0.5 * k.width / k.fx;
    const double lim_y = 1.3 * 0.5 * k.height / k.fy;
    const double tx = std::clamp(xc.x() / xc.z(), -lim_x, lim_x);
    const double ty = std::clamp(xc.y() / xc.z(), -lim_y, lim_y);
    Eigen::Matrix<double, 2, 3> jac;
    jac << k.fx / xc.z(), 0, -k.fx * tx / xc.z(), 0, k.fy / xc.z(),
        -k.fy * ty / xc.z();
    Eigen::Matrix2d cov2d = jac * cov_cam * jac.transpose();
    cov2d(0, 0) += opts.lowpass_dilation;
    cov2d(1, 1) += opts.lowpass_dilation;
    if (!(cov2d.determinant() > 0) || !cov2d.allFinite()) {
      ++view.skipped_degenerate;
      continue;
    }
    splats.push_back(RefSplat{xc.z(), k.fx * xc.x() / xc.z() + k.cx,
                              k.fy * xc.y() / xc.z() + k.cy,
                              cov2d.inverse(), g.opacity, g.color,
                              static_cast<int>(i)});
  }
  std::sort(splats.begin(), splats.end(),
            [](const RefSplat& a, const RefSplat& b) {
              return a.z != b.z ? a.z < b.z : a.index < b.index;
            });

  for (int y = 0; y < k.height; ++y) {
    for (int x = 0; x < k.width; ++x) {
      const std::size_t px = view.idx(x, y);
      double t = 1.0;
      Eigen::Vector3d color = Eigen::Vector3d::Zero();
      double depth = 0.0;
      for (const RefSplat& s : splats) {
        if (t < opts.transmittance_floor) {
          break;
        }
        const Eigen::Vector2d d(x - s.mx, y - s.my);
        const double power = std::max(0.0, 0.5 * d.dot(s.conic * d));
        const double alpha =
            std::min(opts.alpha_max, s.opacity * std::exp(-power));
        if (alpha < opts.alpha_cutoff) {
          continue;
        }
        const double w = alpha * t;
        color += w * s.color;
        depth += w * s.z;
        t *= 1.0 - alpha;
      }
      view.rgb.r[px] = color.x() + opts.background.x() * t;
      view.rgb.g[px] = color.y() + opts.background.y() * t;
      view.rgb.b[px] = color.z() + opts.background.z() * t;
      view.depth_raw[px] = depth;
      view.alpha[px] = 1.0 - t;
    }
  }
  return view;
}

DepthMap normalized_depth(const RenderedView& view, double alpha_min) {
  if (!(alpha_min > 0) || !(alpha_min < 1)) {
    throw std::invalid_argument("normalized_depth: alpha_min must be in (0,1)");
  }
  DepthMap d(view.width, view.height);
  for (std::size_t i = 0; i < view.alpha.size(); ++i) {
    if (view.alpha[i] >= alpha_min) {
      d.depth[i] = view.depth_raw[i] / view.alpha[i];
      d.valid[i] = 1;
    }
  }
  return d;
}

}  // namespace gsrefine
