#include "gsrefine/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "gsrefine/rng.hpp"

namespace gsrefine {

namespace {

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

/// Real roots of a polynomial (highest degree first) via the companion
/// matrix, Newton-polished on the original polynomial.
std::vector<double> real_roots(std::vector<double> coeffs) {
  double maxc = 0;
  for (double c : coeffs) {
    maxc = std::max(maxc, std::abs(c));
  }
  if (maxc == 0) {
    return {};
  }
  for (double& c : coeffs) {
    c /= maxc;
  }
  std::size_t lead = 0;
  while (lead + 1 < coeffs.size() && std::abs(coeffs[lead]) < 1e-13) {
    ++lead;
  }
  coeffs.erase(coeffs.begin(), coeffs.begin() + lead);
  const int deg = static_cast<int>(coeffs.size()) - 1;
  if (deg < 1) {
    return {};
  }
  if (deg == 1) {
    return {-coeffs[1] / coeffs[0]};
  }
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(deg, deg);
  for (int i = 0; i < deg; ++i) {
    companion(0, i) = -coeffs[i + 1] / coeffs[0];
  }
  for (int i = 1; i < deg; ++i) {
    companion(i, i - 1) = 1.0;
  }
  const Eigen::EigenSolver<Eigen::MatrixXd> es(companion);
  std::vector<double> roots;
  auto eval = [&coeffs](double x, double* dfdx) {
    double f = coeffs[0], df = 0;
    for (std::size_t i = 1; i < coeffs.size(); ++i) {
      df = df * x + f;
      f = f * x + coeffs[i];
    }
    *dfdx = df;
    return f;
  };
  for (int i = 0; i < deg; ++i) {
    const std::complex<double> r = es.eigenvalues()[i];
    if (std::abs(r.imag()) > 1e-6 * std::max(1.0, std::abs(r.real()))) {
      continue;
    }
    double x = r.real();
    for (int it = 0; it < 8; ++it) {
      double df;
      const double f = eval(x, &df);
      if (df == 0) {
        break;
      }
      const double step = f / df;
      x -= step;
      if (std::abs(step) < 1e-16 * std::max(1.0, std::abs(x))) {
        break;
      }
    }
    roots.push_back(x);
  }
  return roots;
}

Eigen::Vector3d bearing(const CameraIntrinsics& k, const Eigen::Vector2d& px) {
  return Eigen::Vector3d((px.x() - k.cx) / k.fx, (px.y() - k.cy) / k.fy, 1.0)
      .normalized();
}

/// World -> camera rigid alignment of exactly corresponding point sets.
Pose kabsch(const std::vector<Eigen::Vector3d>& world,
            const std::vector<Eigen::Vector3d>& cam) {
  Eigen::Vector3d wc = Eigen::Vector3d::Zero(), cc = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < world.size(); ++i) {
    wc += world[i];
    cc += cam[i];
  }
  wc /= world.size();
  cc /= cam.size();
  Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < world.size(); ++i) {
    h += (world[i] - wc) * (cam[i] - cc).transpose();
  }
  const Eigen::JacobiSVD<Eigen::Matrix3d> svd(
      h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  d(2, 2) = (svd.matrixV() * svd.matrixU().transpose()).determinant() > 0
                ? 1.0
                : -1.0;
  const Eigen::Matrix3d r = svd.matrixV() * d * svd.matrixU().transpose();
  return Pose{Rotation::from_matrix(r), cc - r * wc};
}

double reproj_error_px(const Pose& pose, const Corr2D3D& c,
                       const CameraIntrinsics& k) {
  const Eigen::Vector3d xc = pose.apply(c.point_world);
  if (xc.z() <= 1e-12) {
    return std::numeric_limits<double>::infinity();
  }
  const Eigen::Vector2d px(k.fx * xc.x() / xc.z() + k.cx,
                           k.fy * xc.y() / xc.z() + k.cy);
  return (px - c.pixel_q).norm();
}

/// Damped Gauss-Newton steps shared by refine_reprojection and the p3p
/// candidate polish. Returns false when no finite step could be produced
/// at the starting point.
bool gn_minimize(Pose* pose, const std::vector<Corr2D3D>& corrs,
                 const CameraIntrinsics& k, int iters,
                 std::vector<double>* trace) {
  auto cost_of = [&corrs, &k](const Pose& p) {
    Eigen::VectorXd r;
    reprojection_jacobian(p, corrs, k, &r, nullptr);
    return r.allFinite() ? r.squaredNorm()
                         : std::numeric_limits<double>::infinity();
  };
  double cost = cost_of(*pose);
  if (trace) {
    trace->push_back(cost);
  }
  if (!std::isfinite(cost)) {
    return false;
  }
  for (int it = 0; it < iters; ++it) {
    Eigen::VectorXd r;
    Eigen::MatrixXd jac;
    reprojection_jacobian(*pose, corrs, k, &r, &jac);
    const Eigen::Matrix<double, 6, 6> h = jac.transpose() * jac;
    const Eigen::Matrix<double, 6, 1> g = jac.transpose() * r;
    if (g.lpNorm<Eigen::Infinity>() < 1e-16 * std::max(1.0, cost)) {
      break;
    }
    double lambda = 0.0;
    bool accepted = false;
    for (int attempt = 0; attempt < 12; ++attempt) {
      Eigen::Matrix<double, 6, 6> damped = h;
      damped.diagonal().array() += lambda;
      const Eigen::LDLT<Eigen::Matrix<double, 6, 6>> ldlt(damped);
      if (ldlt.info() != Eigen::Success) {
        lambda = lambda == 0 ? std::max(1e-12, 1e-6 * h.trace() / 6) : 10 * lambda;
        continue;
      }
      const Eigen::Matrix<double, 6, 1> delta = ldlt.solve(-g);
      if (!delta.allFinite()) {
        lambda = lambda == 0 ? std::max(1e-12, 1e-6 * h.trace() / 6) : 10 * lambda;
        continue;
      }
      const Pose candidate = retract_pose(*pose, delta);
      const double new_cost = cost_of(candidate);
      if (new_cost <= cost) {
        *pose = candidate;
        const double drop = cost - new_cost;
        cost = new_cost;
        if (trace) {
          trace->push_back(cost);
        }
        accepted = true;
        if (drop < 1e-18 * std::max(1.0, cost) ||
            delta.lpNorm<Eigen::Infinity>() < 1e-14) {
          it = iters;  // converged
        }
        break;
      }
      lambda = lambda == 0 ? std::max(1e-12, 1e-6 * h.trace() / 6) : 10 * lambda;
    }
    if (!accepted) {
      return it > 0;  // stalled at the start means a singular system
    }
  }
  return true;
}

}  // namespace

Pose retract_pose(const Pose& pose, const Eigen::Matrix<double, 6, 1>& delta) {
  const Eigen::Vector3d w = delta.head<3>();
  const Rotation dr = Rotation::axis_angle(w, w.norm());
  return Pose{dr * pose.rotation, dr * pose.translation + delta.tail<3>()};
}

void reprojection_jacobian(const Pose& pose,
                           const std::vector<Corr2D3D>& corrs,
                           const CameraIntrinsics& k,
                           Eigen::VectorXd* residuals, Eigen::MatrixXd* jac) {
  const std::size_t n = corrs.size();
  if (residuals) {
    residuals->resize(2 * n);
  }
  if (jac) {
    jac->resize(2 * n, 6);
  }
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector3d xc = pose.apply(corrs[i].point_world);
    const double z = xc.z();
    if (z <= 1e-9) {
      if (residuals) {
        (*residuals)(2 * i) = std::numeric_limits<double>::quiet_NaN();
        (*residuals)(2 * i + 1) = std::numeric_limits<double>::quiet_NaN();
      }
      if (jac) {
        jac->row(2 * i).setZero();
        jac->row(2 * i + 1).setZero();
      }
      continue;
    }
    if (residuals) {
      (*residuals)(2 * i) = k.fx * xc.x() / z + k.cx - corrs[i].pixel_q.x();
      (*residuals)(2 * i + 1) = k.fy * xc.y() / z + k.cy - corrs[i].pixel_q.y();
    }
    if (jac) {
      Eigen::Matrix<double, 2, 3> proj;
      proj << k.fx / z, 0, -k.fx * xc.x() / (z * z), 0, k.fy / z,
          -k.fy * xc.y() / (z * z);
      Eigen::Matrix<double, 3, 6> dx;
      dx.leftCols<3>() = -skew(xc);
      dx.rightCols<3>() = Eigen::Matrix3d::Identity();
      jac->block<2, 6>(2 * i, 0) = proj * dx;
    }
  }
}

std::vector<Pose> p3p(const std::array<Corr2D3D, 3>& corrs,
                      const CameraIntrinsics& k) {
  const Eigen::Vector3d& p1 = corrs[0].point_world;
  const Eigen::Vector3d& p2 = corrs[1].point_world;
  const Eigen::Vector3d& p3 = corrs[2].point_world;
  const double span = std::max(
      {(p2 - p1).norm(), (p3 - p1).norm(), (p3 - p2).norm(), 1e-300});
  if ((p2 - p1).cross(p3 - p1).norm() < 1e-10 * span * span) {
    throw DegeneracyError("p3p: collinear world points");
  }
  const Eigen::Vector3d f1 = bearing(k, corrs[0].pixel_q);
  const Eigen::Vector3d f2 = bearing(k, corrs[1].pixel_q);
  const Eigen::Vector3d f3 = bearing(k, corrs[2].pixel_q);
  const double c12 = f1.dot(f2), c13 = f1.dot(f3), c23 = f2.dot(f3);
  if (c12 > 1.0 - 1e-12 || c13 > 1.0 - 1e-12 || c23 > 1.0 - 1e-12) {
    throw DegeneracyError("p3p: coincident rays");
  }

  const double a2 = (p2 - p3).squaredNorm();
  const double b2 = (p1 - p3).squaredNorm();
  const double c2 = (p1 - p2).squaredNorm();

  // Quartic in v = s3/s1 from the law-of-cosines system (resultant
  // eliminating u = s2/s1).
  const double q4 = a2 * a2 - 2 * a2 * b2 - 2 * a2 * c2 + b2 * b2 -
                    4 * b2 * c2 * c23 * c23 + 2 * b2 * c2 + c2 * c2;
  const double q3 =
      -4 * (a2 * a2 * c13 - a2 * b2 * c12 * c23 - a2 * b2 * c13 -
            2 * a2 * c13 * c2 + b2 * b2 * c12 * c23 - b2 * c12 * c2 * c23 -
            2 * b2 * c13 * c2 * c23 * c23 + b2 * c13 * c2 + c13 * c2 * c2);
  const double q2 =
      2 * (2 * a2 * a2 * c13 * c13 + a2 * a2 - 2 * a2 * b2 * c12 * c12 -
           4 * a2 * b2 * c12 * c13 * c23 - 4 * a2 * c13 * c13 * c2 -
           2 * a2 * c2 + 2 * b2 * b2 * c12 * c12 + 2 * b2 * b2 * c23 * c23 -
           b2 * b2 - 4 * b2 * c12 * c13 * c2 * c23 - 2 * b2 * c2 * c23 * c23 +
           2 * c13 * c13 * c2 * c2 + c2 * c2);
  const double q1 =
      -4 * (a2 * a2 * c13 - 2 * a2 * b2 * c12 * c12 * c13 -
            a2 * b2 * c12 * c23 + a2 * b2 * c13 - 2 * a2 * c13 * c2 +
            b2 * b2 * c12 * c23 - b2 * c12 * c2 * c23 - b2 * c13 * c2 +
            c13 * c2 * c2);
  const double q0 = a2 * a2 - 4 * a2 * b2 * c12 * c12 + 2 * a2 * b2 -
                    2 * a2 * c2 + b2 * b2 - 2 * b2 * c2 + c2 * c2;

  std::vector<Pose> candidates;
  for (double v : real_roots({q4, q3, q2, q1, q0})) {
    if (!(v > 0) || !std::isfinite(v)) {
      continue;
    }
    const double denom = 2.0 * (c23 * v - c12);
    if (std::abs(denom) < 1e-14) {
      continue;
    }
    const double u =
        -((1.0 - v * v) + (a2 - c2) * (1.0 + v * v - 2.0 * v * c13) / b2) /
        denom;
    if (!(u > 0) || !std::isfinite(u)) {
      continue;
    }
    const double d1 = 1.0 + u * u - 2.0 * u * c12;
    if (!(d1 > 0)) {
      continue;
    }
    const double s1 = std::sqrt(c2 / d1);
    const std::vector<Eigen::Vector3d> cam = {s1 * f1, s1 * u * f2,
                                              s1 * v * f3};
    Pose pose = kabsch({p1, p2, p3}, cam);
    // Exactly-determined system: a few Gauss-Newton steps pin the
    // candidate to the residual bound.
    const std::vector<Corr2D3D> three(corrs.begin(), corrs.end());
    gn_minimize(&pose, three, k, 8, nullptr);
    bool good = true;
    for (const Corr2D3D& c : three) {
      if (!(reproj_error_px(pose, c, k) < 1e-6)) {
        good = false;
        break;
      }
    }
    if (!good) {
      continue;
    }
    bool duplicate = false;
    for (const Pose& other : candidates) {
      if (rotation_error_deg(pose, other) < 1e-7 &&
          (pose.translation - other.translation).norm() < 1e-9 * span) {
        duplicate = true;
        break;
      }
    }
    if (!duplicate) {
      candidates.push_back(pose);
    }
  }
  return candidates;
}

SolveResult ransac_pnp(const std::vector<Corr2D3D>& corrs,
                       const CameraIntrinsics& k, const RansacConfig& cfg) {
  if (!(cfg.inlier_threshold_px > 0) || cfg.min_inliers < 4 ||
      !(cfg.confidence > 0) || !(cfg.confidence < 1)) {
    throw std::invalid_argument("ransac_pnp: invalid config");
  }
  const int n = static_cast<int>(corrs.size());
  if (n < 4) {
    throw NoSolutionError("ransac_pnp: need at least 4 correspondences (got " +
                              std::to_string(n) + ")",
                          0, 0);
  }

  Rng rng(cfg.seed);
  auto score_pose = [&](const Pose& pose, std::vector<int>* inliers,
                        double* mean_err) {
    double weight = 0, err_sum = 0;
    int count = 0;
    for (int i = 0; i < n; ++i) {
      const double e = reproj_error_px(pose, corrs[i], k);
      if (e <= cfg.inlier_threshold_px) {
        ++count;
        weight += cfg.weight_by_confidence ? corrs[i].confidence : 1.0;
        err_sum += e;
        if (inliers) {
          inliers->push_back(i);
        }
      }
    }
    if (mean_err) {
      *mean_err = count > 0 ? err_sum / count : 0.0;
    }
    return weight;
  };

  Pose best_pose;
  double best_score = -1.0, best_mean = 0.0;
  int best_count = 0;
  int iterations = 0;
  double adaptive_limit = cfg.max_iterations;
  while (iterations < cfg.max_iterations && iterations < adaptive_limit) {
    ++iterations;
    int idx[4];
    for (int s = 0; s < 4;) {
      const int candidate = static_cast<int>(rng.uniform_index(n));
      bool repeat = false;
      for (int t = 0; t < s; ++t) {
        repeat |= idx[t] == candidate;
      }
      if (!repeat) {
        idx[s++] = candidate;
      }
    }
    std::vector<Pose> candidates;
    try {
      candidates = p3p({corrs[idx[0]], corrs[idx[1]], corrs[idx[2]]}, k);
    } catch (const DegeneracyError&) {
      continue;
    }
    if (candidates.empty()) {
      continue;
    }
    // Disambiguate with the fourth sample.
    const Corr2D3D& probe = corrs[idx[3]];
    double probe_best = std::numeric_limits<double>::infinity();
    const Pose* chosen = nullptr;
    for (const Pose& c : candidates) {
      const double e = reproj_error_px(c, probe, k);
      if (e < probe_best) {
        probe_best = e;
        chosen = &c;
      }
    }
    if (!chosen || !std::isfinite(probe_best)) {
      continue;
    }
    double mean_err = 0;
    const double score = score_pose(*chosen, nullptr, &mean_err);
    if (score > best_score ||
        (score == best_score && mean_err < best_mean)) {
      best_score = score;
      best_mean = mean_err;
      best_pose = *chosen;
      std::vector<int> inl;
      score_pose(*chosen, &inl, nullptr);
      best_count = static_cast<int>(inl.size());
      const double w =
          std::min(1.0, static_cast<double>(best_count) / std::max(1, n));
      const double p_good = std::pow(w, 4);
      if (p_good >= 1.0 - 1e-12) {
        adaptive_limit = iterations;
      } else if (p_good > 0) {
        adaptive_limit = std::min<double>(
            cfg.max_iterations,
            std::ceil(std::log1p(-cfg.confidence) / std::log1p(-p_good)));
      }
    }
  }

  if (best_count < cfg.min_inliers) {
    throw NoSolutionError(
        "ransac_pnp: best consensus has " + std::to_string(best_count) +
            " inliers, below min_inliers " + std::to_string(cfg.min_inliers),
        best_count, iterations);
  }

  // Refine on the consensus set, re-select inliers with the refined pose,
  // and repeat until the set stabilizes. A single pass keeps the minimal
  // sample's selection bias; iterating washes it out. A refined pose is
  // accepted only while its consensus does not shrink, which guards
  // against the refinement drifting into a different basin.
  Pose pose = best_pose;
  std::vector<int> inliers;
  score_pose(pose, &inliers, nullptr);
  for (int round = 0; round < 5; ++round) {
    std::vector<Corr2D3D> consensus;
    consensus.reserve(inliers.size());
    for (int i : inliers) {
      consensus.push_back(corrs[i]);
    }
    const RefineResult refined = refine_reprojection(pose, consensus, k, 50);
    if (refined.degenerate) {
      break;
    }
    std::vector<int> new_inliers;
    score_pose(refined.pose, &new_inliers, nullptr);
    if (new_inliers.size() < inliers.size()) {
      break;
    }
    pose = refined.pose;
    const bool stable = new_inliers == inliers;
    inliers = std::move(new_inliers);
    if (stable) {
      break;
    }
  }

  SolveResult result;
  result.iterations_used = iterations;
  result.pose = pose;
  double mean_err = 0;
  std::vector<int> final_inliers;
  score_pose(pose, &final_inliers, &mean_err);
  result.inlier_indices = std::move(final_inliers);
  result.mean_reproj_error_px = mean_err;
  return result;
}

RefineResult refine_reprojection(const Pose& pose0,
                                 const std::vector<Corr2D3D>& corrs,
                                 const CameraIntrinsics& k, int iters) {
  if (corrs.size() < 4) {
    throw std::invalid_argument("refine_reprojection: need >= 4 inliers");
  }
  RefineResult out;
  out.pose = pose0;
  const bool ok = gn_minimize(&out.pose, corrs, k, iters, &out.cost_trace);
  if (!ok) {
    out.pose = pose0;
    out.degenerate = true;
  }
  return out;
}

}  // namespace gsrefine
