#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "gsrefine/geometry.hpp"
#include "gsrefine/lifting.hpp"

namespace gsrefine {

struct RansacConfig {
  double inlier_threshold_px = 3.0;
  int max_iterations = 2000;
  double confidence = 0.9999;
  int min_inliers = 6;
  std::uint64_t seed = 0;
  bool weight_by_confidence = false;  // score by summed confidence instead of count
};

struct SolveResult {
  Pose pose;
  std::vector<int> inlier_indices;
  double mean_reproj_error_px = 0.0;  // over inliers
  int iterations_used = 0;
};

struct NoSolutionError : std::runtime_error {
  NoSolutionError(const std::string& msg, int best_inliers_, int iterations_)
      : std::runtime_error(msg), best_inliers(best_inliers_),
        iterations(iterations_) {}
  int best_inliers = 0;
  int iterations = 0;
};

struct DegeneracyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Minimal three-point absolute pose. Returns up to 4 candidates, each
/// re-projecting all three points within 1e-6 px. Throws DegeneracyError
/// on collinear points or coincident rays.
std::vector<Pose> p3p(const std::array<Corr2D3D, 3>& corrs,
                      const CameraIntrinsics& k);

/// Hypothesize-and-verify: sample 3 + 1 disambiguation point, score by
/// inlier count (ties by lower mean inlier residual), adaptive iteration
/// bound, final Gauss-Newton refinement on the consensus set. Cheirality
/// (positive depth) is required of inliers. Deterministic per seed.
/// Throws NoSolutionError when fewer than 4 correspondences are given or
/// no consensus reaches min_inliers.
SolveResult ransac_pnp(const std::vector<Corr2D3D>& corrs,
                       const CameraIntrinsics& k, const RansacConfig& cfg);

struct RefineResult {
  Pose pose;
  bool degenerate = false;          // normal equations singular; pose0 returned
  std::vector<double> cost_trace;   // accepted costs, non-increasing
};

/// Gauss-Newton on total squared reprojection error over the 6-DoF pose,
/// with additive damping when a step would increase the cost. Requires at
/// least 4 correspondences.
RefineResult refine_reprojection(const Pose& pose0,
                                 const std::vector<Corr2D3D>& corrs,
                                 const CameraIntrinsics& k, int iters = 50);

/// Residual stack (2n) and its analytic Jacobian (2n x 6) with respect to
/// the left-multiplied se(3) perturbation [dtheta, dt]; exposed for the
/// finite-difference checks.
void reprojection_jacobian(const Pose& pose,
                           const std::vector<Corr2D3D>& corrs,
                           const CameraIntrinsics& k,
                           Eigen::VectorXd* residuals, Eigen::MatrixXd* jac);

/// The retraction used by the solver: R <- exp(dtheta) R,
/// t <- exp(dtheta) t + dt.
Pose retract_pose(const Pose& pose, const Eigen::Matrix<double, 6, 1>& delta);

}  // namespace gsrefine
