#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "gsrefine/exposure.hpp"
#include "gsrefine/geometry.hpp"
#include "gsrefine/image.hpp"
#include "gsrefine/matching.hpp"
#include "gsrefine/renderer.hpp"
#include "gsrefine/scene.hpp"
#include "gsrefine/solver.hpp"

namespace gsrefine {

enum class RefineMode { full, rel, failed_fallback };

std::string refine_mode_name(RefineMode m);

struct StageTimings {
  double render_ms = 0, act_ms = 0, match_io_ms = 0, lift_ms = 0,
         solve_ms = 0;
};

struct RefinementResult {
  Pose initial_pose;
  Pose refined_pose;
  RefineMode mode = RefineMode::failed_fallback;
  int inlier_count = 0;
  double mean_inlier_reproj_px = 0;
  std::optional<double> scale;  // rel mode only
  StageTimings timings;
  // One-shot contract counters and stage diagnostics.
  int render_calls = 0;
  int solve_calls = 0;
  int matches_total = 0;
  int matches_after_filter = 0;
  int lifted_count = 0;
  int dropped_matches = 0;
  std::string failure_reason;  // set in failed_fallback mode
};

/// Where 2D-2D matches come from.
struct OracleMatcherSource {
  Pose gt_pose;  // synthetic ground truth driving the oracle
  OracleMatchParams params;
};
struct MatchFileSource {
  std::filesystem::path path;
};
/// Directory exchange with an external matcher: expects
/// <dir>/matches.txt; when absent, stages <dir>/query.ppm and
/// <dir>/render.ppm and throws MatchesPending.
struct MatchDirSource {
  std::filesystem::path dir;
};
using MatcherSource =
    std::variant<OracleMatcherSource, MatchFileSource, MatchDirSource>;

struct MatchesPending : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct PipelineOptions {
  std::optional<RenderOptions> render;  // default: RenderOptions::for_scene
  std::optional<ActNetwork> act;        // absent = identity transform
  double confidence_threshold = 0.5;    // drop matches below this
  double alpha_min = 0.5;               // depth validity threshold
  RansacConfig ransac;
};

/// One-shot refinement: render at the initial pose, optional exposure
/// adaptation, obtain matches, lift through rendered depth, PnP+RANSAC.
/// Exactly one render and one solve. On solver or covisibility failure
/// returns failed_fallback with the initial pose untouched.
RefinementResult refine_once(const Image& query, const CameraIntrinsics& k,
                             const Pose& initial, const SplatScene& scene,
                             const MatcherSource& matcher,
                             const PipelineOptions& opts);

struct OraclePointmapSource {
  Pose gt_pose;
  OraclePointMapParams params;
};
struct PointmapFileSource {
  std::filesystem::path path;
};
using PointmapSource = std::variant<OraclePointmapSource, PointmapFileSource>;

/// Fast path: render depth, recover metric scale of the matcher's
/// relative pose, compose. Falls back on scale failure.
RefinementResult refine_rel(const Image& query, const CameraIntrinsics& k,
                            const Pose& initial, const SplatScene& scene,
                            const PointmapSource& pointmap,
                            const PipelineOptions& opts);

struct EvalReport {
  std::vector<std::pair<double, double>> per_query;  // (rot deg, trans)
  double median_rot_deg = 0;
  double median_trans = 0;
  double recall_5cm_5deg = 0;  // percent
  double recall_2cm_2deg = 0;  // percent
  int count = 0;
};

/// Recall counts a frame when trans <= thresholds.first AND
/// rot <= thresholds.second (inclusive). Translation thresholds are in
/// world units (meters: 5 cm = 0.05).
EvalReport evaluate_errors(
    const std::vector<std::pair<double, double>>& rot_trans_errors);
EvalReport evaluate(const std::vector<std::pair<Pose, Pose>>& gt_est_pairs);

void write_eval_json(const EvalReport& report,
                     const std::filesystem::path& path);

struct SweepCell {
  std::string sweep;  // "rotation" | "translation"
  double magnitude = 0;
  int trials = 0;
  double avg_rot_err_deg = 0;   // post-refinement
  double avg_trans_err = 0;     // post-refinement
  double avg_initial_rot_deg = 0;
  double avg_initial_trans = 0;
  int fallback_count = 0;
};

struct SweepConfig {
  std::vector<double> rot_magnitudes_deg;
  std::vector<double> trans_magnitudes;  // world units
  int trials_per_cell = 100;
  std::uint64_t seed = 0;
  OracleMatchParams oracle;  // seed field is re-derived per trial
};

/// For each magnitude, jitters the ground truth (rotation sweep with zero
/// translation jitter and vice versa), runs refine_once with the oracle
/// matcher, and averages post-refinement errors. Trial seeds are shared
/// across cells (common random numbers), which keeps adjacent cells
/// comparable.
std::vector<SweepCell> jitter_sweep(const SplatScene& scene,
                                    const CameraIntrinsics& k,
                                    const std::vector<Pose>& gt_poses,
                                    const SweepConfig& cfg,
                                    const PipelineOptions& opts);

void write_sweep_csv(const std::vector<SweepCell>& cells,
                     const std::filesystem::path& path);

}  // namespace gsrefine
