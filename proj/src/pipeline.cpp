#include "gsrefine/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

#include "gsrefine/lifting.hpp"
#include "gsrefine/relpose.hpp"
#include "gsrefine/rng.hpp"

namespace gsrefine {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

RenderOptions effective_render_options(const PipelineOptions& opts,
                                       const SplatScene& scene) {
  return opts.render ? *opts.render : RenderOptions::for_scene(scene);
}

}  // namespace

std::string refine_mode_name(RefineMode m) {
  switch (m) {
    case RefineMode::full:
      return "full";
    case RefineMode::rel:
      return "rel";
    default:
      return "failed-fallback";
  }
}

RefinementResult refine_once(const Image& query, const CameraIntrinsics& k,
                             const Pose& initial, const SplatScene& scene,
                             const MatcherSource& matcher,
                             const PipelineOptions& opts) {
  validate_intrinsics(k);
  RefinementResult result;
  result.initial_pose = initial;
  result.refined_pose = initial;

  // Stage 1: one render at the initial pose.
  auto t0 = Clock::now();
  const RenderOptions ropts = effective_render_options(opts, scene);
  RenderedView view = render(scene, k, initial, ropts);
  ++result.render_calls;
  result.timings.render_ms = ms_since(t0);

  // Stage 2: exposure adaptation of the rendered image.
  t0 = Clock::now();
  if (opts.act && !query.empty()) {
    const ColorAffine affine =
        act_forward(*opts.act, luminance_histogram(query));
    view.rgb = apply_act(affine, view.rgb);
  }
  result.timings.act_ms = ms_since(t0);

  t0 = Clock::now();
  const DepthMap depth = normalized_depth(view, opts.alpha_min);

  // Stage 3: obtain the 2D-2D match set.
  MatchSet matches;
  try {
    if (const auto* oracle = std::get_if<OracleMatcherSource>(&matcher)) {
      matches = oracle_match_from_depth(depth, k, oracle->gt_pose, initial,
                                        oracle->params)
                    .set;
    } else if (const auto* file = std::get_if<MatchFileSource>(&matcher)) {
      matches = load_matches(file->path);
    } else {
      const auto& dir = std::get<MatchDirSource>(matcher).dir;
      const auto match_path = dir / "matches.txt";
      if (!std::filesystem::exists(match_path)) {
        std::filesystem::create_directories(dir);
        if (!query.empty()) {
          save_ppm(query, dir / "query.ppm");
        }
        save_ppm(view.rgb, dir / "render.ppm");
        throw MatchesPending("staged " + (dir / "query.ppm").string() +
                             " and render.ppm; run the external matcher to "
                             "produce " +
                             match_path.string());
      }
      matches = load_matches(match_path);
    }
  } catch (const CovisibilityError& e) {
    result.timings.match_io_ms = ms_since(t0);
    result.failure_reason = e.what();
    return result;  // failed_fallback, initial pose untouched
  }
  result.timings.match_io_ms = ms_since(t0);
  result.matches_total = static_cast<int>(matches.matches.size());
  if (matches.render_width != k.width || matches.render_height != k.height) {
    throw std::invalid_argument(
        "refine_once: match set render dimensions disagree with intrinsics");
  }

  // Stage 4: confidence filter, then lift 2D-2D to 2D-3D.
  t0 = Clock::now();
  MatchSet filtered = matches;
  filtered.matches.clear();
  for (const Correspondence& c : matches.matches) {
    if (c.confidence >= opts.confidence_threshold) {
      filtered.matches.push_back(c);
    }
  }
  result.matches_after_filter = static_cast<int>(filtered.matches.size());
  const CoordinateMap cmap = coordinate_map(depth, k, initial);
  const LiftResult lifted = lift_matches(filtered, cmap);
  result.lifted_count = static_cast<int>(lifted.corrs.size());
  result.dropped_matches = lifted.dropped_invalid + lifted.dropped_border;
  result.timings.lift_ms = ms_since(t0);

  // Stage 5: one solve.
  t0 = Clock::now();
  try {
    const SolveResult solved = ransac_pnp(lifted.corrs, k, opts.ransac);
    ++result.solve_calls;
    result.refined_pose = solved.pose;
    result.mode = RefineMode::full;
    result.inlier_count = static_cast<int>(solved.inlier_indices.size());
    result.mean_inlier_reproj_px = solved.mean_reproj_error_px;
  } catch (const NoSolutionError& e) {
    ++result.solve_calls;
    result.failure_reason = e.what();
  }
  result.timings.solve_ms = ms_since(t0);
  return result;
}

RefinementResult refine_rel(const Image& query, const CameraIntrinsics& k,
                            const Pose& initial, const SplatScene& scene,
                            const PointmapSource& pointmap,
                            const PipelineOptions& opts) {
  (void)query;  // the fast path consumes only rendered depth
  validate_intrinsics(k);
  RefinementResult result;
  result.initial_pose = initial;
  result.refined_pose = initial;

  auto t0 = Clock::now();
  const RenderOptions ropts = effective_render_options(opts, scene);
  const RenderedView view = render(scene, k, initial, ropts);
  ++result.render_calls;
  const DepthMap depth = normalized_depth(view, opts.alpha_min);
  result.timings.render_ms = ms_since(t0);

  t0 = Clock::now();
  PointMapEstimate pm;
  if (const auto* oracle = std::get_if<OraclePointmapSource>(&pointmap)) {
    pm = oracle_pointmap_from_depth(depth, k, oracle->gt_pose, initial,
                                    oracle->params);
  } else {
    pm = load_pointmap(std::get<PointmapFileSource>(pointmap).path);
  }
  result.timings.match_io_ms = ms_since(t0);
  if (pm.width != k.width || pm.height != k.height) {
    throw std::invalid_argument(
        "refine_rel: point map dimensions disagree with intrinsics");
  }

  t0 = Clock::now();
  try {
    const ScaleEstimate scale = recover_scale(pm, depth);
    result.timings.lift_ms = ms_since(t0);
    t0 = Clock::now();
    result.refined_pose =
        compose_refined(initial, pm.rel_rotation, pm.rel_translation, scale.s);
    ++result.solve_calls;
    result.mode = RefineMode::rel;
    result.scale = scale.s;
    result.inlier_count = scale.sample_count;
    result.timings.solve_ms = ms_since(t0);
  } catch (const std::runtime_error& e) {
    result.timings.lift_ms = ms_since(t0);
    result.failure_reason = e.what();
  }
  return result;
}

EvalReport evaluate_errors(
    const std::vector<std::pair<double, double>>& rot_trans_errors) {
  if (rot_trans_errors.empty()) {
    throw std::invalid_argument("evaluate: need at least one pose pair");
  }
  EvalReport report;
  report.per_query = rot_trans_errors;
  report.count = static_cast<int>(rot_trans_errors.size());

  auto median_of = [](std::vector<double> v) {
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    double m = v[mid];
    if (v.size() % 2 == 0) {
      m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + mid));
    }
    return m;
  };
  std::vector<double> rot, trans;
  rot.reserve(report.count);
  trans.reserve(report.count);
  int hit5 = 0, hit2 = 0;
  for (const auto& [r, t] : rot_trans_errors) {
    rot.push_back(r);
    trans.push_back(t);
    if (t <= 0.05 && r <= 5.0) {
      ++hit5;
    }
    if (t <= 0.02 && r <= 2.0) {
      ++hit2;
    }
  }
  report.median_rot_deg = median_of(rot);
  report.median_trans = median_of(trans);
  report.recall_5cm_5deg = 100.0 * hit5 / report.count;
  report.recall_2cm_2deg = 100.0 * hit2 / report.count;
  return report;
}

EvalReport evaluate(const std::vector<std::pair<Pose, Pose>>& gt_est_pairs) {
  std::vector<std::pair<double, double>> errors;
  errors.reserve(gt_est_pairs.size());
  for (const auto& [gt, est] : gt_est_pairs) {
    errors.emplace_back(rotation_error_deg(gt, est),
                        translation_error(gt, est));
  }
  return evaluate_errors(errors);
}

void write_eval_json(const EvalReport& report,
                     const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  j["median_rot_deg"] = report.median_rot_deg;
  j["median_trans"] = report.median_trans;
  j["recall_5cm_5deg"] = report.recall_5cm_5deg;
  j["recall_2cm_2deg"] = report.recall_2cm_2deg;
  j["count"] = report.count;
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write eval report: " + path.string());
  }
  out << j.dump(2) << "\n";
}

std::vector<SweepCell> jitter_sweep(const SplatScene& scene,
                                    const CameraIntrinsics& k,
                                    const std::vector<Pose>& gt_poses,
                                    const SweepConfig& cfg,
                                    const PipelineOptions& opts) {
  if (gt_poses.empty()) {
    throw std::invalid_argument("jitter_sweep: need at least one gt pose");
  }
  std::vector<SweepCell> cells;
  const Image no_query;

  auto run_cell = [&](const std::string& sweep, double magnitude) {
    SweepCell cell;
    cell.sweep = sweep;
    cell.magnitude = magnitude;
    cell.trials = cfg.trials_per_cell;
    const bool rotational = sweep == "rotation";
    for (int trial = 0; trial < cfg.trials_per_cell; ++trial) {
      // Seeds depend on the trial only, not the cell: common random
      // numbers across magnitudes.
      const std::uint64_t trial_seed = derive_seed(cfg.seed, trial);
      const Pose& gt = gt_poses[trial % gt_poses.size()];
      const Pose initial = jitter(gt, rotational ? magnitude : 0.0,
                                  rotational ? 0.0 : magnitude, trial_seed);
      PipelineOptions trial_opts = opts;
      trial_opts.ransac.seed = derive_seed(trial_seed, 1);
      OracleMatcherSource source{gt, cfg.oracle};
      source.params.seed = derive_seed(trial_seed, 2);
      const RefinementResult r =
          refine_once(no_query, k, initial, scene, source, trial_opts);
      cell.avg_initial_rot_deg += rotation_error_deg(gt, initial);
      cell.avg_initial_trans += translation_error(gt, initial);
      cell.avg_rot_err_deg += rotation_error_deg(gt, r.refined_pose);
      cell.avg_trans_err += translation_error(gt, r.refined_pose);
      if (r.mode == RefineMode::failed_fallback) {
        ++cell.fallback_count;
      }
    }
    const double inv = 1.0 / cfg.trials_per_cell;
    cell.avg_rot_err_deg *= inv;
    cell.avg_trans_err *= inv;
    cell.avg_initial_rot_deg *= inv;
    cell.avg_initial_trans *= inv;
    cells.push_back(cell);
  };

  for (double m : cfg.rot_magnitudes_deg) {
    run_cell("rotation", m);
  }
  for (double m : cfg.trans_magnitudes) {
    run_cell("translation", m);
  }
  return cells;
}

void write_sweep_csv(const std::vector<SweepCell>& cells,
                     const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write sweep csv: " + path.string());
  }
  out << "sweep,magnitude,trials,avg_rot_err_deg,avg_trans_err,"
         "avg_initial_rot_deg,avg_initial_trans,fallback_count\n";
  char buf[256];
  for (const SweepCell& c : cells) {
    std::snprintf(buf, sizeof(buf), "%s,%.9g,%d,%.9g,%.9g,%.9g,%.9g,%d\n",
                  c.sweep.c_str(), c.magnitude, c.trials, c.avg_rot_err_deg,
                  c.avg_trans_err, c.avg_initial_rot_deg, c.avg_initial_trans,
                  c.fallback_count);
    out << buf;
  }
}

}  // namespace gsrefine
