// Command-line front end: scene synthesis, rendering, one-shot and
// relative pose refinement, the jitter sweep harness, and evaluation.
//
// Exit codes: 0 success, 2 when any refinement fell back to the initial
// pose, 1 on input errors. Output files carry no wall-clock content, so
// reruns with identical inputs and seeds are byte-identical; stage
// timings go to stdout only.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "gsrefine/exposure.hpp"
#include "gsrefine/geometry.hpp"
#include "gsrefine/image.hpp"
#include "gsrefine/kernels.hpp"
#include "gsrefine/pipeline.hpp"
#include "gsrefine/relpose.hpp"
#include "gsrefine/renderer.hpp"
#include "gsrefine/rng.hpp"
#include "gsrefine/scene.hpp"

namespace fs = std::filesystem;
using namespace gsrefine;

namespace {

CameraIntrinsics parse_intrinsics(const std::string& s) {
  CameraIntrinsics k;
  if (std::sscanf(s.c_str(), "%lf,%lf,%lf,%lf,%d,%d", &k.fx, &k.fy, &k.cx,
                  &k.cy, &k.width, &k.height) != 6) {
    throw CLI::ValidationError("--intrinsics", "expected fx,fy,cx,cy,W,H");
  }
  validate_intrinsics(k);
  return k;
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos < s.size()) {
    std::size_t next = s.find(',', pos);
    if (next == std::string::npos) {
      next = s.size();
    }
    out.push_back(std::stod(s.substr(pos, next - pos)));
    pos = next + 1;
  }
  return out;
}

void print_timings(std::size_t index, const StageTimings& t) {
  std::printf(
      "query %zu timings (ms): render=%.2f act=%.2f match-io=%.2f "
      "lift=%.2f solve=%.2f\n",
      index, t.render_ms, t.act_ms, t.match_io_ms, t.lift_ms, t.solve_ms);
}

nlohmann::ordered_json result_json(const RefinementResult& r) {
  nlohmann::ordered_json j;
  j["mode"] = refine_mode_name(r.mode);
  j["inlier_count"] = r.inlier_count;
  j["mean_inlier_reproj_px"] = r.mean_inlier_reproj_px;
  if (r.scale) {
    j["scale"] = *r.scale;
  }
  j["matches_total"] = r.matches_total;
  j["matches_after_filter"] = r.matches_after_filter;
  j["lifted_count"] = r.lifted_count;
  j["render_calls"] = r.render_calls;
  j["solve_calls"] = r.solve_calls;
  if (!r.failure_reason.empty()) {
    j["failure_reason"] = r.failure_reason;
  }
  return j;
}

void write_results(const std::vector<RefinementResult>& results,
                   const fs::path& out_dir) {
  fs::create_directories(out_dir);
  std::vector<Pose> refined;
  nlohmann::ordered_json queries = nlohmann::ordered_json::array();
  for (const RefinementResult& r : results) {
    refined.push_back(r.refined_pose);
    queries.push_back(result_json(r));
  }
  save_poses(refined, out_dir / "refined.txt");
  nlohmann::ordered_json j;
  j["queries"] = queries;
  std::ofstream out(out_dir / "result.json");
  out << j.dump(2) << "\n";
}

struct SharedArgs {
  std::string scene_path;
  std::string intrinsics;
  std::string pose_path;
  std::string gt_pose_path;
  std::string query_path;
  std::string act_path;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Splat-scene camera pose refinement: renders a splat model at a "
      "coarse pose, lifts 2D-2D matches to 2D-3D through rendered depth, "
      "and solves PnP+RANSAC (or composes a scale-recovered relative "
      "pose)."};
  app.require_subcommand(1);

  // synth-scene ----------------------------------------------------------
  auto* synth = app.add_subcommand("synth-scene", "generate a box-room scene");
  std::string room = "4x4x3";
  int count = 5000;
  std::uint64_t synth_seed = 0;
  std::string synth_out = ".";
  synth->add_option("--room", room, "dimensions WxDxH in world units");
  synth->add_option("--count", count, "number of gaussians");
  synth->add_option("--seed", synth_seed, "texture seed");
  synth->add_option("--out", synth_out, "output directory");

  // render ----------------------------------------------------------------
  auto* rendercmd = app.add_subcommand("render", "render poses from a scene");
  SharedArgs ra;
  rendercmd->add_option("--scene", ra.scene_path)->required();
  rendercmd->add_option("--intrinsics", ra.intrinsics, "fx,fy,cx,cy,W,H")
      ->required();
  rendercmd->add_option("--pose", ra.pose_path, "pose file, one per line")
      ->required();
  rendercmd->add_option("--query", ra.query_path,
                        "query PPM (only used with --act)");
  rendercmd->add_option("--act", ra.act_path, "exposure checkpoint");
  rendercmd->add_option("--out", ra.out_dir);

  // refine ------------------------------------------------------------------
  auto* refine = app.add_subcommand("refine", "one-shot pose refinement");
  SharedArgs fa;
  std::string matches_path, match_dir;
  bool use_oracle = false;
  int oracle_count = 300;
  double oracle_noise = 1.0, oracle_outliers = 0.0;
  double ransac_thresh = 3.0, conf_thresh = 0.5;
  int ransac_iters = 2000;
  refine->add_option("--scene", fa.scene_path)->required();
  refine->add_option("--intrinsics", fa.intrinsics)->required();
  refine->add_option("--pose", fa.pose_path, "initial pose file")->required();
  refine->add_option("--matches", matches_path, "match file from a matcher");
  refine->add_flag("--oracle", use_oracle, "synthetic oracle matcher");
  refine->add_option("--match-dir", match_dir,
                     "external matcher exchange directory");
  refine->add_option("--gt-pose", fa.gt_pose_path,
                     "ground-truth poses (drives --oracle)");
  refine->add_option("--query", fa.query_path, "query PPM");
  refine->add_option("--act", fa.act_path, "exposure checkpoint");
  refine->add_option("--seed", fa.seed);
  refine->add_option("--oracle-count", oracle_count);
  refine->add_option("--oracle-noise", oracle_noise, "pixel noise sigma");
  refine->add_option("--oracle-outliers", oracle_outliers, "outlier fraction");
  refine->add_option("--ransac-thresh", ransac_thresh, "inlier threshold px");
  refine->add_option("--ransac-iters", ransac_iters);
  refine->add_option("--conf-thresh", conf_thresh,
                     "confidence filter threshold");
  refine->add_option("--out", fa.out_dir);

  // refine-rel -------------------------------------------------------------
  auto* rel = app.add_subcommand("refine-rel", "relative-pose fast path");
  SharedArgs la;
  std::string pointmap_path;
  bool rel_oracle = false;
  double scale_corruption = 1.0, pm_noise = 0.0;
  rel->add_option("--scene", la.scene_path)->required();
  rel->add_option("--intrinsics", la.intrinsics)->required();
  rel->add_option("--pose", la.pose_path)->required();
  rel->add_option("--pointmap", pointmap_path, "PTMAP file");
  rel->add_flag("--oracle", rel_oracle, "synthetic oracle point map");
  rel->add_option("--gt-pose", la.gt_pose_path);
  rel->add_option("--seed", la.seed);
  rel->add_option("--scale-corruption", scale_corruption,
                  "multiplier applied to true geometry (1/s)");
  rel->add_option("--pm-noise", pm_noise, "3D noise sigma");
  rel->add_option("--out", la.out_dir);

  // jitter-sweep -------------------------------------------------------------
  auto* sweep = app.add_subcommand("jitter-sweep", "error-vs-jitter harness");
  SharedArgs sa;
  std::string rot_mags = "0,5,10,20,30,45,60,90";
  std::string trans_mags;
  int trials = 100;
  int sweep_oracle_count = 300;
  double sweep_noise = 1.0, sweep_outliers = 0.3;
  sweep->add_option("--scene", sa.scene_path)->required();
  sweep->add_option("--intrinsics", sa.intrinsics)->required();
  sweep->add_option("--gt-pose", sa.gt_pose_path)->required();
  sweep->add_option("--rot-mags", rot_mags, "rotation magnitudes, degrees");
  sweep->add_option("--trans-mags", trans_mags,
                    "translation magnitudes, world units");
  sweep->add_option("--trials", trials, "trials per cell");
  sweep->add_option("--seed", sa.seed);
  sweep->add_option("--oracle-count", sweep_oracle_count);
  sweep->add_option("--oracle-noise", sweep_noise);
  sweep->add_option("--oracle-outliers", sweep_outliers);
  sweep->add_option("--out", sa.out_dir);

  // eval ---------------------------------------------------------------------
  auto* eval = app.add_subcommand("eval", "pose error metrics");
  std::string eval_gt, eval_est, eval_out = ".";
  eval->add_option("--gt", eval_gt)->required();
  eval->add_option("--est", eval_est)->required();
  eval->add_option("--out", eval_out);

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      RoomSpec spec;
      if (std::sscanf(room.c_str(), "%lfx%lfx%lf", &spec.width, &spec.depth,
                      &spec.height) != 3) {
        throw std::invalid_argument("--room: expected WxDxH");
      }
      spec.count = count;
      spec.seed = synth_seed;
      const SplatScene scene = synth_scene(spec);
      fs::create_directories(synth_out);
      const fs::path path = fs::path(synth_out) / "scene.txt";
      save_scene(scene, path);
      std::printf("wrote %s (%zu gaussians, scale %.4f)\n",
                  path.string().c_str(), scene.gaussians.size(),
                  scene.scene_scale);
      return 0;
    }

    if (rendercmd->parsed()) {
      const SplatScene scene = load_scene(ra.scene_path);
      const CameraIntrinsics k = parse_intrinsics(ra.intrinsics);
      const std::vector<Pose> poses = load_poses(ra.pose_path);
      std::optional<ActNetwork> act;
      if (!ra.act_path.empty()) {
        act = load_act(ra.act_path);
      }
      fs::create_directories(ra.out_dir);
      const RenderOptions opts = RenderOptions::for_scene(scene);
      for (std::size_t i = 0; i < poses.size(); ++i) {
        RenderedView view = render(scene, k, poses[i], opts);
        if (act && !ra.query_path.empty()) {
          const Image query = load_ppm(ra.query_path);
          view.rgb = apply_act(act_forward(*act, luminance_histogram(query)),
                               view.rgb);
        }
        char name[64];
        std::snprintf(name, sizeof(name), "render_%04zu.ppm", i);
        save_ppm(view.rgb, fs::path(ra.out_dir) / name);
        std::snprintf(name, sizeof(name), "depth_%04zu.dpt", i);
        save_depth(normalized_depth(view), fs::path(ra.out_dir) / name);
      }
      std::printf("rendered %zu view(s) into %s\n", poses.size(),
                  ra.out_dir.c_str());
      return 0;
    }

    if (refine->parsed()) {
      const int sources = (matches_path.empty() ? 0 : 1) + (use_oracle ? 1 : 0) +
                          (match_dir.empty() ? 0 : 1);
      if (sources != 1) {
        throw std::invalid_argument(
            "refine: exactly one of --matches, --oracle, --match-dir");
      }
      const SplatScene scene = load_scene(fa.scene_path);
      const CameraIntrinsics k = parse_intrinsics(fa.intrinsics);
      const std::vector<Pose> initials = load_poses(fa.pose_path);
      PipelineOptions opts;
      opts.ransac.inlier_threshold_px = ransac_thresh;
      opts.ransac.max_iterations = ransac_iters;
      opts.confidence_threshold = conf_thresh;
      if (!fa.act_path.empty()) {
        opts.act = load_act(fa.act_path);
      }
      Image query;
      if (!fa.query_path.empty()) {
        query = load_ppm(fa.query_path);
      }
      std::vector<Pose> gts;
      if (use_oracle) {
        if (fa.gt_pose_path.empty()) {
          throw std::invalid_argument("refine --oracle requires --gt-pose");
        }
        gts = load_poses(fa.gt_pose_path);
        if (gts.size() != initials.size()) {
          throw std::invalid_argument(
              "refine: --gt-pose and --pose line counts differ");
        }
      } else if (initials.size() != 1) {
        throw std::invalid_argument(
            "refine: file/directory matchers serve exactly one initial pose");
      }

      std::vector<RefinementResult> results;
      for (std::size_t i = 0; i < initials.size(); ++i) {
        opts.ransac.seed = derive_seed(fa.seed, 2 * i);
        MatcherSource source = MatchFileSource{matches_path};
        if (use_oracle) {
          OracleMatcherSource o;
          o.gt_pose = gts[i];
          o.params.count = oracle_count;
          o.params.noise_px = oracle_noise;
          o.params.outlier_frac = oracle_outliers;
          o.params.seed = derive_seed(fa.seed, 2 * i + 1);
          source = o;
        } else if (!match_dir.empty()) {
          source = MatchDirSource{match_dir};
        }
        const RefinementResult r =
            refine_once(query, k, initials[i], scene, source, opts);
        print_timings(i, r.timings);
        results.push_back(r);
      }
      write_results(results, fa.out_dir);
      for (const RefinementResult& r : results) {
        if (r.mode == RefineMode::failed_fallback) {
          return 2;
        }
      }
      return 0;
    }

    if (rel->parsed()) {
      if (pointmap_path.empty() == !rel_oracle) {
        throw std::invalid_argument(
            "refine-rel: exactly one of --pointmap, --oracle");
      }
      const SplatScene scene = load_scene(la.scene_path);
      const CameraIntrinsics k = parse_intrinsics(la.intrinsics);
      const std::vector<Pose> initials = load_poses(la.pose_path);
      std::vector<Pose> gts;
      if (rel_oracle) {
        if (la.gt_pose_path.empty()) {
          throw std::invalid_argument("refine-rel --oracle requires --gt-pose");
        }
        gts = load_poses(la.gt_pose_path);
        if (gts.size() != initials.size()) {
          throw std::invalid_argument(
              "refine-rel: --gt-pose and --pose line counts differ");
        }
      } else if (initials.size() != 1) {
        throw std::invalid_argument(
            "refine-rel: --pointmap serves exactly one initial pose");
      }
      PipelineOptions opts;
      std::vector<RefinementResult> results;
      const Image no_query;
      for (std::size_t i = 0; i < initials.size(); ++i) {
        PointmapSource source = PointmapFileSource{pointmap_path};
        if (rel_oracle) {
          OraclePointmapSource o;
          o.gt_pose = gts[i];
          o.params.scale_corruption = scale_corruption;
          o.params.noise_3d = pm_noise;
          o.params.seed = derive_seed(la.seed, i);
          source = o;
        }
        const RefinementResult r =
            refine_rel(no_query, k, initials[i], scene, source, opts);
        print_timings(i, r.timings);
        results.push_back(r);
      }
      write_results(results, la.out_dir);
      for (const RefinementResult& r : results) {
        if (r.mode == RefineMode::failed_fallback) {
          return 2;
        }
      }
      return 0;
    }

    if (sweep->parsed()) {
      const SplatScene scene = load_scene(sa.scene_path);
      const CameraIntrinsics k = parse_intrinsics(sa.intrinsics);
      SweepConfig cfg;
      cfg.rot_magnitudes_deg = parse_list(rot_mags);
      cfg.trans_magnitudes = parse_list(trans_mags);
      cfg.trials_per_cell = trials;
      cfg.seed = sa.seed;
      cfg.oracle.count = sweep_oracle_count;
      cfg.oracle.noise_px = sweep_noise;
      cfg.oracle.outlier_frac = sweep_outliers;
      const std::vector<Pose> gts = load_poses(sa.gt_pose_path);
      PipelineOptions opts;
      const std::vector<SweepCell> cells = jitter_sweep(scene, k, gts, cfg, opts);
      fs::create_directories(sa.out_dir);
      write_sweep_csv(cells, fs::path(sa.out_dir) / "sweep.csv");
      for (const SweepCell& c : cells) {
        std::printf("%s %6.1f: post err %.4f deg / %.4f, fallback %d/%d\n",
                    c.sweep.c_str(), c.magnitude, c.avg_rot_err_deg,
                    c.avg_trans_err, c.fallback_count, c.trials);
      }
      return 0;
    }

    if (eval->parsed()) {
      const std::vector<Pose> gt = load_poses(eval_gt);
      const std::vector<Pose> est = load_poses(eval_est);
      if (gt.size() != est.size() || gt.empty()) {
        throw std::invalid_argument(
            "eval: --gt and --est must be non-empty and line-aligned");
      }
      std::vector<std::pair<Pose, Pose>> pairs;
      for (std::size_t i = 0; i < gt.size(); ++i) {
        pairs.emplace_back(gt[i], est[i]);
      }
      const EvalReport report = evaluate(pairs);
      fs::create_directories(eval_out);
      write_eval_json(report, fs::path(eval_out) / "eval.json");
      std::printf(
          "median %.4f deg / %.4f; recall(5cm,5deg)=%.1f%% "
          "recall(2cm,2deg)=%.1f%%\n",
          report.median_rot_deg, report.median_trans, report.recall_5cm_5deg,
          report.recall_2cm_2deg);
      return 0;
    }
  } catch (const MatchesPending& e) {
    std::fprintf(stderr, "matches pending: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
