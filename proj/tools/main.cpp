// artic: command-line driver for the tracking and planning pipeline.

#include "run_config.hpp"

#include <artic/bench.hpp>
#include <artic/errors.hpp>
#include <artic/grasp.hpp>
#include <artic/io.hpp>
#include <artic/kinematics.hpp>
#include <artic/planner.hpp>
#include <artic/tracker.hpp>

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <functional>
#include <iostream>
#include <memory>
#include <sstream>
#include <type_traits>

namespace fs = std::filesystem;

namespace artic::cli {
namespace {

using artic::to_json;

bool g_quiet = false;

void log(const std::string& msg) {
  if (!g_quiet) std::cerr << "[artic] " << msg << "\n";
}

/// Binds CLI options to RunConfig fields. Only options given on the command
/// line are applied, so they override a loaded --config snapshot.
class Binder {
 public:
  Binder(CLI::App* app, const std::string& command) : app_(app), defaults_(default_run_config(command)) {}

  template <typename Get>
  CLI::Option* option(const std::string& name, Get get, const std::string& desc) {
    using T = std::remove_reference_t<std::invoke_result_t<Get, RunConfig&>>;
    auto holder = std::make_shared<T>(get(defaults_));
    CLI::Option* opt = app_->add_option(name, *holder, desc)->capture_default_str();
    setters_.push_back([opt, holder, get](RunConfig& c) {
      if (opt->count() > 0) get(c) = *holder;
    });
    return opt;
  }

  /// Boolean switch that sets the field to `value` when present.
  template <typename Get>
  CLI::Option* flag(const std::string& name, Get get, bool value, const std::string& desc) {
    CLI::Option* opt = app_->add_flag(name, desc);
    setters_.push_back([opt, get, value](RunConfig& c) {
      if (opt->count() > 0) get(c) = value;
    });
    return opt;
  }

  CLI::Option* path(const std::string& key, const std::string& desc) {
    return option("--" + key, [key](RunConfig& c) -> std::string& { return c.paths[key]; }, desc);
  }

  void apply(RunConfig& c) const {
    for (const auto& s : setters_) s(c);
  }

 private:
  CLI::App* app_;
  RunConfig defaults_;
  std::vector<std::function<void(RunConfig&)>> setters_;
};

struct Command {
  CLI::App* app = nullptr;
  std::unique_ptr<Binder> binder;
  std::string config_file;
};

void add_common(Command& cmd) {
  Binder& b = *cmd.binder;
  cmd.app->add_option("--config", cmd.config_file, "Resolved config snapshot to start from");
  b.option("--seed", [](RunConfig& c) -> std::uint64_t& { return c.rng_seed; }, "RNG seed (RSRD_SEED overrides)");
  b.option("--workers", [](RunConfig& c) -> int& { return c.workers; }, "Worker threads, 0 for all cores");
}

void add_bench_flags(Binder& b) {
  b.option("--gaussians-per-part", [](RunConfig& c) -> int& { return c.bench.gaussians_per_part; }, "Gaussians per part");
  b.option("--feature-dim", [](RunConfig& c) -> int& { return c.bench.feature_dim; }, "Feature channels");
  b.option("--feature-noise", [](RunConfig& c) -> double& { return c.bench.feature_noise; }, "Feature noise sigma");
  b.option("--depth-a", [](RunConfig& c) -> double& { return c.bench.depth_a; }, "Mono depth scale a");
  b.option("--depth-gamma", [](RunConfig& c) -> double& { return c.bench.depth_gamma; }, "Mono depth exponent");
  b.option("--depth-b", [](RunConfig& c) -> double& { return c.bench.depth_b; }, "Mono depth offset");
  b.option("--depth-noise", [](RunConfig& c) -> double& { return c.bench.depth_noise; }, "Mono depth noise sigma");
  b.option("--amplitude", [](RunConfig& c) -> double& { return c.bench.amplitude; },
           "Joint amplitude, radians or meters; negative for the template default");
  b.option("--frames-count", [](RunConfig& c) -> int& { return c.bench.frames; }, "Frames to synthesize");
  b.option("--fps", [](RunConfig& c) -> double& { return c.bench.fps; }, "Frame rate");
  b.option("--links", [](RunConfig& c) -> int& { return c.bench.links; }, "Links of n-link-chain");
  b.option("--image-size", [](RunConfig& c) -> int& { return c.bench.image_size; }, "Square image size, pixels");
  b.option("--focal", [](RunConfig& c) -> double& { return c.bench.focal; }, "Focal length, pixels");
}

void add_tracker_flags(Binder& b) {
  b.option("--lambda-dino", [](RunConfig& c) -> double& { return c.tracker.weights.dino; }, "Feature loss weight");
  b.option("--lambda-mono", [](RunConfig& c) -> double& { return c.tracker.weights.mono; }, "Depth ranking weight");
  b.option("--lambda-arap", [](RunConfig& c) -> double& { return c.tracker.weights.arap; }, "ARAP weight");
  b.option("--lambda-temporal", [](RunConfig& c) -> double& { return c.tracker.weights.temporal; },
           "Temporal smoothness weight (refine)");
  b.flag("--no-arap", [](RunConfig& c) -> double& { return c.tracker.weights.arap; }, false, "Disable ARAP");
  b.flag("--no-depth", [](RunConfig& c) -> double& { return c.tracker.weights.mono; }, false, "Disable depth ranking");
  b.flag("--photometric", [](RunConfig& c) -> bool& { return c.tracker.photometric; }, true,
         "Compare RGB instead of features");
  b.option("--steps", [](RunConfig& c) -> int& { return c.tracker.steps; }, "Optimizer steps per frame");
  b.option("--refine-steps", [](RunConfig& c) -> int& { return c.tracker.refine_steps; }, "Refinement steps");
  b.option("--lr", [](RunConfig& c) -> double& { return c.tracker.adam.lr_start; }, "Initial learning rate");
  b.option("--lr-final", [](RunConfig& c) -> double& { return c.tracker.adam.lr_end; }, "Final learning rate");
  b.option("--depth-pairs", [](RunConfig& c) -> std::size_t& { return c.tracker.depth_pairs; },
           "Depth ranking pairs per step");
  b.option("--ranking-margin", [](RunConfig& c) -> double& { return c.tracker.ranking_margin; },
           "Depth ranking hinge margin, meters");
  b.option("--alpha-mask", [](RunConfig& c) -> double& { return c.tracker.alpha_mask; }, "Alpha mask threshold");
  b.option("--erode", [](RunConfig& c) -> int& { return c.tracker.erode; }, "Mask erosion, pixels");
  b.option("--feature-clip-alpha", [](RunConfig& c) -> double& { return c.tracker.feature_clip_alpha; },
           "Feature loss ignores pixels below this alpha");
  b.option("--blur-kernel", [](RunConfig& c) -> int& { return c.tracker.blur_kernel; }, "Box blur size, pixels");
  b.option("--seeds", [](RunConfig& c) -> int& { return c.tracker.seeds; }, "Initialization seeds");
  b.option("--init-iters", [](RunConfig& c) -> int& { return c.tracker.init_iters; }, "Iterations per init seed");
  b.option("--boundary-radius", [](RunConfig& c) -> double& { return c.tracker.boundary_radius; },
           "ARAP pair radius, meters");
  b.option("--barron-alpha", [](RunConfig& c) -> double& { return c.tracker.barron_alpha; }, "Robust kernel shape");
  b.option("--barron-c", [](RunConfig& c) -> double& { return c.tracker.barron_c; },
           "Robust kernel scale, bounding-box diagonals");
  b.option("--translation-unit", [](RunConfig& c) -> double& { return c.tracker.translation_unit; },
           "Meters per translation parameter, 0 for the bounding-box diagonal");
  b.flag("--no-carry-moments", [](RunConfig& c) -> bool& { return c.tracker.carry_moments; }, false,
         "Reset Adam moments every frame");
}

void add_grasp_flags(Binder& b) {
  b.option("--mu", [](RunConfig& c) -> double& { return c.plan.grasp.mu; }, "Friction coefficient");
  b.option("--max-width", [](RunConfig& c) -> double& { return c.plan.grasp.max_width; }, "Gripper opening, meters");
  b.option("--n-axes", [](RunConfig& c) -> int& { return c.plan.grasp.n_axes; }, "Antipodal axes per part");
  b.option("--max-attempts", [](RunConfig& c) -> int& { return c.plan.grasp.max_attempts; }, "Ray samples per part");
  b.option("--face-budget", [](RunConfig& c) -> std::size_t& { return c.plan.mesh.face_budget; }, "Mesh faces");
}

void add_plan_flags(Binder& b) {
  b.option("--hands", [](RunConfig& c) -> std::size_t& { return c.rank.hands; },
           "Hands when no fingertip tracks exist (1 or 2)");
  b.option("--w-smooth", [](RunConfig& c) -> double& { return c.plan.lm.w_smooth; }, "Joint smoothness weight");
  b.option("--lm-iterations", [](RunConfig& c) -> int& { return c.plan.lm.max_iterations; }, "LM iteration cap");
  b.option("--max-translation", [](RunConfig& c) -> double& { return c.plan.lm.max_translation; },
           "Accepted gripper position error, meters");
  b.option("--approach-offset", [](RunConfig& c) -> double& { return c.plan.approach_offset; },
           "Pre-grasp back-off, meters");
  b.option("--approach-steps", [](RunConfig& c) -> int& { return c.plan.approach_steps; }, "Pre-grasp poses");
  b.option("--bimanual-lift", [](RunConfig& c) -> double& { return c.plan.bimanual_lift; }, "Two-arm lift, meters");
  b.option("--object-offset", [](RunConfig& c) -> std::vector<double>& { return c.object_offset; },
           "Object placement in the robot frame, meters")
      ->expected(3);
  b.option("--object-yaw", [](RunConfig& c) -> double& { return c.object_yaw_deg; },
           "Object yaw in the robot frame, degrees");
}

std::string snapshot_path(const fs::path& out, bool out_is_dir) {
  if (out_is_dir) return (out / "config.resolved.json").string();
  fs::path p = out;
  return p.replace_extension().string() + ".config.resolved.json";
}

void ensure_parent(const fs::path& file) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
}

fs::path sibling(const fs::path& out, const std::string& suffix) {
  fs::path p = out;
  return p.replace_extension().string() + suffix;
}

std::string relative_to(const fs::path& target, const fs::path& from_file) {
  const fs::path base = from_file.has_parent_path() ? from_file.parent_path() : fs::path(".");
  return fs::proximate(target, base).generic_string();
}

void summary(const Json& j) { std::cout << j.dump() << std::endl; }

GaussianScene scene_for(const RunConfig& c, const std::string& traj_key) {
  if (auto s = c.optional_path("scene")) return load_scene(*s);
  const fs::path ref = trajectory_scene_ref(c.path(traj_key));
  if (ref.empty()) throw ValidationError("missing required path --scene");
  return load_scene(ref);
}

// ---------------------------------------------------------------- commands

int run_generate(const RunConfig& c) {
  const fs::path out = c.path("out");
  fs::create_directories(out);
  SyntheticSpec spec = c.bench;
  if (auto t = c.optional_path("template")) spec.object = *t;
  spec.validate();
  log("generating " + spec.object);
  const SyntheticObject obj = generate_scene(spec);
  const FrameSequence seq = synthesize_observations(obj, spec);
  save_scene(obj.scene, out / "scene.json");
  save_frames(out / "frames", seq);
  save_trajectory(out / "gt.json", obj.ground_truth, "scene.json");
  write_json(out / "spec.json", to_json(spec));
  write_json(out / "robot.json", to_json(default_robot()));
  write_json(out / "meta.json", {{"object", spec.object},
                                 {"actuated_part", obj.actuated_part},
                                 {"bbox_diagonal", obj.scene.bbox_diagonal()},
                                 {"parts", obj.scene.num_parts()},
                                 {"gaussians", obj.scene.size()}});
  summary({{"command", "generate"},
           {"object", spec.object},
           {"parts", obj.scene.num_parts()},
           {"gaussians", obj.scene.size()},
           {"frames", obj.ground_truth.size()},
           {"actuated_part", obj.actuated_part},
           {"out", out.generic_string()}});
  return 0;
}

PartPoseSet initial_poses(const RunConfig& c, const GaussianScene& scene) {
  const auto init = c.optional_path("init");
  if (!init) return identity_poses(scene.num_parts());
  const Json j = read_json(*init);
  PartPoseSet poses;
  try {
    for (const auto& p : require(j, "part_poses")) poses.push_back(part_pose_from_json(p));
  } catch (const Json::exception& e) {
    throw FormatError(*init + ": " + e.what());
  }
  if (poses.size() != scene.num_parts()) throw ValidationError("init file has the wrong number of parts");
  return poses;
}

int run_track(const RunConfig& c) {
  const fs::path out = c.path("out");
  ensure_parent(out);
  const GaussianScene scene = load_scene(c.path("scene"));
  const FrameSequence seq = load_frames(c.path("frames"));
  log("tracking " + std::to_string(seq.frames.size()) + " frames, " + std::to_string(scene.num_parts()) + " parts");
  const auto t0 = std::chrono::steady_clock::now();
  const TrackResult r = track_video(scene, seq.camera, seq.frames, c.tracker, initial_poses(c, scene));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  save_trajectory(out, r.trajectory, relative_to(c.path("scene"), out));
  write_text(sibling(out, ".loss.csv"), loss_traces_csv(r.loss_traces));
  double final_loss = 0.0;
  for (const auto& tr : r.loss_traces)
    if (!tr.empty()) final_loss += tr.back();
  summary({{"command", "track"},
           {"frames", r.trajectory.size()},
           {"parts", scene.num_parts()},
           {"final_loss_sum", final_loss},
           {"seconds", secs},
           {"out", out.generic_string()}});
  return 0;
}

int run_refine(const RunConfig& c) {
  const fs::path out = c.path("out");
  ensure_parent(out);
  const GaussianScene scene = scene_for(c, "traj");
  const FrameSequence seq = load_frames(c.path("frames"));
  const Trajectory traj = load_trajectory(c.path("traj"));
  log("refining " + std::to_string(traj.size()) + " frames");
  const RefineResult r = refine_trajectory(scene, seq.camera, seq.frames, traj, c.tracker);
  const std::string scene_ref =
      c.optional_path("scene") ? *c.optional_path("scene") : trajectory_scene_ref(c.path("traj")).string();
  save_trajectory(out, r.trajectory, relative_to(scene_ref, out));
  std::ostringstream csv;
  csv.precision(17);
  csv << "step,loss\n";
  for (std::size_t i = 0; i < r.loss_trace.size(); ++i) csv << i << "," << r.loss_trace[i] << "\n";
  write_text(sibling(out, ".loss.csv"), csv.str());
  summary({{"command", "refine"},
           {"frames", r.trajectory.size()},
           {"initial_loss", r.loss_trace.empty() ? 0.0 : r.loss_trace.front()},
           {"final_loss", r.loss_trace.empty() ? 0.0 : r.loss_trace.back()},
           {"out", out.generic_string()}});
  return 0;
}

int run_init(const RunConfig& c) {
  const fs::path out = c.path("out");
  ensure_parent(out);
  const GaussianScene scene = load_scene(c.path("scene"));
  const FrameSequence seq = load_frames(c.path("frames"));
  if (c.init_frame >= seq.frames.size()) throw ValidationError("init frame index out of range");
  std::optional<Image> metric;
  if (auto d = c.optional_path("metric-depth")) metric = read_tensor(*d);
  log("initializing from frame " + std::to_string(c.init_frame) + " with " + std::to_string(c.tracker.seeds) +
      " seeds");
  const InitResult r =
      initialize_pose(scene, seq.camera, seq.frames[c.init_frame], c.tracker, metric ? &*metric : nullptr);
  Json parts = Json::array();
  for (const auto& p : r.part_poses) parts.push_back(to_json(p));
  write_json(out, {{"object", to_json(r.object)},
                   {"part_poses", parts},
                   {"seed_losses", r.seed_losses},
                   {"best_seed", r.best_seed},
                   {"matches", r.matches},
                   {"placement", to_json(r.placement)}});
  summary({{"command", "init"},
           {"best_seed", r.best_seed},
           {"best_loss", r.seed_losses.at(r.best_seed)},
           {"matches", r.matches},
           {"out", out.generic_string()}});
  return 0;
}

int run_eval(const RunConfig& c) {
  const GaussianScene scene = scene_for(c, "gt");
  const Trajectory gt = load_trajectory(c.path("gt"));
  const Trajectory est = load_trajectory(c.path("est"));
  const AddReport rep = add_metric(est, gt, scene, c.keyframe_stride, c.manipulated_part);
  const fs::path out = c.optional_path("out") ? fs::path(*c.optional_path("out")) : sibling(c.path("est"), ".add.csv");
  ensure_parent(out);
  write_text(out, add_csv(rep));
  Json per_part = Json::array();
  for (const auto& p : rep.per_part) per_part.push_back({{"mean", p.mean}, {"std", p.std}});
  const Json report = {{"keyframes", rep.keyframes},
                       {"per_part", per_part},
                       {"manipulated", {{"part", c.manipulated_part}, {"mean", rep.manipulated.mean}, {"std", rep.manipulated.std}}},
                       {"overall", {{"mean", rep.overall.mean}, {"std", rep.overall.std}}},
                       {"bbox_diagonal", scene.bbox_diagonal()}};
  write_json(sibling(out, ".json"), report);
  Json means = Json::array();
  for (const auto& p : rep.per_part) means.push_back(p.mean);
  summary({{"command", "eval"},
           {"add_mean", rep.overall.mean},
           {"add_per_part", means},
           {"add_manipulated", rep.manipulated.mean},
           {"out", out.generic_string()}});
  return 0;
}

Json grasps_json(const GaussianScene& scene, const PlanOptions& opts) {
  Json parts = Json::array();
  for (std::size_t p = 0; p < scene.num_parts(); ++p) {
    std::vector<Vec3> centers;
    for (std::size_t i : scene.parts()[p]) centers.push_back(scene.gaussians()[i].center);
    Json entry = {{"part", p}};
    try {
      const TriMesh mesh = part_mesh(centers, opts.mesh);
      AntipodalOptions a = opts.grasp;
      a.seed = opts.grasp.seed + p;
      const auto axes = sample_antipodal(mesh, a, p);
      Json ja = Json::array(), jc = Json::array();
      for (const auto& ax : axes) ja.push_back(to_json(ax));
      for (const auto& g : augment_grasps(p, axes)) jc.push_back(to_json(g));
      entry["faces"] = mesh.faces.size();
      entry["axes"] = ja;
      entry["candidates"] = jc;
    } catch (const PipelineError& e) {
      log(e.what());
      entry["error"] = e.what();
      entry["candidates"] = Json::array();
    }
    parts.push_back(entry);
  }
  return {{"parts", parts}};
}

std::map<std::size_t, std::vector<GraspCandidate>> grasps_from_json(const Json& j) {
  std::map<std::size_t, std::vector<GraspCandidate>> out;
  try {
    for (const auto& part : require(j, "parts")) {
      auto& list = out[require(part, "part").get<std::size_t>()];
      for (const auto& g : require(part, "candidates")) list.push_back(grasp_from_json(g));
    }
  } catch (const Json::exception& e) {
    throw FormatError(std::string("grasp file: ") + e.what());
  }
  return out;
}

int run_grasp(const RunConfig& c) {
  const fs::path out = c.path("out");
  ensure_parent(out);
  const GaussianScene scene = load_scene(c.path("scene"));
  const Json j = grasps_json(scene, c.plan);
  write_json(out, j);
  Json counts = Json::array();
  std::size_t total = 0;
  for (const auto& p : j.at("parts")) {
    counts.push_back(p.at("candidates").size());
    total += p.at("candidates").size();
  }
  summary({{"command", "grasp"}, {"candidates", counts}, {"out", out.generic_string()}});
  if (total == 0) throw PipelineError("no part is graspable");
  return 0;
}

int run_plan(const RunConfig& c) {
  const fs::path out = c.path("out");
  ensure_parent(out);
  const GaussianScene scene = scene_for(c, "traj");
  const Trajectory traj = load_trajectory(c.path("traj"));
  traj.validate(scene.num_parts());
  const RobotConfig robot = c.optional_path("robot") ? robot_config_from_json(read_json(*c.optional_path("robot")))
                                                     : default_robot();
  std::vector<std::vector<HandPoints>> hands;
  if (auto frames = c.optional_path("frames")) {
    const FrameSequence seq = load_frames(*frames);
    bool any = false;
    for (const auto& f : seq.frames) any = any || !f.hands.empty();
    if (any) {
      if (seq.frames.size() != traj.size()) throw ValidationError("frame count differs from the trajectory");
      for (const auto& f : seq.frames) hands.push_back(f.hands);
    }
  }
  const RankedParts ranked = rank_parts(scene, traj, hands, c.rank);
  const auto grasps = c.optional_path("grasps") ? grasps_from_json(read_json(*c.optional_path("grasps")))
                                                : grasps_from_json(grasps_json(scene, c.plan));
  log("planning over " + std::to_string(ranked.groups.size()) + " ranked group(s)");
  const PlanResult r = plan(scene, traj, ranked, grasps, robot, c.plan);
  Json j = to_json(r);
  j["ranking"] = to_json(ranked);
  write_json(out, j);
  Json line = {{"command", "plan"}, {"found", r.found}, {"parts", r.parts}, {"report", to_json(r.report)},
               {"out", out.generic_string()}};
  if (r.found) {
    double dev = 0.0;
    for (const auto& a : r.arms) dev = std::max(dev, a.trajectory.max_translation_deviation);
    line["max_translation_deviation"] = dev;
  }
  summary(line);
  if (!r.found) {
    std::cerr << "[artic] no feasible plan; rejections: " << to_json(r.report).dump() << "\n";
    return 2;
  }
  return 0;
}

int run_ablate(const RunConfig& c) {
  const fs::path out = c.path("out");
  fs::create_directories(out);
  std::ostringstream csv;
  csv.precision(10);
  csv << "mode,object,add_mean_mm,add_std_mm,manipulated_mean_mm,manipulated_std_mm\n";
  Json results = Json::object();
  for (const auto& t : c.templates) {
    SyntheticSpec spec = c.bench;
    spec.object = t;
    log("ablation on " + t);
    std::vector<AblationRow> rows;
    try {
      rows = run_ablation(spec, c.modes, c.tracker);
    } catch (const PipelineError& e) {
      throw PipelineError(t + ": " + e.what());
    }
    for (const auto& row : rows) {
      csv << row.mode << "," << t << "," << 1e3 * row.add.overall.mean << "," << 1e3 * row.add.overall.std << ","
          << 1e3 * row.add.manipulated.mean << "," << 1e3 * row.add.manipulated.std << "\n";
      Json per_part = Json::array();
      for (const auto& p : row.add.per_part) per_part.push_back({{"mean", p.mean}, {"std", p.std}});
      results[t][row.mode] = {{"overall", {{"mean", row.add.overall.mean}, {"std", row.add.overall.std}}},
                              {"manipulated", {{"mean", row.add.manipulated.mean}, {"std", row.add.manipulated.std}}},
                              {"per_part", per_part}};
    }
  }
  write_text(out / "ablation.csv", csv.str());
  write_json(out / "ablation.json", results);
  summary({{"command", "ablate"}, {"templates", c.templates}, {"modes", c.modes}, {"out", out.generic_string()}});
  return 0;
}

int dispatch(const RunConfig& c) {
  if (c.command == "generate") return run_generate(c);
  if (c.command == "track") return run_track(c);
  if (c.command == "refine") return run_refine(c);
  if (c.command == "init") return run_init(c);
  if (c.command == "eval") return run_eval(c);
  if (c.command == "grasp") return run_grasp(c);
  if (c.command == "plan") return run_plan(c);
  return run_ablate(c);
}

/// Where the snapshot goes; eval writes next to its CSV.
std::string snapshot_for(const RunConfig& c) {
  if (c.command == "generate" || c.command == "ablate") return snapshot_path(c.path("out"), true);
  if (c.command == "eval")
    return snapshot_path(c.optional_path("out") ? fs::path(*c.optional_path("out")) : sibling(c.path("est"), ".add.csv"),
                         false);
  return snapshot_path(c.path("out"), false);
}

int main_impl(int argc, char** argv) {
  CLI::App app{"Track articulated objects from video and plan robot motion that reproduces it."};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_flag("-q,--quiet", g_quiet, "Suppress progress logs on stderr");

  std::map<std::string, Command> cmds;
  auto make = [&](const std::string& name, const std::string& desc) -> Command& {
    Command& c = cmds[name];
    c.app = app.add_subcommand(name, desc);
    c.binder = std::make_unique<Binder>(c.app, name);
    add_common(c);
    return c;
  };

  {
    Command& c = make("generate", "Synthesize a benchmark object, its observations and a robot");
    c.binder->path("template", "hinge-box | scissors | drawer | n-link-chain");
    c.binder->path("out", "Output directory");
    add_bench_flags(*c.binder);
  }
  {
    Command& c = make("track", "Track part poses through a frame sequence");
    c.binder->path("scene", "Scene manifest");
    c.binder->path("frames", "Frame directory");
    c.binder->path("init", "Initialization result to start from");
    c.binder->path("out", "Output trajectory");
    add_tracker_flags(*c.binder);
  }
  {
    Command& c = make("refine", "Jointly refine a trajectory with temporal smoothness");
    c.binder->path("scene", "Scene manifest (default: the trajectory's)");
    c.binder->path("frames", "Frame directory");
    c.binder->path("traj", "Trajectory to refine");
    c.binder->path("out", "Output trajectory");
    add_tracker_flags(*c.binder);
  }
  {
    Command& c = make("init", "Register the object in one frame");
    c.binder->path("scene", "Scene manifest");
    c.binder->path("frames", "Frame directory");
    c.binder->path("metric-depth", "Optional metric depth tensor for placement");
    c.binder->path("out", "Output JSON");
    c.binder->option("--frame", [](RunConfig& r) -> std::size_t& { return r.init_frame; }, "Frame index");
    add_tracker_flags(*c.binder);
  }
  {
    Command& c = make("eval", "Score an estimated trajectory against ground truth");
    c.binder->path("scene", "Scene manifest (default: the ground truth's)");
    c.binder->path("gt", "Ground-truth trajectory");
    c.binder->path("est", "Estimated trajectory");
    c.binder->path("out", "Output CSV (default: next to the estimate)");
    c.binder->option("--keyframe-stride", [](RunConfig& r) -> std::size_t& { return r.keyframe_stride; },
                     "Score every Nth frame");
    c.binder->option("--manipulated-part", [](RunConfig& r) -> std::size_t& { return r.manipulated_part; },
                     "Part reported as manipulated");
  }
  {
    Command& c = make("grasp", "Sample antipodal grasps for every part");
    c.binder->path("scene", "Scene manifest");
    c.binder->path("out", "Output JSON");
    add_grasp_flags(*c.binder);
  }
  {
    Command& c = make("plan", "Plan arm trajectories that reproduce the part motion");
    c.binder->path("scene", "Scene manifest (default: the trajectory's)");
    c.binder->path("traj", "Part trajectory");
    c.binder->path("frames", "Frame directory with fingertip tracks");
    c.binder->path("robot", "Robot config (default: the built-in two-arm robot)");
    c.binder->path("grasps", "Grasp file (default: sampled now)");
    c.binder->path("out", "Output plan JSON");
    add_grasp_flags(*c.binder);
    add_plan_flags(*c.binder);
  }
  {
    Command& c = make("ablate", "Compare tracking modes on benchmark objects");
    c.binder->option("--templates", [](RunConfig& r) -> std::vector<std::string>& { return r.templates; },
                     "Benchmark objects");
    c.binder->option("--modes", [](RunConfig& r) -> std::vector<std::string>& { return r.modes; },
                     "full | no_depth | no_arap | photometric");
    c.binder->path("out", "Output directory");
    add_bench_flags(*c.binder);
    add_tracker_flags(*c.binder);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n";
    const CLI::App* shown = &app;
    for (const auto& [name, c] : cmds)
      if (c.app->parsed()) shown = c.app;
    std::cerr << shown->help();
    return 1;
  }

  const auto it = std::find_if(cmds.begin(), cmds.end(), [](const auto& kv) { return kv.second.app->parsed(); });
  const Command& cmd = it->second;
  RunConfig cfg = default_run_config(it->first);
  if (!cmd.config_file.empty()) {
    cfg = run_config_from_json(read_json(cmd.config_file));
    if (cfg.command != it->first)
      throw ValidationError("config snapshot is for '" + cfg.command + "', not '" + it->first + "'");
  }
  cmd.binder->apply(cfg);
  if (auto s = seed_from_env()) cfg.rng_seed = *s;
  cfg.resolve();
  cfg.validate();

  const std::string snap = snapshot_for(cfg);
  ensure_parent(snap);
  write_json(snap, to_json(cfg));
  log("config snapshot " + snap);
  return dispatch(cfg);
}

}  // namespace
}  // namespace artic::cli

int main(int argc, char** argv) {
  try {
    return artic::cli::main_impl(argc, argv);
  } catch (const artic::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const artic::PipelineError& e) {
    std::cerr << "pipeline failure: " << e.what() << "\n";
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
