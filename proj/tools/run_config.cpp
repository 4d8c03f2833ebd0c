#include "run_config.hpp"

#include <artic/errors.hpp>
#include <artic/parallel.hpp>

#include <Eigen/Geometry>

#include <cerrno>
#include <cmath>
#include <cstdlib>

namespace artic::cli {

namespace {

using artic::to_json;

constexpr double kPi = 3.14159265358979323846;

template <typename T>
void get(const Json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

Json tracker_json(const TrackerOptions& t) {
  return {{"lambda_dino", t.weights.dino},
          {"lambda_mono", t.weights.mono},
          {"lambda_arap", t.weights.arap},
          {"lambda_temporal", t.weights.temporal},
          {"steps", t.steps},
          {"refine_steps", t.refine_steps},
          {"lr", t.adam.lr_start},
          {"lr_final", t.adam.lr_end},
          {"beta1", t.adam.beta1},
          {"beta2", t.adam.beta2},
          {"adam_eps", t.adam.eps},
          {"depth_pairs", t.depth_pairs},
          {"ranking_margin", t.ranking_margin},
          {"alpha_mask", t.alpha_mask},
          {"erode", t.erode},
          {"feature_clip_alpha", t.feature_clip_alpha},
          {"blur_kernel", t.blur_kernel},
          {"boundary_radius", t.boundary_radius},
          {"barron_alpha", t.barron_alpha},
          {"barron_c", t.barron_c},
          {"photometric", t.photometric},
          {"seeds", t.seeds},
          {"init_iters", t.init_iters},
          {"translation_unit", t.translation_unit},
          {"carry_moments", t.carry_moments}};
}

void tracker_from_json(const Json& j, TrackerOptions& t) {
  get(j, "lambda_dino", t.weights.dino);
  get(j, "lambda_mono", t.weights.mono);
  get(j, "lambda_arap", t.weights.arap);
  get(j, "lambda_temporal", t.weights.temporal);
  get(j, "steps", t.steps);
  get(j, "refine_steps", t.refine_steps);
  get(j, "lr", t.adam.lr_start);
  get(j, "lr_final", t.adam.lr_end);
  get(j, "beta1", t.adam.beta1);
  get(j, "beta2", t.adam.beta2);
  get(j, "adam_eps", t.adam.eps);
  get(j, "depth_pairs", t.depth_pairs);
  get(j, "ranking_margin", t.ranking_margin);
  get(j, "alpha_mask", t.alpha_mask);
  get(j, "erode", t.erode);
  get(j, "feature_clip_alpha", t.feature_clip_alpha);
  get(j, "blur_kernel", t.blur_kernel);
  get(j, "boundary_radius", t.boundary_radius);
  get(j, "barron_alpha", t.barron_alpha);
  get(j, "barron_c", t.barron_c);
  get(j, "photometric", t.photometric);
  get(j, "seeds", t.seeds);
  get(j, "init_iters", t.init_iters);
  get(j, "translation_unit", t.translation_unit);
  get(j, "carry_moments", t.carry_moments);
}

Json plan_json(const RunConfig& c) {
  const PlanOptions& p = c.plan;
  return {{"face_budget", p.mesh.face_budget},
          {"smooth_iterations", p.mesh.smooth_iterations},
          {"taubin_lambda", p.mesh.taubin_lambda},
          {"taubin_mu", p.mesh.taubin_mu},
          {"n_axes", p.grasp.n_axes},
          {"mu", p.grasp.mu},
          {"max_width", p.grasp.max_width},
          {"max_attempts", p.grasp.max_attempts},
          {"w_smooth", p.lm.w_smooth},
          {"barrier_weight", p.lm.barrier_weight},
          {"barrier_margin", p.lm.barrier_margin},
          {"lm_iterations", p.lm.max_iterations},
          {"initial_damping", p.lm.initial_damping},
          {"max_translation", p.lm.max_translation},
          {"max_rotation_deg", p.lm.max_rotation * 180.0 / kPi},
          {"approach_offset", p.approach_offset},
          {"approach_steps", p.approach_steps},
          {"bimanual_lift", p.bimanual_lift},
          {"object_offset", c.object_offset},
          {"object_yaw_deg", c.object_yaw_deg},
          {"hands", c.rank.hands},
          {"coupled_tolerance", c.rank.coupled_tolerance}};
}

void plan_from_json(const Json& j, RunConfig& c) {
  PlanOptions& p = c.plan;
  get(j, "face_budget", p.mesh.face_budget);
  get(j, "smooth_iterations", p.mesh.smooth_iterations);
  get(j, "taubin_lambda", p.mesh.taubin_lambda);
  get(j, "taubin_mu", p.mesh.taubin_mu);
  get(j, "n_axes", p.grasp.n_axes);
  get(j, "mu", p.grasp.mu);
  get(j, "max_width", p.grasp.max_width);
  get(j, "max_attempts", p.grasp.max_attempts);
  get(j, "w_smooth", p.lm.w_smooth);
  get(j, "barrier_weight", p.lm.barrier_weight);
  get(j, "barrier_margin", p.lm.barrier_margin);
  get(j, "lm_iterations", p.lm.max_iterations);
  get(j, "initial_damping", p.lm.initial_damping);
  get(j, "max_translation", p.lm.max_translation);
  if (j.contains("max_rotation_deg")) p.lm.max_rotation = j.at("max_rotation_deg").get<double>() * kPi / 180.0;
  get(j, "approach_offset", p.approach_offset);
  get(j, "approach_steps", p.approach_steps);
  get(j, "bimanual_lift", p.bimanual_lift);
  get(j, "object_offset", c.object_offset);
  get(j, "object_yaw_deg", c.object_yaw_deg);
  get(j, "hands", c.rank.hands);
  get(j, "coupled_tolerance", c.rank.coupled_tolerance);
}

}  // namespace

RunConfig default_run_config(const std::string& command) {
  RunConfig c;
  c.command = command;
  c.modes = {"full", "no_depth", "no_arap", "photometric"};
  c.templates = {"hinge-box", "scissors", "drawer"};
  return c;
}

void RunConfig::resolve() {
  if (workers <= 0) workers = default_workers();
  tracker.rng_seed = rng_seed;
  tracker.workers = workers;
  bench.rng_seed = rng_seed;
  plan.grasp.seed = rng_seed;
  plan.world_from_object = Rigid{};
  if (object_offset.size() == 3) {
    plan.world_from_object.rotation = Eigen::AngleAxisd(object_yaw_deg * kPi / 180.0, Vec3::UnitZ()).toRotationMatrix();
    plan.world_from_object.translation = Vec3(object_offset[0], object_offset[1], object_offset[2]);
  }
}

void RunConfig::validate() const {
  tracker.validate();
  plan.validate();
  if (object_offset.size() != 3) throw ValidationError("object offset needs 3 values");
  if (keyframe_stride < 1) throw ValidationError("keyframe stride must be positive");
  if (rank.hands < 1 || rank.hands > 2) throw ValidationError("hands must be 1 or 2");
  if (command == "generate") bench.validate();
  if (command == "ablate") {
    if (templates.empty()) throw ValidationError("ablation needs at least one template");
    if (modes.empty()) throw ValidationError("ablation needs at least one mode");
    for (const auto& t : templates) {
      SyntheticSpec s = bench;
      s.object = t;
      s.validate();
    }
  }
}

const std::string& RunConfig::path(const std::string& key) const {
  const auto it = paths.find(key);
  if (it == paths.end() || it->second.empty()) throw ValidationError("missing required path --" + key);
  return it->second;
}

std::optional<std::string> RunConfig::optional_path(const std::string& key) const {
  const auto it = paths.find(key);
  if (it == paths.end() || it->second.empty()) return std::nullopt;
  return it->second;
}

Json to_json(const RunConfig& c) {
  Json paths = Json::object();
  for (const auto& [k, v] : c.paths)
    if (!v.empty()) paths[k] = v;
  Json bench = to_json(c.bench);
  bench.erase("rng_seed");
  return {{"command", c.command},
          {"paths", paths},
          {"bench", bench},
          {"templates", c.templates},
          {"modes", c.modes},
          {"tracker", tracker_json(c.tracker)},
          {"init_frame", c.init_frame},
          {"keyframe_stride", c.keyframe_stride},
          {"manipulated_part", c.manipulated_part},
          {"plan", plan_json(c)},
          {"rng_seed", c.rng_seed},
          {"workers", c.workers}};
}

RunConfig run_config_from_json(const Json& j) {
  try {
    RunConfig c = default_run_config(require(j, "command").get<std::string>());
    if (j.contains("paths"))
      for (const auto& [k, v] : j.at("paths").items()) c.paths[k] = v.get<std::string>();
    if (j.contains("bench")) c.bench = synthetic_spec_from_json(j.at("bench"));
    get(j, "templates", c.templates);
    get(j, "modes", c.modes);
    if (j.contains("tracker")) tracker_from_json(j.at("tracker"), c.tracker);
    get(j, "init_frame", c.init_frame);
    get(j, "keyframe_stride", c.keyframe_stride);
    get(j, "manipulated_part", c.manipulated_part);
    if (j.contains("plan")) plan_from_json(j.at("plan"), c);
    get(j, "rng_seed", c.rng_seed);
    get(j, "workers", c.workers);
    return c;
  } catch (const Json::exception& e) {
    throw FormatError(std::string("run config: ") + e.what());
  }
}

std::optional<std::uint64_t> seed_from_env() {
  const char* s = std::getenv("RSRD_SEED");
  if (s == nullptr || *s == '\0') return std::nullopt;
  char* end = nullptr;
  errno = 0;
  const unsigned long long v = std::strtoull(s, &end, 10);
  if (errno != 0 || *end != '\0' || *s == '-') throw ValidationError(std::string("RSRD_SEED is not a seed: ") + s);
  return static_cast<std::uint64_t>(v);
}

}  // namespace artic::cli
