#include <artic/planner.hpp>

#include <artic/errors.hpp>

#include <algorithm>
#include <numeric>
#include <set>
#include <tuple>

namespace artic {

std::vector<Rigid> part_transforms(const GaussianScene& scene, const PartPoseSet& poses) {
  if (poses.size() != scene.num_parts())
    throw ValidationError("pose set has " + std::to_string(poses.size()) + " parts but the scene has " +
                          std::to_string(scene.num_parts()));
  std::vector<Rigid> out;
  out.reserve(poses.size());
  for (std::size_t p = 0; p < poses.size(); ++p) out.push_back(poses[p].as_rigid(scene.part_centroid(p)));
  return out;
}

namespace {

double nearest(const GaussianScene& scene, std::size_t part, const Rigid& t, const Vec3& x) {
  // Distance to the posed part equals distance of the pulled-back point to the rest part.
  const Vec3 local = t.rotation.transpose() * (x - t.translation);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i : scene.parts()[part]) best = std::min(best, (scene.gaussians()[i].center - local).squaredNorm());
  return std::sqrt(best);
}

double mean_motion(const GaussianScene& scene, const std::vector<std::size_t>& idx, const Rigid& a, const Rigid& b) {
  double s = 0.0;
  for (std::size_t i : idx) {
    const Vec3& x = scene.gaussians()[i].center;
    s += (a * x - b * x).norm();
  }
  return idx.empty() ? 0.0 : s / static_cast<double>(idx.size());
}

}  // namespace

RankedParts rank_parts(const GaussianScene& scene, const Trajectory& trajectory,
                       const std::vector<std::vector<HandPoints>>& hands, const RankOptions& opts) {
  trajectory.validate(scene.num_parts());
  const std::size_t parts = scene.num_parts();
  std::vector<std::vector<Rigid>> tf;
  for (const auto& f : trajectory.frames) tf.push_back(part_transforms(scene, f));
  const bool guided = !hands.empty() && !hands.front().empty();
  const std::size_t nh = guided ? hands.front().size() : opts.hands;
  if (nh < 1 || nh > 2) throw ValidationError("ranking supports one or two hands, got " + std::to_string(nh));
  if (parts < nh) throw ValidationError("fewer parts than hands");

  RankedParts out;
  out.hand_guided = guided;
  std::vector<std::pair<std::vector<std::size_t>, double>> ranked;
  if (guided) {
    if (hands.size() != trajectory.size())
      throw ValidationError("fingertip tracks have " + std::to_string(hands.size()) + " frames but the trajectory has " +
                            std::to_string(trajectory.size()));
    for (const auto& h : hands)
      if (h.size() != nh) throw ValidationError("every frame must carry the same number of hands");
    // score[h][p]: mean over frames of thumb + index distance to part p.
    std::vector<std::vector<double>> score(nh, std::vector<double>(parts, 0.0));
    for (std::size_t t = 0; t < trajectory.size(); ++t)
      for (std::size_t h = 0; h < nh; ++h)
        for (std::size_t p = 0; p < parts; ++p)
          score[h][p] += nearest(scene, p, tf[t][p], hands[t][h].thumb) + nearest(scene, p, tf[t][p], hands[t][h].index);
    for (auto& row : score)
      for (double& v : row) v /= static_cast<double>(trajectory.size());
    if (nh == 1) {
      for (std::size_t p = 0; p < parts; ++p) ranked.push_back({{p}, score[0][p]});
    } else {
      for (std::size_t p = 0; p < parts; ++p)
        for (std::size_t q = 0; q < parts; ++q)
          if (p != q) ranked.push_back({{p, q}, score[0][p] + score[1][q]});
    }
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second < b.second; });
  } else {
    const Rigid rest;
    std::vector<double> disp(parts, 0.0);
    for (std::size_t p = 0; p < parts; ++p)
      for (const auto& f : tf) disp[p] = std::max(disp[p], mean_motion(scene, scene.parts()[p], f[p], rest));
    if (nh == 1) {
      for (std::size_t p = 0; p < parts; ++p) ranked.push_back({{p}, disp[p]});
    } else {
      for (std::size_t p = 0; p < parts; ++p)
        for (std::size_t q = p + 1; q < parts; ++q) {
          std::vector<std::size_t> both = scene.parts()[p];
          both.insert(both.end(), scene.parts()[q].begin(), scene.parts()[q].end());
          double rel = 0.0;
          for (const auto& f : tf) rel = std::max(rel, mean_motion(scene, both, f[p], f[q]));
          // Two parts that never move relative to each other are one rigid body.
          if (rel <= opts.coupled_tolerance) continue;
          ranked.push_back({{p, q}, disp[p] + disp[q]});
        }
    }
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  }
  for (auto& [g, s] : ranked) {
    out.groups.push_back(std::move(g));
    out.scores.push_back(s);
  }
  return out;
}

std::vector<Rigid> ee_targets(const GaussianScene& scene, const Trajectory& trajectory, const GraspCandidate& grasp,
                              double lift, const Rigid& world_from_object) {
  if (grasp.part >= scene.num_parts()) throw ValidationError("grasp names part " + std::to_string(grasp.part) + " which the scene does not have");
  std::vector<Rigid> out;
  out.reserve(trajectory.size());
  for (std::size_t t = 0; t < trajectory.size(); ++t) {
    const auto& f = trajectory.frames[t];
    if (f.size() != scene.num_parts()) throw ValidationError("trajectory frame has the wrong part count");
    Rigid target = world_from_object * f[grasp.part].as_rigid(scene.part_centroid(grasp.part)) * grasp.pose;
    if (t > 0) target.translation.z() += lift;
    out.push_back(target);
  }
  return out;
}

void PlanOptions::validate() const {
  grasp.validate();
  lm.validate();
  if (!(approach_offset >= 0)) throw ValidationError("approach offset must be non-negative");
  if (approach_steps < 1) throw ValidationError("approach needs at least one pose");
  if (!(bimanual_lift >= 0)) throw ValidationError("bimanual lift must be non-negative");
}

std::map<std::size_t, std::vector<GraspCandidate>> plan_grasps(const GaussianScene& scene, const PlanOptions& opts) {
  std::map<std::size_t, std::vector<GraspCandidate>> out;
  for (std::size_t p = 0; p < scene.num_parts(); ++p) {
    std::vector<Vec3> centers;
    for (std::size_t i : scene.parts()[p]) centers.push_back(scene.gaussians()[i].center);
    AntipodalOptions ao = opts.grasp;
    ao.seed = opts.grasp.seed + p;
    try {
      out[p] = augment_grasps(p, sample_antipodal(part_mesh(centers, opts.mesh), ao, p));
    } catch (const PipelineError&) {
      out[p] = {};  // too thin or ungraspable; the planner reports it
    }
  }
  return out;
}

namespace {

enum class Outcome { ok, deviation, limits, collision };

struct Attempt {
  Outcome outcome = Outcome::deviation;
  ArmPlan plan;
};

Outcome classify(const LmResult& r, const LmOptions& o) {
  if (!r.converged || r.trajectory.max_translation_deviation > o.max_translation ||
      r.trajectory.max_rotation_deviation > o.max_rotation)
    return Outcome::deviation;
  if (!r.within_limits) return Outcome::limits;
  return Outcome::ok;
}

Attempt try_arm(const GaussianScene& scene, const Trajectory& traj, const GraspCandidate& grasp, std::size_t gi,
                std::size_t arm, const RobotConfig& robot, double lift, const PlanOptions& opts) {
  const KinematicChain& chain = robot.arms[arm];
  Attempt a;
  a.plan.arm = arm;
  a.plan.grasp = grasp;
  a.plan.grasp_index = gi;
  const std::vector<Rigid> follow = ee_targets(scene, traj, grasp, lift, opts.world_from_object);
  const Vec3 approach_dir = follow.front().rotation.col(2);
  std::vector<Rigid> approach;
  const int n = opts.approach_steps;
  for (int k = 0; k < n; ++k) {
    Rigid r = follow.front();
    if (n > 1) r.translation -= approach_dir * (opts.approach_offset * static_cast<double>(n - 1 - k) / static_cast<double>(n - 1));
    approach.push_back(r);
  }
  a.plan.approach_pose = approach.front();

  // Reach the grasp from home, follow the part from there, then fit the
  // straight approach ending at the grasp configuration.
  const LmResult ik = lm_trajectory(chain, {follow.front()}, chain.start(), opts.lm);
  a.outcome = classify(ik, opts.lm);
  if (a.outcome != Outcome::ok) return a;
  const LmResult main = lm_trajectory(chain, follow, ik.trajectory.q.front(), opts.lm);
  a.outcome = classify(main, opts.lm);
  if (a.outcome != Outcome::ok) return a;
  const LmResult in = lm_trajectory(chain, approach, main.trajectory.q.front(), opts.lm);
  a.outcome = classify(in, opts.lm);
  if (a.outcome != Outcome::ok) return a;
  a.plan.approach = in.trajectory;
  a.plan.trajectory = main.trajectory;
  double clearance = std::numeric_limits<double>::infinity();
  for (const auto* j : {&in.trajectory, &main.trajectory})
    for (const auto& q : j->q) clearance = std::min(clearance, collision_check(chain, q, robot.world).clearance);
  a.plan.min_clearance = clearance;
  if (!(clearance > 0.0)) a.outcome = Outcome::collision;
  return a;
}

/// Sphere-sphere clearance between two arms over a common timeline.
bool arms_clear(const RobotConfig& robot, const ArmPlan& a, const ArmPlan& b) {
  auto spheres = [&](const ArmPlan& p, const Eigen::VectorXd& q) {
    const KinematicChain& c = robot.arms[p.arm];
    const FkResult fk = forward_kinematics(c, q);
    std::vector<std::pair<Vec3, double>> out;
    for (const auto& s : c.spheres) out.push_back({fk.links[s.link] * s.center, s.radius});
    return out;
  };
  auto check = [&](const JointTrajectory& ja, const JointTrajectory& jb) {
    for (std::size_t t = 0; t < std::min(ja.q.size(), jb.q.size()); ++t)
      for (const auto& [ca, ra] : spheres(a, ja.q[t]))
        for (const auto& [cb, rb] : spheres(b, jb.q[t]))
          if (!((ca - cb).norm() - ra - rb - robot.world.margin > 0.0)) return false;
    return true;
  };
  return check(a.approach, b.approach) && check(a.trajectory, b.trajectory);
}

}  // namespace

PlanResult plan(const GaussianScene& scene, const Trajectory& trajectory, const RankedParts& ranked,
                const std::map<std::size_t, std::vector<GraspCandidate>>& grasps, const RobotConfig& robot,
                const PlanOptions& opts) {
  opts.validate();
  trajectory.validate(scene.num_parts());
  if (trajectory.size() == 0) throw ValidationError("cannot plan for an empty trajectory");
  if (robot.arms.empty()) throw ValidationError("robot has no arms");
  for (const auto& arm : robot.arms) arm.validate();

  PlanResult res;
  RejectionReport& rep = res.report;
  std::map<std::tuple<std::size_t, std::size_t, std::size_t, bool>, Attempt> cache;  // arm, part, grasp, lifted
  auto attempt = [&](std::size_t arm, std::size_t part, std::size_t gi, bool lifted) -> const Attempt& {
    const auto key = std::make_tuple(arm, part, gi, lifted);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    ++rep.attempts;
    Attempt a = try_arm(scene, trajectory, grasps.at(part)[gi], gi, arm, robot, lifted ? opts.bimanual_lift : 0.0, opts);
    if (a.outcome == Outcome::deviation) ++rep.deviation;
    else if (a.outcome == Outcome::limits) ++rep.limits;
    else if (a.outcome == Outcome::collision) ++rep.collision;
    return cache.emplace(key, std::move(a)).first->second;
  };
  auto graspable = [&](std::size_t p) {
    if (p >= scene.num_parts()) throw ValidationError("ranked part " + std::to_string(p) + " does not exist");
    auto it = grasps.find(p);
    return it != grasps.end() && !it->second.empty();
  };
  std::set<std::size_t> counted_ungraspable;
  auto note_ungraspable = [&](std::size_t p) {
    if (counted_ungraspable.insert(p).second) ++rep.ungraspable;
  };

  for (const auto& group : ranked.groups) {
    if (group.size() == 1) {
      const std::size_t p = group[0];
      if (!graspable(p)) {
        note_ungraspable(p);
        continue;
      }
      for (std::size_t gi = 0; gi < grasps.at(p).size(); ++gi)
        for (std::size_t arm = 0; arm < robot.arms.size(); ++arm) {
          const Attempt& a = attempt(arm, p, gi, false);
          if (a.outcome != Outcome::ok) continue;
          res.found = true;
          res.parts = {p};
          res.arms = {a.plan};
          return res;
        }
    } else if (group.size() == 2) {
      const std::size_t p = group[0], q = group[1];
      if (p == q) {
        ++rep.same_part;
        continue;
      }
      if (robot.arms.size() < 2) throw ValidationError("a two-hand plan needs two arms");
      bool skip = false;
      for (std::size_t x : {p, q})
        if (!graspable(x)) {
          note_ungraspable(x);
          skip = true;
        }
      if (skip) continue;
      const std::pair<std::size_t, std::size_t> assignments[2] = {{0, 1}, {1, 0}};
      for (std::size_t gi = 0; gi < grasps.at(p).size(); ++gi)
        for (std::size_t gj = 0; gj < grasps.at(q).size(); ++gj)
          for (const auto& [arm_p, arm_q] : assignments) {
            const Attempt& a = attempt(arm_p, p, gi, true);
            if (a.outcome != Outcome::ok) continue;
            const Attempt& b = attempt(arm_q, q, gj, true);
            if (b.outcome != Outcome::ok) continue;
            if (!arms_clear(robot, a.plan, b.plan)) {
              ++rep.collision;
              continue;
            }
            res.found = true;
            res.parts = {p, q};
            res.arms = {a.plan, b.plan};
            return res;
          }
    } else {
      throw ValidationError("ranked groups must name one or two parts");
    }
  }
  return res;
}

Json to_json(const RankedParts& r) {
  Json groups = Json::array();
  for (std::size_t k = 0; k < r.groups.size(); ++k) groups.push_back({{"parts", r.groups[k]}, {"score", r.scores[k]}});
  return {{"hand_guided", r.hand_guided}, {"groups", groups}};
}

Json to_json(const RejectionReport& r) {
  return {{"attempts", r.attempts},   {"deviation", r.deviation},     {"limits", r.limits},
          {"collision", r.collision}, {"ungraspable", r.ungraspable}, {"same_part", r.same_part}};
}

Json to_json(const PlanResult& r) {
  Json arms = Json::array();
  for (const auto& a : r.arms)
    arms.push_back({{"arm", a.arm},
                    {"part", a.grasp.part},
                    {"grasp_index", a.grasp_index},
                    {"grasp", to_json(a.grasp)},
                    {"approach_pose", to_json(a.approach_pose)},
                    {"approach", to_json(a.approach)},
                    {"trajectory", to_json(a.trajectory)},
                    {"min_clearance", a.min_clearance}});
  return {{"found", r.found}, {"parts", r.parts}, {"arms", arms}, {"report", to_json(r.report)}};
}

}  // namespace artic
