#pragma once

// From recovered part motion to robot motion: which part(s) to grasp, where
// the gripper must go, and the first grasp/arm combination that gets there.

#include <artic/grasp.hpp>
#include <artic/kinematics.hpp>
#include <artic/scene.hpp>
#include <artic/tracker.hpp>

#include <map>
#include <optional>

namespace artic {

struct RankedParts {
  // Each group is one part (one hand) or a part per hand (two hands), best first.
  std::vector<std::vector<std::size_t>> groups;
  std::vector<double> scores;  // hand-guided: meters, lower is better; fallback: displacement, higher is better
  bool hand_guided = false;
};

struct RankOptions {
  std::size_t hands = 1;              // used by the fallback when no fingertip tracks exist
  double coupled_tolerance = 0.001;   // meters; pairs moving together closer than this are dropped
};

/// World-frame rigid transform of every part at frame t.
std::vector<Rigid> part_transforms(const GaussianScene& scene, const PartPoseSet& poses);

/// Hand-guided when `hands` has tracks (one entry per frame, one HandPoints per
/// hand): parts are scored per hand by the mean over frames of the summed
/// thumb and index distances to the nearest posed gaussian center, and the
/// part-per-hand assignment minimizing the total is chosen, ties to the
/// lowest part indices. Otherwise parts (or pairs) are ranked by their
/// largest displacement, dropping pairs that move as one rigid body.
RankedParts rank_parts(const GaussianScene& scene, const Trajectory& trajectory,
                       const std::vector<std::vector<HandPoints>>& hands, const RankOptions& opts = {});

/// Gripper targets that keep the grasp rigidly attached to its part. With a
/// lift, every target after the first is raised by `lift` along world z.
std::vector<Rigid> ee_targets(const GaussianScene& scene, const Trajectory& trajectory, const GraspCandidate& grasp,
                              double lift = 0.0, const Rigid& world_from_object = {});

struct PlanOptions {
  MeshOptions mesh;
  AntipodalOptions grasp;
  LmOptions lm;
  double approach_offset = 0.10;  // meters, back-off along the approach axis
  int approach_steps = 11;        // poses on the straight pre-grasp segment, back-off to grasp
  double bimanual_lift = 0.02;
  Rigid world_from_object;

  void validate() const;
};

/// Grasps for every part; parts with no antipodal axis get an empty list.
std::map<std::size_t, std::vector<GraspCandidate>> plan_grasps(const GaussianScene& scene, const PlanOptions& opts);

struct ArmPlan {
  std::size_t arm = 0;
  std::size_t grasp_index = 0;  // into the part's candidate list
  GraspCandidate grasp;
  Rigid approach_pose;           // the back-off pose the approach starts from
  JointTrajectory approach;      // straight pre-grasp segment, ending at the grasp
  JointTrajectory trajectory;    // one entry per trajectory frame
  double min_clearance = 0.0;
};

struct RejectionReport {
  int attempts = 0;
  int deviation = 0;    // did not converge, or left the target tolerance
  int limits = 0;
  int collision = 0;
  int ungraspable = 0;  // parts without any grasp
  int same_part = 0;    // groups naming one part twice
};

struct PlanResult {
  bool found = false;
  std::vector<std::size_t> parts;
  std::vector<ArmPlan> arms;  // one per hand, in group order
  RejectionReport report;
};

/// Exhaustive first-feasible search: ranked groups, then grasp candidates,
/// then arm assignments (both ways for two hands). Each try solves an LM
/// trajectory for the part-following targets and one for the approach
/// segment, and collision-checks every timestep of both. Deterministic.
PlanResult plan(const GaussianScene& scene, const Trajectory& trajectory, const RankedParts& ranked,
                const std::map<std::size_t, std::vector<GraspCandidate>>& grasps, const RobotConfig& robot,
                const PlanOptions& opts = {});

Json to_json(const RankedParts& r);
Json to_json(const RejectionReport& r);
Json to_json(const PlanResult& r);

}  // namespace artic
