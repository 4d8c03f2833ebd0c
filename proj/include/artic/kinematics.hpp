#pragma once

// Serial kinematic chains: forward kinematics, sphere-based collision
// checks, and smooth joint trajectories that follow end-effector targets.

#include <artic/geometry.hpp>
#include <artic/io.hpp>

#include <Eigen/Core>

#include <string>
#include <vector>

namespace artic {

enum class JointType { revolute, prismatic };

struct Joint {
  JointType type = JointType::revolute;
  Vec3 axis = Vec3::UnitZ();  // in the joint frame
  Rigid origin;               // joint frame relative to the previous link frame
  double lo = -3.14159265358979323846;
  double hi = 3.14159265358979323846;
};

struct CollisionSphere {
  std::size_t link = 0;  // 0 is the base frame, k the frame after joint k
  Vec3 center = Vec3::Zero();
  double radius = 0.05;
};

struct KinematicChain {
  std::string name;
  Rigid base;
  std::vector<Joint> joints;
  Rigid ee_offset;
  std::vector<CollisionSphere> spheres;
  Eigen::VectorXd home;  // starting configuration for planning; zeros if empty

  std::size_t dof() const { return joints.size(); }
  Eigen::VectorXd start() const;
  void validate() const;
};

struct FkResult {
  Rigid ee;
  std::vector<Rigid> links;  // base, then the frame after each joint
  bool clamped = false;      // q was outside the joint limits and got clamped
};

/// Clamps q into the joint limits (reporting it) and composes the chain.
FkResult forward_kinematics(const KinematicChain& chain, const Eigen::VectorXd& q);

/// End-effector pose without clamping, for optimizers that probe outside the limits.
Rigid ee_pose(const KinematicChain& chain, const Eigen::VectorXd& q);

/// World-frame geometric Jacobian, rows (linear velocity, angular velocity).
Eigen::Matrix<double, 6, Eigen::Dynamic> ee_jacobian(const KinematicChain& chain, const Eigen::VectorXd& q);

bool within_limits(const KinematicChain& chain, const Eigen::VectorXd& q);

struct Sphere {
  Vec3 center = Vec3::Zero();
  double radius = 0.0;
};

struct CollisionWorld {
  double table_height = 0.0;  // the table is the halfspace z <= table_height
  std::vector<Sphere> obstacles;
  double margin = 0.0;
};

struct CollisionResult {
  bool free = true;
  double clearance = 0.0;  // smallest signed gap, meters; <= 0 counts as collision
};

CollisionResult collision_check(const KinematicChain& chain, const Eigen::VectorXd& q, const CollisionWorld& world);

/// Translation difference and rotation log of R * R_target^T.
Vec6 pose_error(const Rigid& pose, const Rigid& target);

struct LmOptions {
  double w_smooth = 0.1;
  double barrier_weight = 10.0;
  double barrier_margin = 0.02;  // fraction of each joint's range kept clear of the limits
  int max_iterations = 200;
  double initial_damping = 1e-9;  // relative to the largest diagonal entry
  double max_translation = 0.01;  // acceptance, meters
  double max_rotation = 5.0 * 3.14159265358979323846 / 180.0;  // acceptance, radians

  void validate() const;
};

struct JointTrajectory {
  std::vector<Eigen::VectorXd> q;
  std::vector<Rigid> achieved;
  std::vector<double> translation_deviation;
  std::vector<double> rotation_deviation;
  double max_translation_deviation = 0.0;
  double max_rotation_deviation = 0.0;
};

struct LmResult {
  JointTrajectory trajectory;
  bool accepted = false;
  bool converged = false;
  bool within_limits = false;
  std::string reason;  // empty when accepted
  int iterations = 0;
  std::vector<double> cost_history;  // cost at the start and after every accepted step
};

/// Damped Gauss-Newton over all timesteps jointly. The normal equations are
/// block tridiagonal (smoothness couples only neighbouring timesteps) and are
/// solved by block elimination.
LmResult lm_trajectory(const KinematicChain& chain, const std::vector<Rigid>& targets, const Eigen::VectorXd& q_init,
                       const LmOptions& opts = {});

/// A 7-joint arm with roughly a metre of reach, elbow-bent at home.
KinematicChain synthetic_arm(const std::string& name, const Rigid& base);

struct RobotConfig {
  std::vector<KinematicChain> arms;
  CollisionWorld world;
};

/// Two synthetic arms facing each other across the workspace origin.
RobotConfig default_robot();

Json to_json(const KinematicChain& c);
KinematicChain chain_from_json(const Json& j);
Json to_json(const RobotConfig& r);
RobotConfig robot_config_from_json(const Json& j);
Json to_json(const JointTrajectory& t);

}  // namespace artic
