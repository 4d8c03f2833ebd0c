#include <artic/kinematics.hpp>

#include <artic/errors.hpp>

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace artic {

namespace {

constexpr double kPi = 3.14159265358979323846;

Rigid joint_motion(const Joint& j, double q) {
  if (j.type == JointType::revolute) return {Eigen::AngleAxisd(q, j.axis).toRotationMatrix(), Vec3::Zero()};
  return {Mat3::Identity(), j.axis * q};
}

struct Frames {
  std::vector<Rigid> links;  // base, then after each joint
  std::vector<Vec3> axes;    // world joint axes
  std::vector<Vec3> origins; // world joint origins
  Rigid ee;
};

Frames compose(const KinematicChain& chain, const Eigen::VectorXd& q) {
  Frames f;
  Rigid t = chain.base;
  f.links.push_back(t);
  for (std::size_t i = 0; i < chain.joints.size(); ++i) {
    const Joint& j = chain.joints[i];
    const Rigid at = t * j.origin;
    f.axes.push_back(at.rotation * j.axis);
    f.origins.push_back(at.translation);
    t = at * joint_motion(j, q[static_cast<Eigen::Index>(i)]);
    f.links.push_back(t);
  }
  f.ee = t * chain.ee_offset;
  return f;
}

void check_dim(const KinematicChain& chain, const Eigen::VectorXd& q) {
  if (static_cast<std::size_t>(q.size()) != chain.dof())
    throw ValidationError("joint vector has " + std::to_string(q.size()) + " entries but the chain has " +
                          std::to_string(chain.dof()) + " joints");
}

/// Inverse of the left Jacobian of SO(3) at rotation vector phi.
Mat3 so3_left_jacobian_inv(const Vec3& phi) {
  const double th = phi.norm();
  const Mat3 k = skew(phi);
  double c;
  if (th < 1e-5) {
    c = 1.0 / 12.0 + th * th / 720.0;
  } else {
    c = 1.0 / (th * th) - (1.0 + std::cos(th)) / (2.0 * th * std::sin(th));
  }
  return Mat3::Identity() - 0.5 * k + c * k * k;
}

}  // namespace

Eigen::VectorXd KinematicChain::start() const {
  if (home.size() == 0) return Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dof()));
  return home;
}

void KinematicChain::validate() const {
  if (joints.empty()) throw ValidationError("chain '" + name + "' has no joints");
  for (std::size_t i = 0; i < joints.size(); ++i) {
    const Joint& j = joints[i];
    if (!(j.lo < j.hi)) throw ValidationError("joint " + std::to_string(i) + " of '" + name + "' has lo >= hi");
    if (std::abs(j.axis.norm() - 1.0) > 1e-9)
      throw ValidationError("joint " + std::to_string(i) + " of '" + name + "' has a non-unit axis");
  }
  for (const auto& s : spheres) {
    if (s.link > joints.size()) throw ValidationError("collision sphere on a link the chain does not have");
    if (!(s.radius > 0)) throw ValidationError("collision sphere radius must be positive");
  }
  if (home.size() != 0) {
    check_dim(*this, home);
    if (!within_limits(*this, home)) throw ValidationError("home configuration of '" + name + "' is outside the limits");
  }
}

FkResult forward_kinematics(const KinematicChain& chain, const Eigen::VectorXd& q) {
  check_dim(chain, q);
  Eigen::VectorXd qc = q;
  FkResult out;
  for (std::size_t i = 0; i < chain.dof(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    const double v = std::clamp(q[k], chain.joints[i].lo, chain.joints[i].hi);
    out.clamped = out.clamped || v != q[k];
    qc[k] = v;
  }
  Frames f = compose(chain, qc);
  out.ee = f.ee;
  out.links = std::move(f.links);
  return out;
}

Rigid ee_pose(const KinematicChain& chain, const Eigen::VectorXd& q) {
  check_dim(chain, q);
  return compose(chain, q).ee;
}

Eigen::Matrix<double, 6, Eigen::Dynamic> ee_jacobian(const KinematicChain& chain, const Eigen::VectorXd& q) {
  check_dim(chain, q);
  const Frames f = compose(chain, q);
  Eigen::Matrix<double, 6, Eigen::Dynamic> jac(6, static_cast<Eigen::Index>(chain.dof()));
  for (std::size_t i = 0; i < chain.dof(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    if (chain.joints[i].type == JointType::revolute) {
      jac.col(k).head<3>() = f.axes[i].cross(f.ee.translation - f.origins[i]);
      jac.col(k).tail<3>() = f.axes[i];
    } else {
      jac.col(k).head<3>() = f.axes[i];
      jac.col(k).tail<3>().setZero();
    }
  }
  return jac;
}

bool within_limits(const KinematicChain& chain, const Eigen::VectorXd& q) {
  check_dim(chain, q);
  for (std::size_t i = 0; i < chain.dof(); ++i) {
    const double v = q[static_cast<Eigen::Index>(i)];
    if (v < chain.joints[i].lo || v > chain.joints[i].hi) return false;
  }
  return true;
}

CollisionResult collision_check(const KinematicChain& chain, const Eigen::VectorXd& q, const CollisionWorld& world) {
  const FkResult fk = forward_kinematics(chain, q);
  CollisionResult out;
  out.clearance = std::numeric_limits<double>::infinity();
  for (const auto& s : chain.spheres) {
    const Vec3 c = fk.links[s.link] * s.center;
    out.clearance = std::min(out.clearance, c.z() - s.radius - world.table_height - world.margin);
    for (const auto& o : world.obstacles)
      out.clearance = std::min(out.clearance, (c - o.center).norm() - s.radius - o.radius - world.margin);
  }
  // Touching counts as a collision.
  out.free = out.clearance > 0.0;
  return out;
}

Vec6 pose_error(const Rigid& pose, const Rigid& target) {
  Vec6 e;
  e.head<3>() = pose.translation - target.translation;
  e.tail<3>() = so3_log(pose.rotation * target.rotation.transpose());
  return e;
}

void LmOptions::validate() const {
  if (w_smooth < 0 || barrier_weight < 0) throw ValidationError("LM weights must be non-negative");
  if (barrier_margin < 0 || barrier_margin >= 0.5) throw ValidationError("barrier margin must be in [0, 0.5)");
  if (max_iterations < 1) throw ValidationError("LM needs at least one iteration");
  if (!(initial_damping > 0)) throw ValidationError("initial damping must be positive");
  if (!(max_translation > 0) || !(max_rotation > 0)) throw ValidationError("deviation thresholds must be positive");
}

namespace {

struct Problem {
  const KinematicChain& chain;
  const std::vector<Rigid>& targets;
  const LmOptions& opts;
  std::size_t n;  // dof
  std::size_t T;

  double barrier(std::size_t j, double q, double* slope) const {
    const Joint& jt = chain.joints[j];
    const double m = opts.barrier_margin * (jt.hi - jt.lo);
    const double s = std::sqrt(opts.barrier_weight);
    if (q < jt.lo + m) {
      *slope = -s;
      return s * (jt.lo + m - q);
    }
    if (q > jt.hi - m) {
      *slope = s;
      return s * (q - (jt.hi - m));
    }
    *slope = 0.0;
    return 0.0;
  }

  double cost(const std::vector<Eigen::VectorXd>& q) const {
    double c = 0.0;
    double unused;
    for (std::size_t t = 0; t < T; ++t) {
      c += pose_error(ee_pose(chain, q[t]), targets[t]).squaredNorm();
      for (std::size_t j = 0; j < n; ++j) {
        const double b = barrier(j, q[t][static_cast<Eigen::Index>(j)], &unused);
        c += b * b;
      }
      if (t + 1 < T) c += opts.w_smooth * (q[t + 1] - q[t]).squaredNorm();
    }
    return c;
  }

  // Normal equations of the linearized residuals: diagonal blocks, the
  // constant off-diagonal coupling -w_smooth * I, and the gradient J^T r.
  void linearize(const std::vector<Eigen::VectorXd>& q, std::vector<Eigen::MatrixXd>& diag,
                 std::vector<Eigen::VectorXd>& grad) const {
    const auto N = static_cast<Eigen::Index>(n);
    diag.assign(T, Eigen::MatrixXd::Zero(N, N));
    grad.assign(T, Eigen::VectorXd::Zero(N));
    for (std::size_t t = 0; t < T; ++t) {
      const Rigid pose = ee_pose(chain, q[t]);
      const Vec6 r = pose_error(pose, targets[t]);
      Eigen::Matrix<double, 6, Eigen::Dynamic> jac = ee_jacobian(chain, q[t]);
      jac.bottomRows<3>() = so3_left_jacobian_inv(r.tail<3>()) * jac.bottomRows<3>();
      diag[t] += jac.transpose() * jac;
      grad[t] += jac.transpose() * r;
      for (std::size_t j = 0; j < n; ++j) {
        const auto k = static_cast<Eigen::Index>(j);
        double slope;
        const double b = barrier(j, q[t][k], &slope);
        diag[t](k, k) += slope * slope;
        grad[t][k] += slope * b;
      }
      if (t + 1 < T) {
        const Eigen::VectorXd d = q[t + 1] - q[t];
        diag[t].diagonal().array() += opts.w_smooth;
        diag[t + 1].diagonal().array() += opts.w_smooth;
        grad[t] -= opts.w_smooth * d;
        grad[t + 1] += opts.w_smooth * d;
      }
    }
  }
};

/// Solves the block-tridiagonal system with diagonal blocks `diag` and every
/// off-diagonal block equal to off * I. Returns false if a pivot block is not
/// positive definite.
bool solve_block_tridiagonal(const std::vector<Eigen::MatrixXd>& diag, double off, const std::vector<Eigen::VectorXd>& rhs,
                             std::vector<Eigen::VectorXd>& x) {
  const std::size_t T = diag.size();
  std::vector<Eigen::LLT<Eigen::MatrixXd>> piv(T);
  std::vector<Eigen::VectorXd> y(T);
  for (std::size_t t = 0; t < T; ++t) {
    Eigen::MatrixXd s = diag[t];
    y[t] = rhs[t];
    if (t > 0) {
      s -= off * off * piv[t - 1].solve(Eigen::MatrixXd::Identity(s.rows(), s.cols()));
      y[t] -= off * piv[t - 1].solve(y[t - 1]);
    }
    piv[t].compute(s);
    if (piv[t].info() != Eigen::Success) return false;
  }
  x.assign(T, Eigen::VectorXd());
  for (std::size_t t = T; t-- > 0;) {
    Eigen::VectorXd r = y[t];
    if (t + 1 < T) r -= off * x[t + 1];
    x[t] = piv[t].solve(r);
  }
  return true;
}

}  // namespace

LmResult lm_trajectory(const KinematicChain& chain, const std::vector<Rigid>& targets, const Eigen::VectorXd& q_init,
                       const LmOptions& opts) {
  opts.validate();
  chain.validate();
  check_dim(chain, q_init);
  if (targets.empty()) throw ValidationError("no end-effector targets");
  const Problem prob{chain, targets, opts, chain.dof(), targets.size()};

  std::vector<Eigen::VectorXd> q(targets.size(), q_init);
  LmResult res;
  double cost = prob.cost(q);
  res.cost_history.push_back(cost);
  std::vector<Eigen::MatrixXd> diag;
  std::vector<Eigen::VectorXd> grad, step;
  prob.linearize(q, diag, grad);
  double max_diag = 0.0;
  for (const auto& d : diag) max_diag = std::max(max_diag, d.diagonal().maxCoeff());
  double lambda = opts.initial_damping;
  const double floor = 1e-12 * std::max(max_diag, 1.0);

  auto stationary = [&] {
    double g = 0.0;
    for (const auto& v : grad) g = std::max(g, v.cwiseAbs().maxCoeff());
    return g <= 1e-14 || cost <= 1e-30;
  };
  res.converged = stationary();
  while (!res.converged && res.iterations < opts.max_iterations) {
    ++res.iterations;
    // Marquardt damping scaled by the diagonal, with a floor for joints the
    // residuals do not see.
    std::vector<Eigen::MatrixXd> damped = diag;
    for (auto& d : damped) d.diagonal() += lambda * d.diagonal().cwiseMax(floor);
    std::vector<Eigen::VectorXd> rhs(grad.size());
    for (std::size_t t = 0; t < grad.size(); ++t) rhs[t] = -grad[t];
    if (!solve_block_tridiagonal(damped, -opts.w_smooth, rhs, step)) {
      lambda *= 10.0;
      continue;
    }
    std::vector<Eigen::VectorXd> trial(q.size());
    for (std::size_t t = 0; t < q.size(); ++t) trial[t] = q[t] + step[t];
    const double trial_cost = prob.cost(trial);
    if (std::isfinite(trial_cost) && trial_cost < cost) {
      const double drop = cost - trial_cost;
      q = std::move(trial);
      cost = trial_cost;
      res.cost_history.push_back(cost);
      lambda = std::max(lambda / 10.0, 1e-15);
      prob.linearize(q, diag, grad);
      if (drop <= 1e-12 * cost || stationary()) res.converged = true;
    } else {
      lambda *= 10.0;
      // No damping makes progress: a local minimum to working precision.
      if (lambda > 1e12) res.converged = true;
    }
  }

  JointTrajectory& out = res.trajectory;
  out.q = q;
  res.within_limits = true;
  for (std::size_t t = 0; t < q.size(); ++t) {
    const Rigid pose = ee_pose(chain, q[t]);
    const Vec6 e = pose_error(pose, targets[t]);
    out.achieved.push_back(pose);
    out.translation_deviation.push_back(e.head<3>().norm());
    out.rotation_deviation.push_back(e.tail<3>().norm());
    out.max_translation_deviation = std::max(out.max_translation_deviation, out.translation_deviation.back());
    out.max_rotation_deviation = std::max(out.max_rotation_deviation, out.rotation_deviation.back());
    res.within_limits = res.within_limits && within_limits(chain, q[t]);
  }
  std::ostringstream why;
  if (!res.converged) {
    why << "did not converge in " << opts.max_iterations << " iterations; ";
  }
  if (out.max_translation_deviation > opts.max_translation || out.max_rotation_deviation > opts.max_rotation) {
    why << "deviation " << out.max_translation_deviation << " m / " << out.max_rotation_deviation * 180.0 / kPi
        << " deg exceeds " << opts.max_translation << " m / " << opts.max_rotation * 180.0 / kPi << " deg; ";
  }
  if (!res.within_limits) why << "joint limits violated; ";
  res.reason = why.str();
  if (!res.reason.empty()) res.reason.resize(res.reason.size() - 2);
  res.accepted = res.reason.empty();
  return res;
}

KinematicChain synthetic_arm(const std::string& name, const Rigid& base) {
  KinematicChain c;
  c.name = name;
  c.base = base;
  const double z_lim = 2.9;
  auto joint = [](const Vec3& axis, double up, double lo, double hi) {
    Joint j;
    j.axis = axis;
    j.origin.translation = Vec3(0, 0, up);
    j.lo = lo;
    j.hi = hi;
    return j;
  };
  c.joints = {joint(Vec3::UnitZ(), 0.30, -z_lim, z_lim), joint(Vec3::UnitY(), 0.0, -1.76, 1.76),
              joint(Vec3::UnitZ(), 0.35, -z_lim, z_lim), joint(Vec3::UnitY(), 0.0, 0.07, 3.0),
              joint(Vec3::UnitZ(), 0.35, -z_lim, z_lim), joint(Vec3::UnitY(), 0.0, -1.0, 3.75),
              joint(Vec3::UnitZ(), 0.08, -z_lim, z_lim)};
  c.ee_offset.translation = Vec3(0, 0, 0.10);
  c.spheres = {{0, Vec3(0, 0, 0.15), 0.07}, {2, Vec3(0, 0, 0.175), 0.05}, {3, Vec3(0, 0, 0.0), 0.05},
               {4, Vec3(0, 0, 0.175), 0.045}, {5, Vec3(0, 0, 0.0), 0.04},  {7, Vec3(0, 0, 0.04), 0.03}};
  // Elbow up, tool pointing straight down about 0.4 m in front of the base.
  c.home = (Eigen::VectorXd(7) << 0.0, 0.3, 0.0, 1.8, 0.0, kPi - 2.1, 0.0).finished();
  return c;
}

RobotConfig default_robot() {
  RobotConfig r;
  // Bases on either side of the workspace, each arm's x axis facing the origin.
  Rigid left, right;
  left.rotation = Eigen::AngleAxisd(-kPi / 2, Vec3::UnitZ()).toRotationMatrix();
  left.translation = Vec3(0, 0.45, 0);
  right.rotation = Eigen::AngleAxisd(kPi / 2, Vec3::UnitZ()).toRotationMatrix();
  right.translation = Vec3(0, -0.45, 0);
  r.arms = {synthetic_arm("left", left), synthetic_arm("right", right)};
  return r;
}

namespace {

Json vec_json(const Eigen::VectorXd& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Eigen::VectorXd vec_from_json(const Json& j) {
  if (!j.is_array()) throw FormatError("expected an array of numbers");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return v;
}

}  // namespace

Json to_json(const KinematicChain& c) {
  Json joints = Json::array();
  for (const auto& j : c.joints)
    joints.push_back({{"type", j.type == JointType::revolute ? "revolute" : "prismatic"},
                      {"axis", to_json(j.axis)},
                      {"origin", to_json(j.origin)},
                      {"limits", {j.lo, j.hi}}});
  Json spheres = Json::array();
  for (const auto& s : c.spheres)
    spheres.push_back({{"link", s.link}, {"center", to_json(s.center)}, {"radius", s.radius}});
  Json out = {{"name", c.name},         {"base", to_json(c.base)}, {"joints", joints},
              {"ee_offset", to_json(c.ee_offset)}, {"spheres", spheres}};
  if (c.home.size() != 0) out["home"] = vec_json(c.home);
  return out;
}

KinematicChain chain_from_json(const Json& j) {
  try {
    KinematicChain c;
    c.name = j.value("name", std::string("arm"));
    if (j.contains("base")) c.base = rigid_from_json(j.at("base"));
    for (const auto& jj : require(j, "joints")) {
      Joint joint;
      const std::string type = require(jj, "type").get<std::string>();
      if (type == "revolute") joint.type = JointType::revolute;
      else if (type == "prismatic") joint.type = JointType::prismatic;
      else throw FormatError("unknown joint type '" + type + "'");
      joint.axis = vec3_from_json(require(jj, "axis"));
      if (jj.contains("origin")) joint.origin = rigid_from_json(jj.at("origin"));
      const Json& lim = require(jj, "limits");
      if (!lim.is_array() || lim.size() != 2) throw FormatError("field 'limits' must be [lo, hi]");
      joint.lo = lim[0].get<double>();
      joint.hi = lim[1].get<double>();
      c.joints.push_back(joint);
    }
    if (j.contains("ee_offset")) c.ee_offset = rigid_from_json(j.at("ee_offset"));
    if (j.contains("spheres"))
      for (const auto& s : j.at("spheres"))
        c.spheres.push_back(
            {require(s, "link").get<std::size_t>(), vec3_from_json(require(s, "center")), require(s, "radius").get<double>()});
    if (j.contains("home")) c.home = vec_from_json(j.at("home"));
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("kinematic chain: ") + e.what());
  }
}

Json to_json(const RobotConfig& r) {
  Json arms = Json::array();
  for (const auto& a : r.arms) arms.push_back(to_json(a));
  Json obstacles = Json::array();
  for (const auto& o : r.world.obstacles) obstacles.push_back({{"center", to_json(o.center)}, {"radius", o.radius}});
  return {{"arms", arms},
          {"world", {{"table_height", r.world.table_height}, {"margin", r.world.margin}, {"obstacles", obstacles}}}};
}

RobotConfig robot_config_from_json(const Json& j) {
  try {
    RobotConfig r;
    for (const auto& a : require(j, "arms")) r.arms.push_back(chain_from_json(a));
    if (r.arms.empty()) throw FormatError("robot config has no arms");
    if (j.contains("world")) {
      const Json& w = j.at("world");
      r.world.table_height = w.value("table_height", 0.0);
      r.world.margin = w.value("margin", 0.0);
      if (w.contains("obstacles"))
        for (const auto& o : w.at("obstacles"))
          r.world.obstacles.push_back({vec3_from_json(require(o, "center")), require(o, "radius").get<double>()});
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("robot config: ") + e.what());
  }
}

Json to_json(const JointTrajectory& t) {
  Json q = Json::array(), poses = Json::array();
  for (const auto& v : t.q) q.push_back(vec_json(v));
  for (const auto& p : t.achieved) poses.push_back(to_json(p));
  return {{"q", q},
          {"achieved", poses},
          {"translation_deviation", t.translation_deviation},
          {"rotation_deviation", t.rotation_deviation},
          {"max_translation_deviation", t.max_translation_deviation},
          {"max_rotation_deviation", t.max_rotation_deviation}};
}

}  // namespace artic
