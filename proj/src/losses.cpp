#include <artic/losses.hpp>

#include <artic/errors.hpp>

#include <unsupported/Eigen/AutoDiff>

#include <cmath>
#include <random>
#include <string>

namespace artic {

void LossWeights::validate() const {
  if (dino < 0 || mono < 0 || arap < 0 || temporal < 0) throw ValidationError("loss weights must be non-negative");
}

void add_scaled(PoseGradients& into, const PoseGradients& g, double scale) {
  if (into.empty()) into.resize(g.size());
  if (into.size() != g.size()) throw ValidationError("pose gradient part count mismatch");
  for (std::size_t p = 0; p < g.size(); ++p) {
    into[p].q += scale * g[p].q;
    into[p].t += scale * g[p].t;
    into[p].rotation += scale * g[p].rotation;
  }
}

ImageLoss feature_mse(const Image& rendered, const Image& observed, const Mask& keep) {
  if (!rendered.same_shape(observed))
    throw ValidationError("feature map shapes differ: rendered " + std::to_string(rendered.height) + "x" +
                          std::to_string(rendered.width) + "x" + std::to_string(rendered.channels) + ", observed " +
                          std::to_string(observed.height) + "x" + std::to_string(observed.width) + "x" +
                          std::to_string(observed.channels));
  const bool masked = !keep.data.empty();
  if (masked && (keep.height != rendered.height || keep.width != rendered.width))
    throw ValidationError("clip mask shape differs from feature map");
  ImageLoss out;
  out.grad = Image(rendered.height, rendered.width, rendered.channels);
  std::size_t used = 0;
  for (std::size_t px = 0; px < rendered.pixels(); ++px) used += !masked || keep.data[px];
  if (used == 0) return out;
  const int ch = rendered.channels;
  const double norm = 1.0 / (static_cast<double>(used) * ch);
  double sum = 0.0;
  for (std::size_t px = 0; px < rendered.pixels(); ++px) {
    if (masked && !keep.data[px]) continue;
    const double* r = rendered.pixel(px);
    const double* o = observed.pixel(px);
    double* g = out.grad.pixel(px);
    for (int c = 0; c < ch; ++c) {
      const double d = r[c] - o[c];
      sum += d * d;
      g[c] = 2.0 * d * norm;
    }
  }
  out.value = sum * norm;
  return out;
}

ImageLoss depth_ranking_loss(const Image& rendered, const Image& mono, const Mask& mask, std::size_t n_pairs,
                             double margin, std::uint64_t seed) {
  if (!rendered.same_shape(mono) || rendered.channels != 1)
    throw ValidationError("rendered and mono depth maps must be matching single-channel images");
  if (mask.height != rendered.height || mask.width != rendered.width)
    throw ValidationError("depth mask shape differs from depth map");
  ImageLoss out;
  out.grad = Image(rendered.height, rendered.width, 1);
  std::vector<std::uint32_t> pixels;
  for (std::size_t px = 0; px < mask.data.size(); ++px)
    if (mask.data[px]) pixels.push_back(static_cast<std::uint32_t>(px));
  if (pixels.size() < 2 || n_pairs == 0) return out;

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> first(0, pixels.size() - 1), offset(1, pixels.size() - 1);
  const double inv = 1.0 / static_cast<double>(n_pairs);
  double sum = 0.0;
  for (std::size_t k = 0; k < n_pairs; ++k) {
    const std::size_t ia = first(rng);
    const std::size_t ib = (ia + offset(rng)) % pixels.size();
    std::uint32_t a = pixels[ia], b = pixels[ib];
    if (mono.data[a] == mono.data[b]) continue;
    if (mono.data[a] > mono.data[b]) std::swap(a, b);
    const double v = rendered.data[a] - rendered.data[b] + margin;
    if (v <= 0.0) continue;
    sum += v;
    out.grad.data[a] += inv;
    out.grad.data[b] -= inv;
  }
  out.value = sum * inv;
  return out;
}

RhoValue barron_rho(double x, double alpha, double c) {
  if (!(c > 0)) throw ValidationError("robust kernel scale c must be positive");
  const double z = x / c;
  const double z2 = z * z;
  RhoValue r;
  if (std::abs(alpha - 2.0) < 1e-9) {
    r.value = 0.5 * z2;
    r.derivative = x / (c * c);
  } else if (std::abs(alpha) < 1e-9) {
    r.value = std::log1p(0.5 * z2);
    r.derivative = 2.0 * x / (x * x + 2.0 * c * c);
  } else {
    const double b = std::abs(alpha - 2.0);
    const double base = z2 / b + 1.0;
    r.value = (b / alpha) * (std::pow(base, 0.5 * alpha) - 1.0);
    r.derivative = (x / (c * c)) * std::pow(base, 0.5 * alpha - 1.0);
  }
  return r;
}

PoseLoss arap_loss(const GaussianScene& scene, const BoundaryPairSet& pairs, const PartPoseSet& poses, double alpha,
                   double c) {
  if (poses.size() != scene.num_parts()) throw ValidationError("pose set does not cover every part");
  PoseLoss out;
  out.grad.resize(scene.num_parts());
  if (pairs.empty()) return out;
  std::vector<Mat3> rot(poses.size());
  for (std::size_t p = 0; p < poses.size(); ++p) rot[p] = quat_to_matrix<double>(poses[p].q.normalized());
  const auto& gs = scene.gaussians();
  auto posed = [&](std::size_t i) {
    const std::size_t p = scene.part_of(i);
    return Vec3(gs[i].center + (rot[p] - Mat3::Identity()) * (gs[i].center - scene.part_centroid(p)) + poses[p].t);
  };
  for (const auto& pr : pairs) {
    const Vec3 diff = posed(pr.i) - posed(pr.j);
    const double d = diff.norm();
    // Changes below the float32 resolution of stored centers are rounding, not motion.
    if (std::abs(pr.d_init - d) <= kArapDistanceTolerance) continue;
    const RhoValue rho = barron_rho(pr.d_init - d, alpha, c);
    out.value += rho.value;
    if (d <= 0.0) continue;
    // d rho / d x_i = rho' * (-1) * diff / d
    const Vec3 gi = -rho.derivative * diff / d;
    for (const auto& [idx, g] : {std::pair{pr.i, gi}, std::pair{pr.j, Vec3(-gi)}}) {
      const std::size_t p = scene.part_of(idx);
      out.grad[p].t += g;
      out.grad[p].rotation += g * (gs[idx].center - scene.part_centroid(p)).transpose();
    }
  }
  for (std::size_t p = 0; p < poses.size(); ++p)
    out.grad[p].q = normalize_vjp(poses[p].q, quat_matrix_vjp(poses[p].q.normalized(), out.grad[p].rotation));
  return out;
}

namespace {

using Jet = Eigen::AutoDiffScalar<Eigen::Matrix<double, 21, 1>>;
using JVec3 = Eigen::Matrix<Jet, 3, 1>;
using JVec4 = Eigen::Matrix<Jet, 4, 1>;

struct JetPose {
  JVec4 q;  // unit
  JVec3 p;  // world translation of the rigid transform
};

JetPose jet_pose(const PartPose& pose, const Vec3& centroid, int slot) {
  JVec4 q;
  JVec3 t;
  for (int k = 0; k < 4; ++k) q[k] = Jet(pose.q[k], 21, 7 * slot + k);
  for (int k = 0; k < 3; ++k) t[k] = Jet(pose.t[k], 21, 7 * slot + 4 + k);
  using std::sqrt;
  const Jet n = sqrt(q.squaredNorm());
  q /= n;
  const JVec3 c = centroid.cast<Jet>();
  return {q, JVec3(c + t - quat_to_matrix<Jet>(q) * c)};
}

Eigen::Matrix<Jet, 6, 1> relative_log(const JetPose& a, const JetPose& b) {
  JVec4 qa_conj = a.q;
  qa_conj.tail<3>() *= Jet(-1.0);
  JVec4 qr;
  const JVec4& qb = b.q;
  qr[0] = qa_conj[0] * qb[0] - qa_conj[1] * qb[1] - qa_conj[2] * qb[2] - qa_conj[3] * qb[3];
  qr[1] = qa_conj[0] * qb[1] + qa_conj[1] * qb[0] + qa_conj[2] * qb[3] - qa_conj[3] * qb[2];
  qr[2] = qa_conj[0] * qb[2] - qa_conj[1] * qb[3] + qa_conj[2] * qb[0] + qa_conj[3] * qb[1];
  qr[3] = qa_conj[0] * qb[3] + qa_conj[1] * qb[2] - qa_conj[2] * qb[1] + qa_conj[3] * qb[0];
  const JVec3 rel_t = quat_to_matrix<Jet>(a.q).transpose() * (b.p - a.p);
  return se3_log<Jet>(qr, rel_t);
}

}  // namespace

TrajectoryLoss temporal_laplacian(const GaussianScene& scene, const Trajectory& traj) {
  TrajectoryLoss out;
  out.grad.assign(traj.size(), PoseGradients(scene.num_parts()));
  if (traj.size() < 3) return out;
  for (const auto& f : traj.frames)
    if (f.size() != scene.num_parts()) throw ValidationError("trajectory frame does not cover every part");
  for (std::size_t p = 0; p < scene.num_parts(); ++p) {
    const Vec3& c = scene.part_centroid(p);
    for (std::size_t t = 1; t + 1 < traj.size(); ++t) {
      const JetPose prev = jet_pose(traj.frames[t - 1][p], c, 0);
      const JetPose cur = jet_pose(traj.frames[t][p], c, 1);
      const JetPose next = jet_pose(traj.frames[t + 1][p], c, 2);
      const Eigen::Matrix<Jet, 6, 1> diff = relative_log(cur, next) - relative_log(prev, cur);
      const Jet term = diff.squaredNorm();
      out.value += term.value();
      const auto& d = term.derivatives();
      for (int s = 0; s < 3; ++s) {
        PartGradient& g = out.grad[t - 1 + static_cast<std::size_t>(s)][p];
        g.q += d.segment<4>(7 * s);
        g.t += d.segment<3>(7 * s + 4);
      }
    }
  }
  return out;
}

WeightedLoss total_tracking_loss(const LossTerms& terms, const LossWeights& w) {
  WeightedLoss out;
  out.value = w.dino * terms.feature.value + w.mono * terms.depth.value + w.arap * terms.arap.value;
  out.feature_grad = terms.feature.grad;
  for (double& v : out.feature_grad.data) v *= w.dino;
  out.depth_grad = terms.depth.grad;
  for (double& v : out.depth_grad.data) v *= w.mono;
  out.arap_grad.resize(terms.arap.grad.size());
  add_scaled(out.arap_grad, terms.arap.grad, w.arap);
  return out;
}

}  // namespace artic
