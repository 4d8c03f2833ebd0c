#include <artic/grasp.hpp>

#include <artic/errors.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <tuple>

namespace artic {

namespace {

constexpr double kPi = 3.14159265358979323846;

double extent(const std::vector<Vec3>& pts) {
  Vec3 lo = pts.front(), hi = pts.front();
  for (const auto& p : pts) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  return (hi - lo).norm();
}

[[noreturn]] void too_thin() { throw PipelineError("part too thin to mesh"); }

struct HullFace {
  std::array<int, 3> v;
  Vec3 n;
  double d;  // plane: n.x = d
  bool alive = true;
};

HullFace make_face(const std::vector<Vec3>& pts, int a, int b, int c) {
  HullFace f;
  f.v = {a, b, c};
  f.n = (pts[static_cast<std::size_t>(b)] - pts[static_cast<std::size_t>(a)])
            .cross(pts[static_cast<std::size_t>(c)] - pts[static_cast<std::size_t>(a)]);
  const double len = f.n.norm();
  if (len > 0) f.n /= len;
  f.d = f.n.dot(pts[static_cast<std::size_t>(a)]);
  return f;
}

}  // namespace

Vec3 TriMesh::face_normal(std::size_t f) const {
  const auto& t = faces[f];
  const Vec3 n = (vertices[static_cast<std::size_t>(t[1])] - vertices[static_cast<std::size_t>(t[0])])
                     .cross(vertices[static_cast<std::size_t>(t[2])] - vertices[static_cast<std::size_t>(t[0])]);
  const double len = n.norm();
  return len > 0 ? Vec3(n / len) : Vec3::Zero();
}

double TriMesh::face_area(std::size_t f) const {
  const auto& t = faces[f];
  return 0.5 * (vertices[static_cast<std::size_t>(t[1])] - vertices[static_cast<std::size_t>(t[0])])
                   .cross(vertices[static_cast<std::size_t>(t[2])] - vertices[static_cast<std::size_t>(t[0])])
                   .norm();
}

double TriMesh::area() const {
  double a = 0.0;
  for (std::size_t f = 0; f < faces.size(); ++f) a += face_area(f);
  return a;
}

TriMesh convex_hull(const std::vector<Vec3>& pts) {
  if (pts.size() < 4) too_thin();
  const double scale = extent(pts);
  if (!(scale > 0) || !std::isfinite(scale)) too_thin();
  const double eps = 1e-9 * scale;

  // Initial tetrahedron from extreme points.
  int i0 = 0;
  for (std::size_t i = 1; i < pts.size(); ++i)
    if (pts[i].x() < pts[static_cast<std::size_t>(i0)].x()) i0 = static_cast<int>(i);
  auto farthest = [&](auto&& dist) {
    int best = -1;
    double bd = -1.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const double d = dist(pts[i]);
      if (d > bd) {
        bd = d;
        best = static_cast<int>(i);
      }
    }
    return std::make_pair(best, bd);
  };
  const Vec3 a = pts[static_cast<std::size_t>(i0)];
  auto [i1, d1] = farthest([&](const Vec3& p) { return (p - a).norm(); });
  const Vec3 b = pts[static_cast<std::size_t>(i1)];
  const Vec3 ab = (b - a).normalized();
  auto [i2, d2] = farthest([&](const Vec3& p) { return ((p - a) - (p - a).dot(ab) * ab).norm(); });
  const Vec3 c = pts[static_cast<std::size_t>(i2)];
  const Vec3 nrm = (b - a).cross(c - a).normalized();
  auto [i3, d3] = farthest([&](const Vec3& p) { return std::abs((p - a).dot(nrm)); });
  // A part thinner than a thousandth of its extent has no usable volume.
  if (d1 < 1e-6 || d2 < 1e-3 * scale || d3 < 1e-3 * scale) too_thin();

  std::vector<HullFace> faces;
  const Vec3 inside = 0.25 * (a + b + c + pts[static_cast<std::size_t>(i3)]);
  auto add = [&](int x, int y, int z) {
    HullFace f = make_face(pts, x, y, z);
    if (f.n.dot(inside) > f.d) f = make_face(pts, x, z, y);
    faces.push_back(f);
  };
  add(i0, i1, i2);
  add(i0, i1, i3);
  add(i0, i2, i3);
  add(i1, i2, i3);

  for (std::size_t pi = 0; pi < pts.size(); ++pi) {
    const int p = static_cast<int>(pi);
    if (p == i0 || p == i1 || p == i2 || p == i3) continue;
    std::vector<std::size_t> visible;
    for (std::size_t f = 0; f < faces.size(); ++f)
      if (faces[f].alive && faces[f].n.dot(pts[pi]) - faces[f].d > eps) visible.push_back(f);
    if (visible.empty()) continue;
    // Horizon: directed edges of visible faces whose reverse is not visible.
    std::set<std::pair<int, int>> edges;
    for (std::size_t f : visible)
      for (int k = 0; k < 3; ++k) edges.insert({faces[f].v[static_cast<std::size_t>(k)], faces[f].v[static_cast<std::size_t>((k + 1) % 3)]});
    for (std::size_t f : visible) faces[f].alive = false;
    for (const auto& [u, w] : edges)
      if (!edges.count({w, u})) faces.push_back(make_face(pts, u, w, p));
  }

  TriMesh mesh;
  std::map<int, int> remap;
  for (const auto& f : faces) {
    if (!f.alive) continue;
    std::array<int, 3> t{};
    for (std::size_t k = 0; k < 3; ++k) {
      auto [it, fresh] = remap.try_emplace(f.v[k], static_cast<int>(mesh.vertices.size()));
      if (fresh) mesh.vertices.push_back(pts[static_cast<std::size_t>(f.v[k])]);
      t[k] = it->second;
    }
    mesh.faces.push_back(t);
  }
  return mesh;
}

namespace {

void compute_normals(TriMesh& m) {
  m.normals.assign(m.vertices.size(), Vec3::Zero());
  for (std::size_t f = 0; f < m.faces.size(); ++f) {
    const Vec3 n = m.face_normal(f) * m.face_area(f);
    for (int v : m.faces[f]) m.normals[static_cast<std::size_t>(v)] += n;
  }
  for (auto& n : m.normals) {
    const double len = n.norm();
    if (len > 0) n /= len;
  }
}

void taubin(TriMesh& m, const MeshOptions& opts) {
  std::vector<std::set<int>> nbrs(m.vertices.size());
  for (const auto& t : m.faces)
    for (std::size_t k = 0; k < 3; ++k) {
      nbrs[static_cast<std::size_t>(t[k])].insert(t[(k + 1) % 3]);
      nbrs[static_cast<std::size_t>(t[(k + 1) % 3])].insert(t[k]);
    }
  auto pass = [&](double w) {
    std::vector<Vec3> next = m.vertices;
    for (std::size_t v = 0; v < m.vertices.size(); ++v) {
      if (nbrs[v].empty()) continue;
      Vec3 mean = Vec3::Zero();
      for (int u : nbrs[v]) mean += m.vertices[static_cast<std::size_t>(u)];
      mean /= static_cast<double>(nbrs[v].size());
      next[v] += w * (mean - m.vertices[v]);
    }
    m.vertices = std::move(next);
  };
  for (int i = 0; i < opts.smooth_iterations; ++i) {
    pass(opts.taubin_lambda);
    pass(opts.taubin_mu);
  }
}

}  // namespace

TriMesh part_mesh(const std::vector<Vec3>& centers, const MeshOptions& opts) {
  if (opts.face_budget < 4) throw ValidationError("face budget must be at least 4");
  if (opts.smooth_iterations < 0) throw ValidationError("smoothing iterations must be non-negative");
  TriMesh mesh = convex_hull(centers);
  // Decimate by clustering hull vertices on a coarsening grid and re-hulling.
  const double scale = extent(mesh.vertices);
  double cell = scale / 40.0;
  while (mesh.faces.size() > opts.face_budget) {
    std::map<std::tuple<long, long, long>, std::size_t> slot;
    std::vector<Vec3> sums;
    std::vector<int> counts;
    for (const auto& v : mesh.vertices) {
      const auto key = std::make_tuple(static_cast<long>(std::floor(v.x() / cell)), static_cast<long>(std::floor(v.y() / cell)),
                                       static_cast<long>(std::floor(v.z() / cell)));
      auto [it, fresh] = slot.try_emplace(key, sums.size());
      if (fresh) {
        sums.push_back(Vec3::Zero());
        counts.push_back(0);
      }
      sums[it->second] += v;
      ++counts[it->second];
    }
    std::vector<Vec3> reps;
    for (std::size_t k = 0; k < sums.size(); ++k) reps.push_back(sums[k] / counts[k]);
    mesh = convex_hull(reps);
    cell *= 1.25;
  }
  taubin(mesh, opts);
  compute_normals(mesh);
  return mesh;
}

void AntipodalOptions::validate() const {
  if (n_axes < 1) throw ValidationError("n_axes must be at least 1");
  if (!(mu > 0)) throw ValidationError("friction coefficient must be positive");
  if (!(max_width > 0)) throw ValidationError("max gripper width must be positive");
  if (max_attempts < 1) throw ValidationError("attempt budget must be at least 1");
}

bool antipodal_ok(const GraspAxis& axis, double mu, double max_width) {
  const Vec3 d = axis.p2 - axis.p1;
  const double w = d.norm();
  if (!(w > 0) || w > max_width) return false;
  const Vec3 v = d / w;
  const double cone = std::atan(mu);
  const double a1 = std::acos(std::clamp(v.dot(-axis.n1), -1.0, 1.0));
  const double a2 = std::acos(std::clamp(v.dot(axis.n2), -1.0, 1.0));
  return a1 <= cone && a2 <= cone;
}

namespace {

/// Nearest ray hit (Moller-Trumbore) excluding one face.
bool cast(const TriMesh& m, const Vec3& o, const Vec3& dir, std::size_t skip, double tmin, Vec3& hit, std::size_t& face) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t f = 0; f < m.faces.size(); ++f) {
    if (f == skip) continue;
    const Vec3& v0 = m.vertices[static_cast<std::size_t>(m.faces[f][0])];
    const Vec3 e1 = m.vertices[static_cast<std::size_t>(m.faces[f][1])] - v0;
    const Vec3 e2 = m.vertices[static_cast<std::size_t>(m.faces[f][2])] - v0;
    const Vec3 p = dir.cross(e2);
    const double det = e1.dot(p);
    if (std::abs(det) < 1e-18) continue;
    const double inv = 1.0 / det;
    const Vec3 s = o - v0;
    const double u = s.dot(p) * inv;
    if (u < 0.0 || u > 1.0) continue;
    const Vec3 q = s.cross(e1);
    const double v = dir.dot(q) * inv;
    if (v < 0.0 || u + v > 1.0) continue;
    const double t = e2.dot(q) * inv;
    if (t > tmin && t < best) {
      best = t;
      face = f;
    }
  }
  if (!std::isfinite(best)) return false;
  hit = o + best * dir;
  return true;
}

}  // namespace

std::vector<GraspAxis> sample_antipodal(const TriMesh& mesh, const AntipodalOptions& opts, std::size_t part) {
  opts.validate();
  if (mesh.faces.empty()) throw ValidationError("cannot sample grasps on an empty mesh");
  std::vector<double> areas(mesh.faces.size());
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) areas[f] = mesh.face_area(f);
  std::discrete_distribution<std::size_t> pick(areas.begin(), areas.end());
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::mt19937_64 rng(opts.seed);
  const double cos_max = std::cos(std::atan(opts.mu));
  const double tmin = 1e-9 * extent(mesh.vertices);

  std::vector<GraspAxis> out;
  for (int attempt = 0; attempt < opts.max_attempts && static_cast<int>(out.size()) < opts.n_axes; ++attempt) {
    const std::size_t f = pick(rng);
    double a = u(rng), b = u(rng);
    if (a + b > 1.0) {
      a = 1.0 - a;
      b = 1.0 - b;
    }
    const Vec3& v0 = mesh.vertices[static_cast<std::size_t>(mesh.faces[f][0])];
    const Vec3 p1 = v0 + a * (mesh.vertices[static_cast<std::size_t>(mesh.faces[f][1])] - v0) +
                    b * (mesh.vertices[static_cast<std::size_t>(mesh.faces[f][2])] - v0);
    const Vec3 n1 = mesh.face_normal(f);
    // Direction uniform in the friction cone about the inward normal.
    const double ct = 1.0 - u(rng) * (1.0 - cos_max);
    const double st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
    const double phi = 2.0 * kPi * u(rng);
    const Vec3 w = -n1;
    const Vec3 e1 = w.unitOrthogonal();
    const Vec3 e2 = w.cross(e1);
    const Vec3 dir = ct * w + st * (std::cos(phi) * e1 + std::sin(phi) * e2);
    Vec3 p2;
    std::size_t f2 = 0;
    if (!cast(mesh, p1, dir, f, tmin, p2, f2)) continue;
    const GraspAxis g{p1, p2, n1, mesh.face_normal(f2)};
    if (antipodal_ok(g, opts.mu, opts.max_width)) out.push_back(g);
  }
  if (out.empty()) throw PipelineError("part " + std::to_string(part) + " ungraspable");
  return out;
}

Rigid grasp_frame(const GraspAxis& axis) {
  const Vec3 x = (axis.p2 - axis.p1).normalized();
  Vec3 approach = -Vec3::UnitZ();
  if (std::abs(x.z()) > 0.95) approach = std::abs(x.x()) < 0.9 ? Vec3(-Vec3::UnitX()) : Vec3(-Vec3::UnitY());
  const Vec3 z = (approach - approach.dot(x) * x).normalized();
  Rigid r;
  r.rotation.col(0) = x;
  r.rotation.col(1) = z.cross(x);
  r.rotation.col(2) = z;
  r.translation = 0.5 * (axis.p1 + axis.p2);
  return r;
}

std::vector<GraspCandidate> augment_grasps(std::size_t part, const std::vector<GraspAxis>& axes) {
  if (axes.empty()) throw ValidationError("no grasp axes to augment");
  std::vector<GraspCandidate> out;
  out.reserve(axes.size() * kGraspRotations * 3);
  for (const auto& axis : axes) {
    const Rigid base = grasp_frame(axis);
    const Vec3 x = base.rotation.col(0);
    for (int k = 0; k < kGraspRotations; ++k) {
      const Mat3 spin = Eigen::AngleAxisd(2.0 * kPi * k / kGraspRotations, x).toRotationMatrix();
      for (int s = -1; s <= 1; ++s) {
        GraspCandidate g;
        g.part = part;
        g.pose.rotation = spin * base.rotation;
        g.pose.translation = base.translation + (s * kGraspShift) * x;
        g.width = axis.width();
        out.push_back(g);
      }
    }
  }
  return out;
}

Json to_json(const GraspCandidate& g) { return {{"part", g.part}, {"pose", to_json(g.pose)}, {"width", g.width}}; }

GraspCandidate grasp_from_json(const Json& j) {
  try {
    GraspCandidate g;
    g.part = require(j, "part").get<std::size_t>();
    g.pose = rigid_from_json(require(j, "pose"));
    g.width = require(j, "width").get<double>();
    if (!(g.width > 0)) throw FormatError("grasp width must be positive");
    return g;
  } catch (const Json::exception& e) {
    throw FormatError(std::string("grasp: ") + e.what());
  }
}

Json to_json(const GraspAxis& a) {
  return {{"p1", to_json(a.p1)}, {"p2", to_json(a.p2)}, {"n1", to_json(a.n1)}, {"n2", to_json(a.n2)}, {"width", a.width()}};
}

}  // namespace artic
