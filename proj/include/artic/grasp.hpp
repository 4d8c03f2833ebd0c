#pragma once

// Part meshes and parallel-jaw grasp synthesis in the part frame.

#include <artic/geometry.hpp>
#include <artic/io.hpp>

#include <array>
#include <cstdint>
#include <vector>

namespace artic {

struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> faces;  // counter-clockwise seen from outside
  std::vector<Vec3> normals;              // per vertex, outward, unit

  Vec3 face_normal(std::size_t f) const;
  double face_area(std::size_t f) const;
  double area() const;
};

struct MeshOptions {
  std::size_t face_budget = 400;
  int smooth_iterations = 3;  // Taubin passes
  double taubin_lambda = 0.5;
  double taubin_mu = -0.53;
};

/// Surface of a part's gaussian centers: the alpha shape at alpha = infinity
/// (convex hull), decimated by vertex clustering to the face budget, then
/// Taubin-smoothed. Throws PipelineError "part too thin to mesh" on fewer
/// than 4 points or (near-)coplanar input.
TriMesh part_mesh(const std::vector<Vec3>& centers, const MeshOptions& opts = {});

/// Convex hull with outward faces; coplanar points within a relative
/// tolerance are dropped.
TriMesh convex_hull(const std::vector<Vec3>& points);

struct GraspAxis {
  Vec3 p1, p2;  // contacts; the jaws close along p2 - p1
  Vec3 n1, n2;  // outward surface normals at the contacts
  double width() const { return (p2 - p1).norm(); }
};

struct AntipodalOptions {
  int n_axes = 20;
  double mu = 0.5;
  double max_width = 0.05;  // meters
  int max_attempts = 20000;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Both contact normals within the friction cone of the closing axis, and
/// 0 < width <= max_width.
bool antipodal_ok(const GraspAxis& axis, double mu, double max_width);

/// Rejection-samples contact pairs by casting rays from random surface
/// points into the friction cone around the inward normal. Returns up to
/// n_axes axes; throws PipelineError "part N ungraspable" if none is found.
std::vector<GraspAxis> sample_antipodal(const TriMesh& mesh, const AntipodalOptions& opts, std::size_t part = 0);

struct GraspCandidate {
  std::size_t part = 0;
  Rigid pose;  // in the part's scan-configuration frame: x closes, z approaches
  double width = 0.0;
};

inline constexpr int kGraspRotations = 8;
inline constexpr double kGraspShift = 0.005;  // meters, along the closing axis

/// Grasp frame at the axis midpoint with x along the closing axis and z the
/// top-down approach made orthogonal to x.
Rigid grasp_frame(const GraspAxis& axis);

/// 8 rotations about the closing axis x 3 shifts along it = 24 per axis.
std::vector<GraspCandidate> augment_grasps(std::size_t part, const std::vector<GraspAxis>& axes);

Json to_json(const GraspCandidate& g);
GraspCandidate grasp_from_json(const Json& j);
Json to_json(const GraspAxis& a);

}  // namespace artic
