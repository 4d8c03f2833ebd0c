#pragma once

#include <artic/geometry.hpp>

#include <Eigen/Core>

#include <cstddef>
#include <filesystem>
#include <vector>

namespace artic {

struct Gaussian {
  Vec3 center = Vec3::Zero();
  Vec4 rotation = quat_identity();  // (w, x, y, z)
  Vec3 scale = Vec3::Constant(0.005);
  double opacity = 1.0;
  Vec3 color = Vec3::Constant(0.5);
  Eigen::VectorXd feature;
};

/// Part-segmented gaussian object. Immutable once validated; centroids are
/// computed on validation and stay fixed for the lifetime of the scene.
class GaussianScene {
 public:
  GaussianScene() = default;
  GaussianScene(std::vector<Gaussian> gaussians, std::vector<std::vector<std::size_t>> parts,
                std::size_t feature_dim, Vec3 gravity_axis = Vec3::UnitZ());

  const std::vector<Gaussian>& gaussians() const { return gaussians_; }
  const std::vector<std::vector<std::size_t>>& parts() const { return parts_; }
  std::size_t feature_dim() const { return feature_dim_; }
  const Vec3& gravity_axis() const { return gravity_axis_; }
  std::size_t num_parts() const { return parts_.size(); }
  std::size_t size() const { return gaussians_.size(); }

  const Vec3& part_centroid(std::size_t p) const { return centroids_[p]; }
  const std::vector<Vec3>& part_centroids() const { return centroids_; }
  /// Owning part of gaussian i.
  std::size_t part_of(std::size_t i) const { return part_of_[i]; }
  /// Mean of all gaussian centers.
  Vec3 object_centroid() const;
  /// Length of the axis-aligned bounding-box diagonal of the centers.
  double bbox_diagonal() const;

 private:
  void validate();

  std::vector<Gaussian> gaussians_;
  std::vector<std::vector<std::size_t>> parts_;
  std::size_t feature_dim_ = 0;
  Vec3 gravity_axis_ = Vec3::UnitZ();
  std::vector<Vec3> centroids_;
  std::vector<std::size_t> part_of_;
};

/// Rigid delta of one part, applied about the part centroid:
/// x' = R(q) (x - c) + c + t.
struct PartPose {
  Vec4 q = quat_identity();
  Vec3 t = Vec3::Zero();

  /// The equivalent world-frame rigid transform for a part with centroid c.
  Rigid as_rigid(const Vec3& centroid) const;
  static PartPose from_rigid(const Rigid& r, const Vec3& centroid);
};

using PartPoseSet = std::vector<PartPose>;

inline PartPoseSet identity_poses(std::size_t parts) { return PartPoseSet(parts); }

struct Camera {
  double fx = 100, fy = 100, cx = 0, cy = 0;
  int width = 0, height = 0;
  Rigid world_from_camera;

  void validate() const;
};

struct Trajectory {
  std::vector<PartPoseSet> frames;
  std::vector<double> timestamps;

  std::size_t size() const { return frames.size(); }
  void validate(std::size_t num_parts) const;
};

/// Gaussians after applying part poses; only centers and rotations change.
std::vector<Gaussian> apply_poses(const GaussianScene& scene, const PartPoseSet& poses);

/// Whole-object delta applied about the object centroid, expressed as the
/// equivalent per-part centroid-relative deltas.
PartPoseSet object_pose_to_parts(const GaussianScene& scene, const PartPose& object_delta);

GaussianScene load_scene(const std::filesystem::path& manifest);
void save_scene(const GaussianScene& scene, const std::filesystem::path& manifest);

}  // namespace artic
