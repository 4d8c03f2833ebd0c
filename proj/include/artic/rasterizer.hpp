#pragma once

// Differentiable splatting of posed gaussian scenes.
//
// Pixel (x, y) samples the image plane at coordinates (x, y); a gaussian whose
// projected mean is (cx, cy) peaks exactly on that pixel. Gaussians are sorted
// front-to-back by camera depth (ties by index) and composited with
//   w_k = alpha_k * prod_{j<k} (1 - alpha_j).
// The per-pixel footprint is truncated at 3 sigma of the projected covariance
// with a C1 taper, so that images and their pose gradients stay continuous
// as a gaussian's support moves across pixel centers.

#include <artic/image.hpp>
#include <artic/scene.hpp>

#include <cstdint>
#include <vector>

namespace artic {

struct RenderOptions {
  bool features = true;
  bool rgb = true;
  double near_plane = 0.01;  // meters
  double dilation = 0.3;     // px^2 added to the projected covariance
  int workers = 1;
};

struct RenderOutput {
  Image features;  // H x W x D
  Image depth;     // H x W x 1, sum_k w_k z_k (meters)
  Image alpha;     // H x W x 1
  Image rgb;       // H x W x 3
};

/// Upstream gradients of a scalar loss w.r.t. render outputs. An image with
/// zero pixels means "no gradient for this output".
struct RenderGradients {
  Image features;
  Image depth;
  Image alpha;
  Image rgb;
};

struct PartGradient {
  Vec4 q = Vec4::Zero();
  Vec3 t = Vec3::Zero();
  /// Gradient w.r.t. the part rotation matrix; used to assemble gradients of
  /// parameterizations that share one rotation across parts.
  Mat3 rotation = Mat3::Zero();
};

using PoseGradients = std::vector<PartGradient>;

/// Projection and compositing state saved by the forward pass.
struct RenderCache {
  struct Projected {
    std::uint32_t index = 0;  // gaussian index
    Vec3 cam = Vec3::Zero();  // camera-frame center
    Eigen::Matrix<double, 2, 3> proj = Eigen::Matrix<double, 2, 3>::Zero();  // J * W
    Eigen::Vector2d mean = Eigen::Vector2d::Zero();
    Eigen::Matrix2d conic = Eigen::Matrix2d::Zero();
    Mat3 cov_world = Mat3::Zero();
    std::uint32_t first_entry = 0, num_entries = 0;
  };
  struct Entry {
    std::uint32_t splat = 0;  // index into `splats`
    std::uint32_t pixel = 0;
    double alpha = 0;
    double transmittance = 0;  // before this entry
  };
  int height = 0, width = 0;
  std::vector<Projected> splats;         // front-to-back
  std::vector<Entry> entries;            // splat-major
  std::vector<std::uint32_t> pixel_offsets;  // CSR over pixels, size H*W+1
  std::vector<std::uint32_t> pixel_entries;  // entry indices, front-to-back per pixel
};

RenderOutput rasterize(const GaussianScene& scene, const PartPoseSet& poses, const Camera& camera,
                       const RenderOptions& options = {}, RenderCache* cache = nullptr);

/// Reverse-mode gradients of sum(upstream * outputs) w.r.t. each part's (q, t).
PoseGradients backward(const GaussianScene& scene, const PartPoseSet& poses, const Camera& camera,
                       const RenderGradients& upstream, const RenderCache& cache, const RenderOptions& options = {});

/// Convenience overload that re-runs the forward pass.
PoseGradients backward(const GaussianScene& scene, const PartPoseSet& poses, const Camera& camera,
                       const RenderGradients& upstream, const RenderOptions& options = {});

/// Per-channel box blur with edge clamping; even kernel sizes round up.
Image blur_features(const Image& image, int kernel_size);
/// Adjoint of blur_features (maps gradients of the blurred image back).
Image blur_features_adjoint(const Image& grad, int kernel_size);

/// (alpha > threshold) eroded by a square structuring element of radius erosion_px.
Mask object_mask(const Image& alpha, double threshold = 0.9, int erosion_px = 5);

/// Footprint of a splat as a function of the Mahalanobis distance squared m:
/// alpha = opacity * footprint(m); 1 at m = 0, exactly 0 with zero slope at m = 9.
double splat_footprint(double m);
double splat_footprint_derivative(double m);

}  // namespace artic
