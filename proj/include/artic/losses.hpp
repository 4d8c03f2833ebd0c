#pragma once

// Tracking objectives. Every loss returns its value together with the
// gradient the optimizer needs: per-pixel for image losses, per-part pose
// gradients for geometric ones.

#include <artic/image.hpp>
#include <artic/rasterizer.hpp>
#include <artic/scene.hpp>

#include <cstdint>
#include <vector>

namespace artic {

struct LossWeights {
  double dino = 1.0;
  double mono = 0.5;
  double arap = 0.2;
  double temporal = 0.1;

  void validate() const;
};

struct BoundaryPair {
  std::size_t i = 0;
  std::size_t j = 0;
  double d_init = 0.0;  // meters
};

using BoundaryPairSet = std::vector<BoundaryPair>;

struct ImageLoss {
  double value = 0.0;
  Image grad;  // same shape as the rendered input
};

struct PoseLoss {
  double value = 0.0;
  PoseGradients grad;
};

/// Mean squared difference over the pixels where `keep` is set, and all channels.
/// An empty `keep` mask uses every pixel.
ImageLoss feature_mse(const Image& rendered, const Image& observed, const Mask& keep = {});

/// Hinge ranking loss: for each sampled pair of distinct mask pixels (a, b)
/// ordered so that mono(a) < mono(b), adds max(0, rendered(a) - rendered(b) + margin).
/// The result is averaged over n_pairs. Pairs with equal mono depth contribute nothing.
ImageLoss depth_ranking_loss(const Image& rendered_depth, const Image& mono_depth, const Mask& mask,
                             std::size_t n_pairs, double margin, std::uint64_t seed);

struct RhoValue {
  double value = 0.0;
  double derivative = 0.0;  // d rho / d x
};

/// General robust kernel with shape alpha and scale c.
RhoValue barron_rho(double x, double alpha, double c);

/// Pair distance changes at or below this many meters count as zero.
inline constexpr double kArapDistanceTolerance = 1e-9;

/// Sum over pairs of rho(d_init - |x_i - x_j|) with centers posed by `poses`.
PoseLoss arap_loss(const GaussianScene& scene, const BoundaryPairSet& pairs, const PartPoseSet& poses, double alpha,
                   double c);

struct TrajectoryLoss {
  double value = 0.0;
  std::vector<PoseGradients> grad;  // per frame
};

/// Sum over parts and interior frames of |xi(t, t+1) - xi(t-1, t)|^2, where xi
/// is the se(3) log of the body-frame relative part motion between frames.
TrajectoryLoss temporal_laplacian(const GaussianScene& scene, const Trajectory& traj);

struct LossTerms {
  ImageLoss feature;  // gradient w.r.t. the rendered feature (or rgb) map
  ImageLoss depth;    // gradient w.r.t. the rendered depth map
  PoseLoss arap;
};

struct WeightedLoss {
  double value = 0.0;
  Image feature_grad;
  Image depth_grad;
  PoseGradients arap_grad;
};

/// lambda_dino * feature + lambda_mono * depth + lambda_arap * arap, with the
/// same weighting applied to each gradient.
WeightedLoss total_tracking_loss(const LossTerms& terms, const LossWeights& weights);

void add_scaled(PoseGradients& into, const PoseGradients& g, double scale = 1.0);

}  // namespace artic
