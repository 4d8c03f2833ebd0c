#pragma once

// Recovering part motion from observed frames by rendering the part model
// and descending the discrepancy.

#include <artic/adam.hpp>
#include <artic/image.hpp>
#include <artic/losses.hpp>
#include <artic/rasterizer.hpp>
#include <artic/scene.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace artic {

/// Thumb and index fingertip of one hand, meters, world frame.
struct HandPoints {
  Vec3 thumb = Vec3::Zero();
  Vec3 index = Vec3::Zero();
};

struct ObservationFrame {
  Image features;    // H x W x D
  Image mono_depth;  // H x W x 1, non-metric; only its ordering is used
  Image rgb;         // H x W x 3, may be empty
  std::vector<HandPoints> hands;  // empty when no hand tracks are available
  double timestamp = 0.0;

  void validate(const Camera& camera, std::size_t feature_dim) const;
};

struct TrackerOptions {
  LossWeights weights;
  int steps = 50;
  int refine_steps = 200;
  AdamOptions adam;
  std::size_t depth_pairs = 30000;
  double ranking_margin = 0.0;  // meters
  double alpha_mask = 0.9;
  int erode = 5;
  double feature_clip_alpha = 0.5;
  int blur_kernel = 3;
  double boundary_radius = 0.0025;
  double barron_alpha = 1.0;
  double barron_c = 0.02;
  bool photometric = false;
  int seeds = 8;
  int init_iters = 200;
  /// Meters per unit of the optimized translation parameters; 0 uses the
  /// object's bounding-box diagonal so that learning rates are scale-free.
  double translation_unit = 0.0;
  /// Keep Adam's moment estimates from one frame to the next during tracking
  /// instead of starting every frame from zero moments.
  bool carry_moments = true;
  std::uint64_t rng_seed = 0;
  int workers = 1;

  void validate() const;
};

double translation_unit(const GaussianScene& scene, const TrackerOptions& opts);

/// Cross-part pairs of gaussian centers no farther apart than radius.
BoundaryPairSet find_boundary_pairs(const GaussianScene& scene, double radius = 0.0025);

/// Seed of the depth-pair sampler for one frame; fixed for all optimizer
/// steps on that frame so the objective is a deterministic function of pose.
std::uint64_t frame_sampling_seed(std::uint64_t base, std::size_t frame_index);

struct FrameObjective {
  double value = 0.0;
  double feature = 0.0;
  double depth = 0.0;
  double arap = 0.0;
  PoseGradients grad;
};

/// Observed maps prepared once per frame: blurred to the same resolution as
/// the rendered maps they are compared against.
struct PreparedFrame {
  Image target;  // blurred features, or blurred rgb in photometric mode
  Image mono_depth;
};

PreparedFrame prepare_frame(const ObservationFrame& frame, const TrackerOptions& opts);

/// Weighted tracking loss of one frame and its gradient w.r.t. part poses.
/// Throws PipelineError naming the component if the loss is not finite.
FrameObjective evaluate_frame(const GaussianScene& scene, const Camera& camera, const PartPoseSet& poses,
                              const PreparedFrame& frame, const BoundaryPairSet& pairs, const TrackerOptions& opts,
                              std::uint64_t sampling_seed);

struct FrameResult {
  PartPoseSet poses;
  std::vector<double> loss_trace;  // loss at the start of each step
};

/// `carry`, when given, supplies moment estimates from earlier frames and
/// receives the updated ones; its lr schedule restarts for this frame.
FrameResult optimize_frame(const GaussianScene& scene, const Camera& camera, const PartPoseSet& prev,
                           const ObservationFrame& frame, const BoundaryPairSet& pairs, const TrackerOptions& opts,
                           std::uint64_t sampling_seed, Adam* carry = nullptr);

struct TrackResult {
  Trajectory trajectory;
  std::vector<std::vector<double>> loss_traces;  // per frame
};

/// Sequential per-frame tracking; frame t starts from the result of frame t-1
/// and, with carry_moments, from its optimizer moments.
TrackResult track_video(const GaussianScene& scene, const Camera& camera, const std::vector<ObservationFrame>& frames,
                        const TrackerOptions& opts, const PartPoseSet& initial = {});

struct RefineResult {
  Trajectory trajectory;
  std::vector<double> loss_trace;
};

/// Joint optimization of every frame with the temporal smoothness term added.
RefineResult refine_trajectory(const GaussianScene& scene, const Camera& camera,
                               const std::vector<ObservationFrame>& frames, const Trajectory& trajectory,
                               const TrackerOptions& opts);

struct InitResult {
  PartPose object;             // whole-object delta about the object centroid
  PartPoseSet part_poses;      // the same delta per part
  std::vector<double> seed_losses;
  std::size_t best_seed = 0;
  std::size_t matches = 0;
  Vec3 placement = Vec3::Zero();  // world point the centroid was placed at before optimizing
};

/// Mutual nearest neighbours between gaussian and pixel features under cosine
/// similarity, as (gaussian, pixel) index pairs.
std::vector<std::pair<std::size_t, std::size_t>> mutual_feature_matches(const GaussianScene& scene,
                                                                         const Image& features);

InitResult initialize_pose(const GaussianScene& scene, const Camera& camera, const ObservationFrame& frame,
                           const TrackerOptions& opts, const Image* metric_depth = nullptr);

/// Frame directory: frames.json plus frame_%05d.{feat,depth,rgb} tensors.
struct FrameSequence {
  Camera camera;
  std::vector<ObservationFrame> frames;
};

void save_frames(const std::filesystem::path& dir, const FrameSequence& seq);
FrameSequence load_frames(const std::filesystem::path& dir);

/// Loss traces as CSV with columns frame,step,loss.
std::string loss_traces_csv(const std::vector<std::vector<double>>& traces);

}  // namespace artic
