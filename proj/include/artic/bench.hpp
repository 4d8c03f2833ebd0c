#pragma once

// Synthetic articulated objects with known motion, the observations a
// tracker would see of them, and ADD scoring against ground truth.

#include <artic/io.hpp>
#include <artic/scene.hpp>
#include <artic/tracker.hpp>

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace artic {

struct SyntheticSpec {
  std::string object = "hinge-box";  // hinge-box | scissors | drawer | n-link-chain
  int gaussians_per_part = 600;
  int feature_dim = 16;
  double feature_noise = 0.05;
  // mono depth = a * depth^gamma + b + N(0, depth_noise)
  double depth_a = 2.0;
  double depth_gamma = 0.8;
  double depth_b = 0.1;
  double depth_noise = 0.0;
  double amplitude = -1.0;  // radians (revolute) or meters (prismatic); negative picks the template default
  int frames = 30;
  double fps = 10.0;
  int links = 3;  // n-link-chain only
  int image_size = 128;
  double focal = 170.0;  // pixels
  std::uint64_t rng_seed = 0;

  void validate() const;
};

Json to_json(const SyntheticSpec& s);
SyntheticSpec synthetic_spec_from_json(const Json& j);

struct SyntheticObject {
  GaussianScene scene;
  Trajectory ground_truth;
  std::vector<std::vector<HandPoints>> hands;  // per frame
  Camera camera;
  std::size_t actuated_part = 0;
};

SyntheticObject generate_scene(const SyntheticSpec& spec);

/// Rendered feature maps plus noise, monotonically distorted depth, and rgb.
FrameSequence synthesize_observations(const SyntheticObject& object, const SyntheticSpec& spec);

struct AddSummary {
  double mean = 0.0;
  double std = 0.0;
};

struct AddReport {
  std::vector<std::vector<double>> per_frame;  // [frame][part], meters
  std::vector<std::size_t> keyframes;
  std::vector<AddSummary> per_part;  // over keyframes
  AddSummary manipulated;            // over keyframes, manipulated part only
  AddSummary overall;                // over keyframes and parts
};

/// Mean distance between part points moved by the estimated and by the true
/// pose. Keyframes are every `keyframe_stride`-th frame starting at 0.
AddReport add_metric(const Trajectory& estimated, const Trajectory& ground_truth, const GaussianScene& scene,
                     std::size_t keyframe_stride = 5, std::size_t manipulated_part = 0);

/// Per-frame, per-part ADD as CSV: frame,part,add_m,keyframe.
std::string add_csv(const AddReport& report);

struct AblationRow {
  std::string mode;
  AddReport add;
};

/// Tracks the same synthetic object once per mode
/// (full | no_depth | no_arap | photometric) with identical seeds.
std::vector<AblationRow> run_ablation(const SyntheticSpec& spec, const std::vector<std::string>& modes,
                                      const TrackerOptions& base);

/// Options for one ablation mode derived from the full-method options.
TrackerOptions ablation_options(const TrackerOptions& base, const std::string& mode);

}  // namespace artic
