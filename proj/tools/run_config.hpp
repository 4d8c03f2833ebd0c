#pragma once

// Everything one CLI run depends on, in one serializable record. A run's
// resolved config is written next to its outputs; passing it back with
// --config repeats the run.

#include <artic/bench.hpp>
#include <artic/io.hpp>
#include <artic/planner.hpp>
#include <artic/tracker.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace artic::cli {

struct RunConfig {
  std::string command;
  std::map<std::string, std::string> paths;

  SyntheticSpec bench;                 // generate, ablate
  std::vector<std::string> templates;  // ablate
  std::vector<std::string> modes;      // ablate

  TrackerOptions tracker;
  std::size_t init_frame = 0;

  std::size_t keyframe_stride = 5;
  std::size_t manipulated_part = 0;

  PlanOptions plan;
  std::vector<double> object_offset{0.0, 0.0, 0.0};  // meters, object placement in the robot frame
  double object_yaw_deg = 0.0;
  RankOptions rank;

  std::uint64_t rng_seed = 0;
  int workers = 0;  // 0: available cores

  /// Copies the run seed and worker count into the module options and
  /// builds the object placement.
  void resolve();
  void validate() const;

  const std::string& path(const std::string& key) const;
  std::optional<std::string> optional_path(const std::string& key) const;
};

RunConfig default_run_config(const std::string& command);

Json to_json(const RunConfig& c);
RunConfig run_config_from_json(const Json& j);

/// RSRD_SEED, when set, replaces the configured seed.
std::optional<std::uint64_t> seed_from_env();

}  // namespace artic::cli
