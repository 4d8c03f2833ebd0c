#pragma once

// File formats shared across subcommands: the binary tensor format, PNG
// previews, and JSON encodings of poses, cameras and trajectories.

#include <artic/image.hpp>
#include <artic/scene.hpp>

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>

namespace artic {

using Json = nlohmann::json;

/// Header of three little-endian u32 dims (H, W, C) followed by float32 row-major data.
void write_tensor(const std::filesystem::path& path, const Image& img);
Image read_tensor(const std::filesystem::path& path);

/// 8-bit PNG preview of a 1- or 3-channel image with values in [0, 1].
void write_png(const std::filesystem::path& path, const Image& img);

Json read_json(const std::filesystem::path& path);
/// Writes with a fixed indentation and a trailing newline so outputs diff cleanly.
void write_json(const std::filesystem::path& path, const Json& j);
void write_text(const std::filesystem::path& path, const std::string& text);

Json to_json(const PartPose& p);
PartPose part_pose_from_json(const Json& j);
Json to_json(const Rigid& r);
Rigid rigid_from_json(const Json& j);
Json to_json(const Camera& c);
Camera camera_from_json(const Json& j);

/// Trajectory file: {"scene": optional path, "frames": [{"timestamp", "poses": [{q, t}...]}]}.
Json to_json(const Trajectory& traj);
Trajectory trajectory_from_json(const Json& j);
void save_trajectory(const std::filesystem::path& path, const Trajectory& traj,
                     const std::string& scene_ref = {});
Trajectory load_trajectory(const std::filesystem::path& path);
/// Scene manifest recorded in a trajectory file, resolved against the file's directory.
std::filesystem::path trajectory_scene_ref(const std::filesystem::path& traj_path);

/// Field accessor that reports the offending key on failure.
const Json& require(const Json& j, const std::string& key);
Vec3 vec3_from_json(const Json& j);
Json to_json(const Vec3& v);

}  // namespace artic
