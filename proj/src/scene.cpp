#include <artic/scene.hpp>

#include <artic/errors.hpp>
#include <artic/io.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <string>

namespace artic {

GaussianScene::GaussianScene(std::vector<Gaussian> gaussians, std::vector<std::vector<std::size_t>> parts,
                             std::size_t feature_dim, Vec3 gravity_axis)
    : gaussians_(std::move(gaussians)),
      parts_(std::move(parts)),
      feature_dim_(feature_dim),
      gravity_axis_(std::move(gravity_axis)) {
  validate();
}

void GaussianScene::validate() {
  const std::size_t n = gaussians_.size();
  if (std::abs(gravity_axis_.norm() - 1.0) > 1e-6) throw ValidationError("gravity_axis must be unit length");
  for (std::size_t i = 0; i < n; ++i) {
    const Gaussian& g = gaussians_[i];
    const std::string where = "gaussian " + std::to_string(i) + ": ";
    if (std::abs(g.rotation.norm() - 1.0) > 1e-6) throw ValidationError(where + "rotation is not unit norm");
    if ((g.scale.array() <= 0.0).any()) throw ValidationError(where + "scale must be positive");
    if (!(g.opacity >= 0.0 && g.opacity <= 1.0)) throw ValidationError(where + "opacity outside [0,1]");
    if (static_cast<std::size_t>(g.feature.size()) != feature_dim_)
      throw ValidationError(where + "feature length " + std::to_string(g.feature.size()) + " != feature_dim " +
                            std::to_string(feature_dim_));
  }
  constexpr std::size_t kUnassigned = std::numeric_limits<std::size_t>::max();
  part_of_.assign(n, kUnassigned);
  for (std::size_t p = 0; p < parts_.size(); ++p) {
    if (parts_[p].empty()) throw ValidationError("part " + std::to_string(p) + " is empty");
    for (std::size_t i : parts_[p]) {
      if (i >= n) throw ValidationError("part " + std::to_string(p) + " references gaussian " + std::to_string(i));
      if (part_of_[i] != kUnassigned) throw ValidationError("overlapping parts");
      part_of_[i] = p;
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    if (part_of_[i] == kUnassigned)
      throw ValidationError("gaussian " + std::to_string(i) + " belongs to no part");

  // Summed in sorted index order so the centroid does not depend on how a
  // part's index list happens to be ordered.
  centroids_.clear();
  for (const auto& part : parts_) {
    std::vector<std::size_t> sorted = part;
    std::sort(sorted.begin(), sorted.end());
    Vec3 c = Vec3::Zero();
    for (std::size_t i : sorted) c += gaussians_[i].center;
    centroids_.push_back(c / static_cast<double>(sorted.size()));
  }
}

Vec3 GaussianScene::object_centroid() const {
  Vec3 c = Vec3::Zero();
  for (const auto& g : gaussians_) c += g.center;
  return gaussians_.empty() ? c : Vec3(c / static_cast<double>(gaussians_.size()));
}

double GaussianScene::bbox_diagonal() const {
  if (gaussians_.empty()) return 0.0;
  Vec3 lo = gaussians_[0].center, hi = lo;
  for (const auto& g : gaussians_) {
    lo = lo.cwiseMin(g.center);
    hi = hi.cwiseMax(g.center);
  }
  return (hi - lo).norm();
}

Rigid PartPose::as_rigid(const Vec3& centroid) const {
  const Mat3 r = quat_to_matrix<double>(q.normalized());
  return {r, centroid + t - r * centroid};
}

PartPose PartPose::from_rigid(const Rigid& r, const Vec3& centroid) {
  PartPose p;
  p.q = r.quat();
  p.t = r.rotation * centroid + r.translation - centroid;
  return p;
}

void Camera::validate() const {
  if (!(fx > 0 && fy > 0)) throw ValidationError("camera focal lengths must be positive");
  if (width <= 0 || height <= 0) throw ValidationError("zero-size image");
}

void Trajectory::validate(std::size_t num_parts) const {
  if (timestamps.size() != frames.size()) throw ValidationError("trajectory timestamps/frames length mismatch");
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (frames[i].size() != num_parts)
      throw ValidationError("trajectory frame " + std::to_string(i) + " has " + std::to_string(frames[i].size()) +
                            " parts, expected " + std::to_string(num_parts));
    if (i > 0 && !(timestamps[i] > timestamps[i - 1]))
      throw ValidationError("trajectory timestamps must be strictly increasing");
  }
}

std::vector<Gaussian> apply_poses(const GaussianScene& scene, const PartPoseSet& poses) {
  if (poses.size() != scene.num_parts())
    throw ValidationError("pose set covers " + std::to_string(poses.size()) + " parts, scene has " +
                          std::to_string(scene.num_parts()));
  std::vector<Gaussian> out = scene.gaussians();
  for (std::size_t p = 0; p < scene.num_parts(); ++p) {
    const Vec4 qn = poses[p].q.normalized();
    const Mat3 dr = quat_to_matrix<double>(qn) - Mat3::Identity();
    const Vec3& c = scene.part_centroid(p);
    for (std::size_t i : scene.parts()[p]) {
      Gaussian& g = out[i];
      // Written as x + (R - I)(x - c) + t so the identity pose is exact.
      g.center += dr * (g.center - c) + poses[p].t;
      g.rotation = quat_multiply(qn, g.rotation);
    }
  }
  return out;
}

PartPoseSet object_pose_to_parts(const GaussianScene& scene, const PartPose& object_delta) {
  const Rigid world = object_delta.as_rigid(scene.object_centroid());
  PartPoseSet out(scene.num_parts());
  for (std::size_t p = 0; p < scene.num_parts(); ++p) out[p] = PartPose::from_rigid(world, scene.part_centroid(p));
  for (auto& p : out) p.q = object_delta.q.normalized();
  return out;
}

// ---------------------------------------------------------------------------
// Scene file: JSON manifest plus little-endian float32 blobs.

namespace {

struct ArraySpec {
  const char* name;
  std::size_t cols;  // 0 = feature_dim, 1 = vector
};

constexpr ArraySpec kArrays[] = {{"centers", 3}, {"rotations", 4}, {"scales", 3},
                                 {"opacities", 1}, {"colors", 3},   {"features", 0}};

void write_f32(const std::filesystem::path& path, const std::vector<float>& v) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ValidationError("cannot write " + path.string());
  for (float f : v) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    const unsigned char b[4] = {static_cast<unsigned char>(bits), static_cast<unsigned char>(bits >> 8),
                                static_cast<unsigned char>(bits >> 16), static_cast<unsigned char>(bits >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
  }
}

std::vector<float> read_f32(const std::filesystem::path& path, std::size_t count, const std::string& field) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("arrays." + field + ": cannot open " + path.string());
  std::vector<unsigned char> raw(count * 4);
  is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(is.gcount()) != raw.size())
    throw FormatError("arrays." + field + ": file shorter than declared shape");
  is.peek();
  if (!is.eof()) throw FormatError("arrays." + field + ": file longer than declared shape");
  std::vector<float> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint32_t bits = raw[4 * i] | (raw[4 * i + 1] << 8) | (raw[4 * i + 2] << 16) |
                               (static_cast<std::uint32_t>(raw[4 * i + 3]) << 24);
    std::memcpy(&out[i], &bits, 4);
  }
  return out;
}

}  // namespace

GaussianScene load_scene(const std::filesystem::path& manifest) {
  const Json j = read_json(manifest);
  const auto dir = manifest.parent_path();
  try {
    if (require(j, "version").get<int>() != 1) throw FormatError("version: unsupported scene version");
    if (require(j, "units").get<std::string>() != "m") throw FormatError("units: only \"m\" is supported");
    const auto dim = require(j, "feature_dim").get<std::size_t>();
    const Vec3 gravity = vec3_from_json(require(j, "gravity_axis"));
    const Json& arrays = require(j, "arrays");
    std::size_t n = 0;
    bool have_n = false;
    std::vector<std::vector<float>> blobs;
    for (const auto& spec : kArrays) {
      const Json& a = require(arrays, spec.name);
      const std::string field = spec.name;
      if (require(a, "dtype").get<std::string>() != "f32le")
        throw FormatError("arrays." + field + ".dtype: expected f32le");
      const auto shape = require(a, "shape").get<std::vector<std::size_t>>();
      const std::size_t cols = spec.cols == 0 ? dim : spec.cols;
      const bool vector_ok = spec.cols == 1 && shape.size() == 1;
      const bool matrix_ok = shape.size() == 2 && shape[1] == cols;
      if (!vector_ok && !matrix_ok) throw FormatError("arrays." + field + ".shape: unexpected shape");
      if (!have_n) {
        n = shape[0];
        have_n = true;
      } else if (shape[0] != n) {
        throw FormatError("arrays." + field + ".shape: row count differs from centers");
      }
      blobs.push_back(read_f32(dir / require(a, "file").get<std::string>(), n * cols, field));
    }
    std::vector<Gaussian> gs(n);
    for (std::size_t i = 0; i < n; ++i) {
      Gaussian& g = gs[i];
      for (int k = 0; k < 3; ++k) g.center[k] = blobs[0][3 * i + k];
      for (int k = 0; k < 4; ++k) g.rotation[k] = blobs[1][4 * i + k];
      for (int k = 0; k < 3; ++k) g.scale[k] = blobs[2][3 * i + k];
      g.opacity = blobs[3][i];
      for (int k = 0; k < 3; ++k) g.color[k] = blobs[4][3 * i + k];
      g.feature.resize(static_cast<Eigen::Index>(dim));
      for (std::size_t k = 0; k < dim; ++k) g.feature[static_cast<Eigen::Index>(k)] = blobs[5][dim * i + k];
    }
    auto parts = require(j, "parts").get<std::vector<std::vector<std::size_t>>>();
    return GaussianScene(std::move(gs), std::move(parts), dim, gravity);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("scene manifest: ") + e.what());
  }
}

void save_scene(const GaussianScene& scene, const std::filesystem::path& manifest) {
  const auto dir = manifest.parent_path();
  if (!dir.empty()) std::filesystem::create_directories(dir);
  const std::string stem = manifest.stem().string();
  const std::size_t n = scene.size(), dim = scene.feature_dim();
  std::vector<std::vector<float>> blobs(6);
  for (const auto& g : scene.gaussians()) {
    Vec4 q = g.rotation;
    if (q[0] < 0) q = -q;
    for (int k = 0; k < 3; ++k) blobs[0].push_back(static_cast<float>(g.center[k]));
    for (int k = 0; k < 4; ++k) blobs[1].push_back(static_cast<float>(q[k]));
    for (int k = 0; k < 3; ++k) blobs[2].push_back(static_cast<float>(g.scale[k]));
    blobs[3].push_back(static_cast<float>(g.opacity));
    for (int k = 0; k < 3; ++k) blobs[4].push_back(static_cast<float>(g.color[k]));
    for (std::size_t k = 0; k < dim; ++k) blobs[5].push_back(static_cast<float>(g.feature[static_cast<Eigen::Index>(k)]));
  }
  Json arrays = Json::object();
  for (std::size_t a = 0; a < 6; ++a) {
    const auto& spec = kArrays[a];
    const std::string file = stem + "." + spec.name + ".bin";
    write_f32(dir / file, blobs[a]);
    Json shape = spec.cols == 1 ? Json::array({n}) : Json::array({n, spec.cols == 0 ? dim : spec.cols});
    arrays[spec.name] = {{"file", file}, {"dtype", "f32le"}, {"shape", shape}};
  }
  Json j;
  j["version"] = 1;
  j["feature_dim"] = dim;
  j["gravity_axis"] = to_json(scene.gravity_axis());
  j["units"] = "m";
  j["arrays"] = arrays;
  j["parts"] = scene.parts();
  write_json(manifest, j);
}

}  // namespace artic
