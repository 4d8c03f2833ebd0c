#include <artic/io.hpp>

#include <artic/errors.hpp>

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>

namespace artic {

namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(const unsigned char* b) {
  return b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void write_tensor(const std::filesystem::path& path, const Image& img) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ValidationError("cannot write " + path.string());
  put_u32(os, static_cast<std::uint32_t>(img.height));
  put_u32(os, static_cast<std::uint32_t>(img.width));
  put_u32(os, static_cast<std::uint32_t>(img.channels));
  for (double v : img.data) {
    const float f = static_cast<float>(v);
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32(os, bits);
  }
}

Image read_tensor(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open tensor " + path.string());
  unsigned char hdr[12];
  is.read(reinterpret_cast<char*>(hdr), 12);
  if (is.gcount() != 12) throw FormatError(path.string() + ": truncated tensor header");
  Image img(static_cast<int>(get_u32(hdr)), static_cast<int>(get_u32(hdr + 4)), static_cast<int>(get_u32(hdr + 8)));
  std::vector<unsigned char> raw(img.data.size() * 4);
  is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(is.gcount()) != raw.size()) throw FormatError(path.string() + ": truncated tensor data");
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    const std::uint32_t bits = get_u32(raw.data() + 4 * i);
    float f;
    std::memcpy(&f, &bits, 4);
    img.data[i] = f;
  }
  return img;
}

void write_png(const std::filesystem::path& path, const Image& img) {
  if (img.channels != 1 && img.channels != 3) throw ValidationError("png export needs 1 or 3 channels");
  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.c_str(), "wb"), &std::fclose);
  if (!fp) throw ValidationError("cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw ValidationError("png encoding failed for " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8,
               img.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_byte> row(static_cast<std::size_t>(img.width) * img.channels);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c)
        row[static_cast<std::size_t>(x) * img.channels + c] =
            static_cast<png_byte>(std::lround(std::clamp(img.at(y, x, c), 0.0, 1.0) * 255.0));
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Json read_json(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open " + path.string());
  try {
    return Json::parse(is);
  } catch (const Json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ValidationError("cannot write " + path.string());
  os << text;
}

const Json& require(const Json& j, const std::string& key) {
  if (!j.is_object() || !j.contains(key)) throw FormatError("missing field '" + key + "'");
  return j.at(key);
}

Vec3 vec3_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 3) throw FormatError("expected a 3-vector");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

Json to_json(const Vec3& v) { return Json::array({v[0], v[1], v[2]}); }

Json to_json(const PartPose& p) {
  const Vec4 q = quat_canonical(p.q);
  return {{"q", {q[0], q[1], q[2], q[3]}}, {"t", to_json(p.t)}};
}

PartPose part_pose_from_json(const Json& j) {
  const Json& q = require(j, "q");
  if (!q.is_array() || q.size() != 4) throw FormatError("field 'q' must be [w,x,y,z]");
  PartPose p;
  p.q = Vec4(q[0].get<double>(), q[1].get<double>(), q[2].get<double>(), q[3].get<double>());
  if (!(p.q.norm() > 0)) throw FormatError("field 'q' is a zero quaternion");
  p.q.normalize();
  p.t = vec3_from_json(require(j, "t"));
  return p;
}

Json to_json(const Rigid& r) {
  const Vec4 q = r.quat();
  return {{"q", {q[0], q[1], q[2], q[3]}}, {"t", to_json(r.translation)}};
}

Rigid rigid_from_json(const Json& j) {
  const PartPose p = part_pose_from_json(j);
  return Rigid::from_quat(p.q, p.t);
}

Json to_json(const Camera& c) {
  return {{"fx", c.fx},         {"fy", c.fy},         {"cx", c.cx}, {"cy", c.cy}, {"width", c.width},
          {"height", c.height}, {"world_from_camera", to_json(c.world_from_camera)}};
}

Camera camera_from_json(const Json& j) {
  try {
    Camera c;
    c.fx = require(j, "fx").get<double>();
    c.fy = require(j, "fy").get<double>();
    c.cx = require(j, "cx").get<double>();
    c.cy = require(j, "cy").get<double>();
    c.width = require(j, "width").get<int>();
    c.height = require(j, "height").get<int>();
    if (j.contains("world_from_camera")) c.world_from_camera = rigid_from_json(j.at("world_from_camera"));
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("camera: ") + e.what());
  }
}

Json to_json(const Trajectory& traj) {
  Json frames = Json::array();
  for (std::size_t i = 0; i < traj.size(); ++i) {
    Json poses = Json::array();
    for (const auto& p : traj.frames[i]) poses.push_back(to_json(p));
    frames.push_back({{"timestamp", traj.timestamps[i]}, {"poses", poses}});
  }
  return {{"frames", frames}};
}

Trajectory trajectory_from_json(const Json& j) {
  try {
    Trajectory t;
    for (const auto& f : require(j, "frames")) {
      t.timestamps.push_back(require(f, "timestamp").get<double>());
      PartPoseSet poses;
      for (const auto& p : require(f, "poses")) poses.push_back(part_pose_from_json(p));
      t.frames.push_back(std::move(poses));
    }
    if (!t.frames.empty()) t.validate(t.frames[0].size());
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("trajectory: ") + e.what());
  }
}

void save_trajectory(const std::filesystem::path& path, const Trajectory& traj, const std::string& scene_ref) {
  Json j = to_json(traj);
  if (!scene_ref.empty()) j["scene"] = scene_ref;
  write_json(path, j);
}

Trajectory load_trajectory(const std::filesystem::path& path) { return trajectory_from_json(read_json(path)); }

std::filesystem::path trajectory_scene_ref(const std::filesystem::path& traj_path) {
  const Json j = read_json(traj_path);
  if (!j.contains("scene")) return {};
  return traj_path.parent_path() / j.at("scene").get<std::string>();
}

}  // namespace artic
