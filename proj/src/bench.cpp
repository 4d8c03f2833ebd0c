#include <artic/bench.hpp>

#include <artic/errors.hpp>
#include <artic/rasterizer.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace artic {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Scene values are stored as float32; joint axes use representable
// coordinates so points placed on them stay exactly on them.
double round_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

Vec3 round_f32(const Vec3& v) { return Vec3(round_f32(v.x()), round_f32(v.y()), round_f32(v.z())); }

struct Sample {
  Vec3 point;
  Vec3 normal;
};

struct PartBuilder {
  std::vector<Sample> samples;
  double area = 0.0;
};

struct Face {
  Vec3 center, u, v, normal;  // u, v are half-extent vectors
  double area() const { return 4.0 * u.norm() * v.norm(); }
};

/// Faces of an axis-aligned box; `open` lists faces to skip by name
/// ("-x", "+x", "-y", "+y", "-z", "+z").
std::vector<Face> box_faces(const Vec3& lo, const Vec3& hi, const std::vector<std::string>& open = {}) {
  const Vec3 c = 0.5 * (lo + hi), h = 0.5 * (hi - lo);
  const Vec3 ex = Vec3::UnitX() * h.x(), ey = Vec3::UnitY() * h.y(), ez = Vec3::UnitZ() * h.z();
  std::vector<std::pair<std::string, Face>> all = {
      {"-x", {c - ex, ey, ez, -Vec3::UnitX()}}, {"+x", {c + ex, ey, ez, Vec3::UnitX()}},
      {"-y", {c - ey, ex, ez, -Vec3::UnitY()}}, {"+y", {c + ey, ex, ez, Vec3::UnitY()}},
      {"-z", {c - ez, ex, ey, -Vec3::UnitZ()}}, {"+z", {c + ez, ex, ey, Vec3::UnitZ()}}};
  std::vector<Face> out;
  for (auto& [name, f] : all)
    if (std::find(open.begin(), open.end(), name) == open.end()) out.push_back(f);
  return out;
}

void sample_faces(std::mt19937_64& rng, const std::vector<Face>& faces, int count, PartBuilder& part,
                  const Mat3& rot = Mat3::Identity(), const Vec3& offset = Vec3::Zero()) {
  std::vector<double> areas;
  for (const auto& f : faces) areas.push_back(f.area());
  std::discrete_distribution<std::size_t> pick(areas.begin(), areas.end());
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < count; ++i) {
    const Face& f = faces[pick(rng)];
    const double a = u(rng), b = u(rng);
    part.samples.push_back({rot * (f.center + a * f.u + b * f.v) + offset, rot * f.normal});
  }
  for (double a : areas) part.area += a;
}

/// Points on a line, used to tie two parts together along a joint axis.
void add_axis_points(PartBuilder& part, const Vec3& start, const Vec3& step, int count, const Vec3& normal) {
  for (int k = 0; k < count; ++k) part.samples.push_back({start + static_cast<double>(k) * step, normal});
}

Rigid rotation_about(const Vec3& point, const Vec3& axis, double angle) {
  Rigid r;
  r.rotation = Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
  r.translation = point - r.rotation * point;
  return r;
}

Rigid translation_of(const Vec3& t) {
  Rigid r;
  r.translation = t;
  return r;
}

double ramp(int t, int frames) {
  if (frames <= 1) return 0.0;
  return 0.5 * (1.0 - std::cos(kPi * static_cast<double>(t) / (frames - 1)));
}

struct Built {
  std::vector<PartBuilder> parts;
  std::size_t actuated = 0;
  std::vector<std::vector<Rigid>> motion;  // [frame][part]
  double elevation = 30.0 * kPi / 180.0;
  double azimuth = 20.0 * kPi / 180.0;
  double distance = 0.45;
};

Built build_hinge_box(std::mt19937_64& rng, const SyntheticSpec& s, double amp) {
  Built b;
  b.parts.resize(2);
  const int n = s.gaussians_per_part;
  sample_faces(rng, box_faces(Vec3(-0.06, -0.04, 0.0), Vec3(0.06, 0.04, 0.05)), n, b.parts[0]);
  sample_faces(rng, box_faces(Vec3(-0.06, -0.04, 0.054), Vec3(0.06, 0.04, 0.064)), n, b.parts[1]);
  // Hinge knuckles: both parts own points on the hinge line, offset along it.
  const Vec3 hinge = round_f32(Vec3(-0.057, 0.04, 0.052));
  add_axis_points(b.parts[0], hinge, Vec3(0.006, 0, 0), 20, Vec3::UnitY());
  add_axis_points(b.parts[1], hinge + Vec3(0.002, 0, 0), Vec3(0.006, 0, 0), 19, Vec3::UnitY());
  b.actuated = 1;
  for (int t = 0; t < s.frames; ++t)
    b.motion.push_back({Rigid{}, rotation_about(hinge, -Vec3::UnitX(), amp * ramp(t, s.frames))});
  return b;
}

Built build_scissors(std::mt19937_64& rng, const SyntheticSpec& s, double amp) {
  Built b;
  b.parts.resize(2);
  const int n = s.gaussians_per_part;
  const double open = 12.0 * kPi / 180.0;
  const Mat3 ra = Eigen::AngleAxisd(open, Vec3::UnitZ()).toRotationMatrix();
  const Mat3 rb = Eigen::AngleAxisd(-open, Vec3::UnitZ()).toRotationMatrix();
  sample_faces(rng, box_faces(Vec3(-0.08, -0.01, 0.0), Vec3(0.08, 0.01, 0.004)), n, b.parts[0], ra);
  sample_faces(rng, box_faces(Vec3(-0.08, -0.01, 0.007), Vec3(0.08, 0.01, 0.011)), n, b.parts[1], rb);
  // Pivot rivet on the shared vertical axis.
  add_axis_points(b.parts[0], Vec3(0, 0, 0.0005), Vec3(0, 0, 0.0015), 4, Vec3::UnitZ());
  add_axis_points(b.parts[1], Vec3(0, 0, 0.0065), Vec3(0, 0, 0.0015), 4, Vec3::UnitZ());
  b.actuated = 1;
  b.elevation = 60.0 * kPi / 180.0;
  for (int t = 0; t < s.frames; ++t) {
    const double a = 0.5 * amp * ramp(t, s.frames);
    b.motion.push_back({rotation_about(Vec3::Zero(), Vec3::UnitZ(), a), rotation_about(Vec3::Zero(), Vec3::UnitZ(), -a)});
  }
  return b;
}

Built build_drawer(std::mt19937_64& rng, const SyntheticSpec& s, double amp) {
  Built b;
  b.parts.resize(3);
  const int n = s.gaussians_per_part;
  sample_faces(rng, box_faces(Vec3(-0.07, -0.06, 0.0), Vec3(0.07, 0.06, 0.08), {"-y"}), n, b.parts[0]);
  sample_faces(rng, box_faces(Vec3(-0.062, -0.06, 0.008), Vec3(0.062, 0.05, 0.072), {"+z"}), n, b.parts[1]);
  // Knob: a small part fixed to the drawer front, mounted 1.5 mm in front of
  // the front panel points it covers.
  const Vec3 klo(-0.012, -0.072, 0.034), khi(0.012, -0.0615, 0.046);
  sample_faces(rng, box_faces(klo, khi), std::max(24, n / 15), b.parts[2]);
  for (const auto& smp : b.parts[1].samples)
    if (smp.normal.y() < -0.5 && smp.point.x() > klo.x() && smp.point.x() < khi.x() && smp.point.z() > klo.z() &&
        smp.point.z() < khi.z())
      b.parts[2].samples.push_back({smp.point - Vec3(0, 0.0015, 0), -Vec3::UnitY()});
  b.actuated = 1;
  for (int t = 0; t < s.frames; ++t) {
    const Rigid pull = translation_of(Vec3(0, -amp * ramp(t, s.frames), 0));
    b.motion.push_back({Rigid{}, pull, pull});
  }
  return b;
}

Built build_chain(std::mt19937_64& rng, const SyntheticSpec& s, double amp) {
  Built b;
  const int links = std::max(2, s.links);
  b.parts.resize(static_cast<std::size_t>(links));
  const double len = 0.08, gap = 0.004;
  std::vector<Vec3> joints;
  for (int k = 0; k < links; ++k) {
    const double x0 = k * (len + gap);
    sample_faces(rng, box_faces(Vec3(x0, -0.01, 0.0), Vec3(x0 + len, 0.01, 0.02)), s.gaussians_per_part,
                 b.parts[static_cast<std::size_t>(k)]);
    if (k > 0) {
      const Vec3 j = round_f32(Vec3(x0 - 0.5 * gap, 0.0, 0.0));
      joints.push_back(j);
      add_axis_points(b.parts[static_cast<std::size_t>(k - 1)], j + Vec3(0, 0, 0.001), Vec3(0, 0, 0.006), 4,
                      Vec3::UnitX());
      add_axis_points(b.parts[static_cast<std::size_t>(k)], j + Vec3(0, 0, 0.003), Vec3(0, 0, 0.006), 3,
                      -Vec3::UnitX());
    }
  }
  b.actuated = static_cast<std::size_t>(links - 1);
  b.distance = 0.3 + 0.09 * links;
  for (int t = 0; t < s.frames; ++t) {
    std::vector<Rigid> frame(static_cast<std::size_t>(links));
    for (int k = 1; k < links; ++k) {
      const double sign = (k % 2 == 1) ? 1.0 : -1.0;
      frame[static_cast<std::size_t>(k)] =
          frame[static_cast<std::size_t>(k - 1)] *
          rotation_about(joints[static_cast<std::size_t>(k - 1)], Vec3::UnitZ(), sign * amp * ramp(t, s.frames));
    }
    b.motion.push_back(frame);
  }
  return b;
}

double default_amplitude(const std::string& object) {
  if (object == "drawer") return 0.05;
  if (object == "scissors") return 30.0 * kPi / 180.0;
  if (object == "n-link-chain") return 25.0 * kPi / 180.0;
  return 45.0 * kPi / 180.0;
}

/// Smooth random map from position to a D-dim feature.
struct FeatureField {
  Eigen::MatrixXd freq;   // (3*D) x 3
  Eigen::VectorXd phase;  // 3*D
  Eigen::VectorXd amp;    // 3*D
  Eigen::VectorXd bias;   // D

  FeatureField(std::mt19937_64& rng, int dim) {
    std::normal_distribution<double> n(0.0, 1.0);
    std::uniform_real_distribution<double> mag(30.0, 80.0), ph(0.0, 2.0 * kPi), a(0.3, 0.7);
    freq.resize(3 * dim, 3);
    phase.resize(3 * dim);
    amp.resize(3 * dim);
    bias.resize(dim);
    for (int r = 0; r < 3 * dim; ++r) {
      Vec3 d(n(rng), n(rng), n(rng));
      freq.row(r) = (d.normalized() * mag(rng)).transpose();
      phase[r] = ph(rng);
      amp[r] = a(rng);
    }
    for (int d = 0; d < dim; ++d) bias[d] = 0.5 * n(rng);
  }

  Eigen::VectorXd at(const Vec3& x) const {
    Eigen::VectorXd f = bias;
    for (Eigen::Index r = 0; r < phase.size(); ++r) f[r / 3] += amp[r] * std::sin(freq.row(r).dot(x) + phase[r]);
    return f;
  }
};

Camera make_camera(const SyntheticSpec& s, const Vec3& target, double elevation, double azimuth, double distance) {
  Camera cam;
  cam.width = cam.height = s.image_size;
  cam.fx = cam.fy = s.focal;
  cam.cx = cam.cy = 0.5 * (s.image_size - 1);
  const Vec3 eye = target + distance * Vec3(std::sin(azimuth) * std::cos(elevation),
                                            -std::cos(azimuth) * std::cos(elevation), std::sin(elevation));
  const Vec3 fwd = (target - eye).normalized();
  const Vec3 right = fwd.cross(Vec3::UnitZ()).normalized();
  const Vec3 down = fwd.cross(right);
  cam.world_from_camera.rotation.col(0) = right;
  cam.world_from_camera.rotation.col(1) = down;
  cam.world_from_camera.rotation.col(2) = fwd;
  cam.world_from_camera.translation = eye;
  return cam;
}

}  // namespace

void SyntheticSpec::validate() const {
  if (object != "hinge-box" && object != "scissors" && object != "drawer" && object != "n-link-chain")
    throw ValidationError("unknown object template '" + object + "'");
  if (frames < 2) throw ValidationError("a synthetic sequence needs at least 2 frames");
  if (gaussians_per_part < 8) throw ValidationError("gaussians_per_part must be at least 8");
  if (feature_dim < 1) throw ValidationError("feature_dim must be positive");
  if (feature_noise < 0 || depth_noise < 0) throw ValidationError("noise levels must be non-negative");
  if (!(depth_a > 0) || !(depth_gamma > 0)) throw ValidationError("depth distortion must be strictly increasing");
  if (image_size < 8 || !(focal > 0)) throw ValidationError("invalid synthetic camera");
  if (!(fps > 0)) throw ValidationError("fps must be positive");
  if (object == "n-link-chain" && links < 2) throw ValidationError("n-link-chain needs at least 2 links");
  const double amp = amplitude < 0 ? default_amplitude(object) : amplitude;
  if (object == "drawer" ? amp > 0.1 : amp > kPi / 2)
    throw ValidationError("amplitude exceeds the template's joint limit");
}

Json to_json(const SyntheticSpec& s) {
  return Json{{"object", s.object},
              {"gaussians_per_part", s.gaussians_per_part},
              {"feature_dim", s.feature_dim},
              {"feature_noise", s.feature_noise},
              {"depth_a", s.depth_a},
              {"depth_gamma", s.depth_gamma},
              {"depth_b", s.depth_b},
              {"depth_noise", s.depth_noise},
              {"amplitude", s.amplitude},
              {"frames", s.frames},
              {"fps", s.fps},
              {"links", s.links},
              {"image_size", s.image_size},
              {"focal", s.focal},
              {"rng_seed", s.rng_seed}};
}

SyntheticSpec synthetic_spec_from_json(const Json& j) {
  SyntheticSpec s;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  try {
    get("object", s.object);
    get("gaussians_per_part", s.gaussians_per_part);
    get("feature_dim", s.feature_dim);
    get("feature_noise", s.feature_noise);
    get("depth_a", s.depth_a);
    get("depth_gamma", s.depth_gamma);
    get("depth_b", s.depth_b);
    get("depth_noise", s.depth_noise);
    get("amplitude", s.amplitude);
    get("frames", s.frames);
    get("fps", s.fps);
    get("links", s.links);
    get("image_size", s.image_size);
    get("focal", s.focal);
    get("rng_seed", s.rng_seed);
  } catch (const Json::exception& e) {
    throw FormatError(std::string("synthetic spec: ") + e.what());
  }
  return s;
}

SyntheticObject generate_scene(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.rng_seed);
  const double amp = spec.amplitude < 0 ? default_amplitude(spec.object) : spec.amplitude;
  Built b;
  if (spec.object == "hinge-box") b = build_hinge_box(rng, spec, amp);
  else if (spec.object == "scissors") b = build_scissors(rng, spec, amp);
  else if (spec.object == "drawer") b = build_drawer(rng, spec, amp);
  else b = build_chain(rng, spec, amp);

  std::vector<Gaussian> gs;
  std::vector<std::vector<std::size_t>> parts(b.parts.size());
  std::normal_distribution<double> jitter(0.0, 0.002);
  for (std::size_t p = 0; p < b.parts.size(); ++p) {
    const FeatureField field(rng, spec.feature_dim);
    const auto& part = b.parts[p];
    const double spacing = std::sqrt(part.area / static_cast<double>(std::max<std::size_t>(1, part.samples.size())));
    const double sigma = std::clamp(0.5 * spacing, 0.0015, 0.006);
    // Textureless colours close to the black background.
    const Vec3 color = Vec3::Constant(0.03 + 0.005 * static_cast<double>(p % 3)) + Vec3(jitter(rng), jitter(rng), 0.0);
    for (const auto& smp : part.samples) {
      Gaussian g;
      g.center = round_f32(smp.point);
      g.scale = Vec3::Constant(round_f32(sigma));
      g.opacity = round_f32(0.8);
      g.color = Vec3(round_f32(std::clamp(color.x(), 0.0, 1.0)), round_f32(std::clamp(color.y(), 0.0, 1.0)),
                     round_f32(color.z()));
      g.feature = field.at(smp.point).unaryExpr([](double v) { return round_f32(v); });
      parts[p].push_back(gs.size());
      gs.push_back(std::move(g));
    }
  }

  SyntheticObject obj;
  obj.scene = GaussianScene(std::move(gs), std::move(parts), static_cast<std::size_t>(spec.feature_dim));
  obj.actuated_part = b.actuated;
  obj.camera = make_camera(spec, obj.scene.object_centroid(), b.elevation, b.azimuth, b.distance);
  for (int t = 0; t < spec.frames; ++t) {
    PartPoseSet poses(b.parts.size());
    for (std::size_t p = 0; p < b.parts.size(); ++p)
      poses[p] = PartPose::from_rigid(b.motion[static_cast<std::size_t>(t)][p], obj.scene.part_centroid(p));
    obj.ground_truth.frames.push_back(poses);
    obj.ground_truth.timestamps.push_back(t / spec.fps);
  }

  // One hand: thumb on the actuated part's most camera-facing point, index on
  // its highest point; both 5 mm off the surface along the normal.
  const auto& act = b.parts[b.actuated].samples;
  const Vec3 view = (obj.camera.world_from_camera.translation - obj.scene.part_centroid(b.actuated)).normalized();
  std::size_t thumb = 0, index = 0;
  for (std::size_t i = 1; i < act.size(); ++i) {
    if (act[i].point.dot(view) > act[thumb].point.dot(view)) thumb = i;
    if (act[i].point.z() > act[index].point.z()) index = i;
  }
  for (int t = 0; t < spec.frames; ++t) {
    const Rigid& m = b.motion[static_cast<std::size_t>(t)][b.actuated];
    HandPoints h;
    h.thumb = m * act[thumb].point + m.rotation * (0.005 * act[thumb].normal);
    h.index = m * act[index].point + m.rotation * (0.005 * act[index].normal);
    obj.hands.push_back({h});
  }
  return obj;
}

FrameSequence synthesize_observations(const SyntheticObject& object, const SyntheticSpec& spec) {
  spec.validate();
  FrameSequence seq;
  seq.camera = object.camera;
  std::mt19937_64 rng(spec.rng_seed ^ 0x5DEECE66DULL);
  std::normal_distribution<double> n(0.0, 1.0);
  RenderOptions ro;
  for (std::size_t t = 0; t < object.ground_truth.size(); ++t) {
    const RenderOutput r = rasterize(object.scene, object.ground_truth.frames[t], object.camera, ro);
    ObservationFrame f;
    f.features = r.features;
    if (spec.feature_noise > 0)
      for (double& v : f.features.data) v += spec.feature_noise * n(rng);
    f.mono_depth = r.depth;
    const bool identity = spec.depth_a == 1.0 && spec.depth_gamma == 1.0 && spec.depth_b == 0.0;
    for (double& v : f.mono_depth.data) {
      if (!identity) v = spec.depth_a * std::pow(std::max(v, 0.0), spec.depth_gamma) + spec.depth_b;
      if (spec.depth_noise > 0) v += spec.depth_noise * n(rng);
    }
    f.rgb = r.rgb;
    f.timestamp = object.ground_truth.timestamps[t];
    if (t < object.hands.size()) f.hands = object.hands[t];
    seq.frames.push_back(std::move(f));
  }
  return seq;
}

AddReport add_metric(const Trajectory& est, const Trajectory& gt, const GaussianScene& scene,
                     std::size_t keyframe_stride, std::size_t manipulated_part) {
  if (est.size() != gt.size())
    throw ValidationError("trajectory lengths differ: " + std::to_string(est.size()) + " vs " +
                          std::to_string(gt.size()));
  for (std::size_t t = 0; t < est.size(); ++t)
    if (est.frames[t].size() != scene.num_parts() || gt.frames[t].size() != scene.num_parts())
      throw ValidationError("frame " + std::to_string(t) + " does not cover every part");
  if (keyframe_stride == 0) throw ValidationError("keyframe stride must be positive");
  if (manipulated_part >= scene.num_parts()) throw ValidationError("manipulated part out of range");

  AddReport rep;
  const std::size_t P = scene.num_parts();
  for (std::size_t t = 0; t < est.size(); ++t) {
    std::vector<double> row(P, 0.0);
    for (std::size_t p = 0; p < P; ++p) {
      const Vec3& c = scene.part_centroid(p);
      const Rigid a = est.frames[t][p].as_rigid(c), b = gt.frames[t][p].as_rigid(c);
      double sum = 0.0;
      for (std::size_t i : scene.parts()[p]) {
        const Vec3& x = scene.gaussians()[i].center;
        sum += (a * x - b * x).norm();
      }
      row[p] = sum / static_cast<double>(scene.parts()[p].size());
    }
    rep.per_frame.push_back(std::move(row));
    if (t % keyframe_stride == 0) rep.keyframes.push_back(t);
  }
  auto summarize = [](const std::vector<double>& v) {
    AddSummary s;
    if (v.empty()) return s;
    for (double x : v) s.mean += x;
    s.mean /= static_cast<double>(v.size());
    for (double x : v) s.std += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(s.std / static_cast<double>(v.size()));
    return s;
  };
  std::vector<double> all;
  for (std::size_t p = 0; p < P; ++p) {
    std::vector<double> v;
    for (std::size_t t : rep.keyframes) v.push_back(rep.per_frame[t][p]);
    rep.per_part.push_back(summarize(v));
    if (p == manipulated_part) rep.manipulated = summarize(v);
    all.insert(all.end(), v.begin(), v.end());
  }
  rep.overall = summarize(all);
  return rep;
}

std::string add_csv(const AddReport& report) {
  std::ostringstream os;
  os.precision(10);
  os << "frame,part,add_m,keyframe\n";
  for (std::size_t t = 0; t < report.per_frame.size(); ++t) {
    const bool key = std::find(report.keyframes.begin(), report.keyframes.end(), t) != report.keyframes.end();
    for (std::size_t p = 0; p < report.per_frame[t].size(); ++p)
      os << t << ',' << p << ',' << report.per_frame[t][p] << ',' << (key ? 1 : 0) << '\n';
  }
  return os.str();
}

TrackerOptions ablation_options(const TrackerOptions& base, const std::string& mode) {
  TrackerOptions o = base;
  if (mode == "full") return o;
  if (mode == "no_depth") o.weights.mono = 0.0;
  else if (mode == "no_arap") o.weights.arap = 0.0;
  else if (mode == "photometric") o.photometric = true;
  else throw ValidationError("unknown ablation mode '" + mode + "'");
  return o;
}

std::vector<AblationRow> run_ablation(const SyntheticSpec& spec, const std::vector<std::string>& modes,
                                      const TrackerOptions& base) {
  if (modes.empty()) throw ValidationError("no ablation modes given");
  for (const auto& m : modes) ablation_options(base, m);
  const SyntheticObject obj = generate_scene(spec);
  const FrameSequence seq = synthesize_observations(obj, spec);
  std::vector<AblationRow> rows;
  for (const auto& mode : modes) {
    TrackResult tr;
    try {
      tr = track_video(obj.scene, seq.camera, seq.frames, ablation_options(base, mode));
    } catch (const PipelineError& e) {
      throw PipelineError("mode " + mode + ": " + e.what());
    }
    rows.push_back({mode, add_metric(tr.trajectory, obj.ground_truth, obj.scene, 5, obj.actuated_part)});
  }
  return rows;
}

}  // namespace artic
