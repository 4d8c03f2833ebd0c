#include <artic/tracker.hpp>

#include <artic/errors.hpp>
#include <artic/io.hpp>
#include <artic/parallel.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <unordered_map>

namespace artic {

namespace {

constexpr double kPi = 3.14159265358979323846;

bool finite(const PoseGradients& g) {
  for (const auto& p : g)
    if (!p.q.allFinite() || !p.t.allFinite()) return false;
  return true;
}

// Translations are optimized in units of `unit` meters.
Eigen::VectorXd pack(const PartPoseSet& poses, double unit) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(7 * poses.size()));
  for (std::size_t p = 0; p < poses.size(); ++p) {
    v.segment<4>(static_cast<Eigen::Index>(7 * p)) = poses[p].q;
    v.segment<3>(static_cast<Eigen::Index>(7 * p + 4)) = poses[p].t / unit;
  }
  return v;
}

PartPoseSet unpack(const Eigen::VectorXd& v, std::size_t offset, std::size_t parts, double unit) {
  PartPoseSet out(parts);
  for (std::size_t p = 0; p < parts; ++p) {
    out[p].q = v.segment<4>(static_cast<Eigen::Index>(offset + 7 * p));
    out[p].t = v.segment<3>(static_cast<Eigen::Index>(offset + 7 * p + 4)) * unit;
  }
  return out;
}

void pack_grad(const PoseGradients& g, Eigen::VectorXd& v, std::size_t offset, double unit) {
  for (std::size_t p = 0; p < g.size(); ++p) {
    v.segment<4>(static_cast<Eigen::Index>(offset + 7 * p)) += g[p].q;
    v.segment<3>(static_cast<Eigen::Index>(offset + 7 * p + 4)) += g[p].t * unit;
  }
}

void renormalize_quats(Eigen::VectorXd& v) {
  for (Eigen::Index o = 0; o + 7 <= v.size(); o += 7) v.segment<4>(o).normalize();
}

}  // namespace

void ObservationFrame::validate(const Camera& camera, std::size_t feature_dim) const {
  if (features.height != camera.height || features.width != camera.width)
    throw ValidationError("feature map is " + std::to_string(features.height) + "x" + std::to_string(features.width) +
                          " but the camera is " + std::to_string(camera.height) + "x" + std::to_string(camera.width));
  if (static_cast<std::size_t>(features.channels) != feature_dim)
    throw ValidationError("frame feature dimension " + std::to_string(features.channels) +
                          " does not match scene dimension " + std::to_string(feature_dim));
  if (mono_depth.height != features.height || mono_depth.width != features.width || mono_depth.channels != 1)
    throw ValidationError("mono depth map must be single-channel and match the feature map size");
  if (!rgb.data.empty() && (rgb.height != features.height || rgb.width != features.width || rgb.channels != 3))
    throw ValidationError("rgb image must be 3-channel and match the feature map size");
}

void TrackerOptions::validate() const {
  weights.validate();
  if (steps < 0 || refine_steps < 0) throw ValidationError("step counts must be non-negative");
  if (!(adam.lr_start > 0) || !(adam.lr_end > 0)) throw ValidationError("learning rates must be positive");
  if (!(alpha_mask > 0 && alpha_mask < 1)) throw ValidationError("alpha mask threshold must lie in (0, 1)");
  if (erode < 0) throw ValidationError("erosion radius must be non-negative");
  if (blur_kernel < 1) throw ValidationError("blur kernel must be at least 1 pixel");
  if (!(boundary_radius >= 0)) throw ValidationError("boundary radius must be non-negative");
  if (!(barron_c > 0)) throw ValidationError("robust kernel scale c must be positive");
  if (seeds < 1) throw ValidationError("initialization needs at least one seed");
  if (init_iters < 0) throw ValidationError("initialization iterations must be non-negative");
  if (ranking_margin < 0) throw ValidationError("ranking margin must be non-negative");
  if (!(translation_unit >= 0)) throw ValidationError("translation unit must be non-negative");
}

BoundaryPairSet find_boundary_pairs(const GaussianScene& scene, double radius) {
  BoundaryPairSet out;
  if (scene.num_parts() < 2 || scene.size() == 0) return out;
  const double cell = std::max(radius, 1e-6);
  struct Key {
    long long x, y, z;
    bool operator==(const Key& o) const { return x == o.x && y == o.y && z == o.z; }
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const {
      return static_cast<std::size_t>(k.x * 73856093LL ^ k.y * 19349663LL ^ k.z * 83492791LL);
    }
  };
  auto key_of = [&](const Vec3& p) {
    return Key{static_cast<long long>(std::floor(p.x() / cell)), static_cast<long long>(std::floor(p.y() / cell)),
               static_cast<long long>(std::floor(p.z() / cell))};
  };
  std::unordered_map<Key, std::vector<std::size_t>, KeyHash> grid;
  const auto& gs = scene.gaussians();
  for (std::size_t i = 0; i < gs.size(); ++i) grid[key_of(gs[i].center)].push_back(i);
  for (std::size_t i = 0; i < gs.size(); ++i) {
    const Key k = key_of(gs[i].center);
    for (long long dx = -1; dx <= 1; ++dx)
      for (long long dy = -1; dy <= 1; ++dy)
        for (long long dz = -1; dz <= 1; ++dz) {
          auto it = grid.find(Key{k.x + dx, k.y + dy, k.z + dz});
          if (it == grid.end()) continue;
          for (std::size_t j : it->second) {
            if (j <= i || scene.part_of(i) == scene.part_of(j)) continue;
            const double d = (gs[i].center - gs[j].center).norm();
            if (d <= radius) out.push_back({i, j, d});
          }
        }
  }
  std::sort(out.begin(), out.end(), [](const BoundaryPair& a, const BoundaryPair& b) {
    return a.i != b.i ? a.i < b.i : a.j < b.j;
  });
  return out;
}

double translation_unit(const GaussianScene& scene, const TrackerOptions& opts) {
  if (opts.translation_unit > 0) return opts.translation_unit;
  const double d = scene.bbox_diagonal();
  return d > 0 ? d : 1.0;
}

std::uint64_t frame_sampling_seed(std::uint64_t base, std::size_t frame_index) {
  // splitmix64 of the combined value
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(frame_index) + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

PreparedFrame prepare_frame(const ObservationFrame& frame, const TrackerOptions& opts) {
  PreparedFrame out;
  if (opts.photometric) {
    if (frame.rgb.data.empty()) throw ValidationError("photometric tracking needs rgb frames");
    out.target = blur_features(frame.rgb, opts.blur_kernel);
  } else {
    out.target = blur_features(frame.features, opts.blur_kernel);
  }
  out.mono_depth = frame.mono_depth;
  return out;
}

FrameObjective evaluate_frame(const GaussianScene& scene, const Camera& camera, const PartPoseSet& poses,
                              const PreparedFrame& frame, const BoundaryPairSet& pairs, const TrackerOptions& opts,
                              std::uint64_t sampling_seed) {
  RenderOptions ro;
  ro.features = !opts.photometric;
  ro.rgb = opts.photometric;
  ro.workers = opts.workers;
  RenderCache cache;
  const RenderOutput out = rasterize(scene, poses, camera, ro, &cache);

  const Image& raw = opts.photometric ? out.rgb : out.features;
  const Image rendered = blur_features(raw, opts.blur_kernel);
  Mask keep(out.alpha.height, out.alpha.width);
  for (std::size_t px = 0; px < out.alpha.pixels(); ++px) keep.data[px] = out.alpha.data[px] >= opts.feature_clip_alpha;

  LossTerms terms;
  terms.feature = feature_mse(rendered, frame.target, keep);
  if (opts.weights.mono > 0) {
    const Mask mask = object_mask(out.alpha, opts.alpha_mask, opts.erode);
    terms.depth = depth_ranking_loss(out.depth, frame.mono_depth, mask, opts.depth_pairs, opts.ranking_margin,
                                     sampling_seed);
  }
  if (opts.weights.arap > 0 && !pairs.empty())
    terms.arap = arap_loss(scene, pairs, poses, opts.barron_alpha, opts.barron_c);

  if (!std::isfinite(terms.feature.value))
    throw PipelineError(opts.photometric ? "non-finite photometric loss" : "non-finite feature loss");
  if (!std::isfinite(terms.depth.value)) throw PipelineError("non-finite depth ranking loss");
  if (!std::isfinite(terms.arap.value)) throw PipelineError("non-finite ARAP loss");

  const WeightedLoss total = total_tracking_loss(terms, opts.weights);
  RenderGradients up;
  if (opts.weights.dino > 0) {
    Image g = blur_features_adjoint(total.feature_grad, opts.blur_kernel);
    (opts.photometric ? up.rgb : up.features) = std::move(g);
  }
  if (!total.depth_grad.data.empty()) up.depth = total.depth_grad;

  FrameObjective obj;
  obj.feature = terms.feature.value;
  obj.depth = terms.depth.value;
  obj.arap = terms.arap.value;
  obj.value = total.value;
  obj.grad = backward(scene, poses, camera, up, cache, ro);
  if (!total.arap_grad.empty()) add_scaled(obj.grad, total.arap_grad);
  if (!finite(obj.grad)) throw PipelineError("non-finite pose gradient");
  return obj;
}

FrameResult optimize_frame(const GaussianScene& scene, const Camera& camera, const PartPoseSet& prev,
                           const ObservationFrame& frame, const BoundaryPairSet& pairs, const TrackerOptions& opts,
                           std::uint64_t sampling_seed, Adam* carry) {
  if (prev.size() != scene.num_parts()) throw ValidationError("previous poses do not cover every part");
  frame.validate(camera, scene.feature_dim());
  const PreparedFrame prepared = prepare_frame(frame, opts);
  const double unit = translation_unit(scene, opts);
  Eigen::VectorXd params = pack(prev, unit);
  Adam fresh(params.size(), opts.adam, opts.steps);
  if (carry && carry->size() != params.size()) throw ValidationError("optimizer state does not match the part count");
  Adam& adam = carry ? *carry : fresh;
  adam.restart_schedule(opts.steps);
  FrameResult res;
  for (int k = 0; k < opts.steps; ++k) {
    const PartPoseSet poses = unpack(params, 0, scene.num_parts(), unit);
    const FrameObjective obj = evaluate_frame(scene, camera, poses, prepared, pairs, opts, sampling_seed);
    res.loss_trace.push_back(obj.value);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(params.size());
    pack_grad(obj.grad, g, 0, unit);
    adam.step(params, g);
    renormalize_quats(params);
  }
  res.poses = unpack(params, 0, scene.num_parts(), unit);
  for (auto& p : res.poses) p.q.normalize();
  return res;
}

TrackResult track_video(const GaussianScene& scene, const Camera& camera, const std::vector<ObservationFrame>& frames,
                        const TrackerOptions& opts, const PartPoseSet& initial) {
  opts.validate();
  if (frames.empty()) throw ValidationError("tracking needs at least one frame");
  if (!initial.empty() && initial.size() != scene.num_parts())
    throw ValidationError("initial poses do not cover every part");
  const BoundaryPairSet pairs = find_boundary_pairs(scene, opts.boundary_radius);
  TrackResult res;
  PartPoseSet prev = initial.empty() ? identity_poses(scene.num_parts()) : initial;
  Adam moments(static_cast<Eigen::Index>(7 * scene.num_parts()), opts.adam, opts.steps);
  for (std::size_t t = 0; t < frames.size(); ++t) {
    FrameResult fr;
    try {
      fr = optimize_frame(scene, camera, prev, frames[t], pairs, opts, frame_sampling_seed(opts.rng_seed, t),
                          opts.carry_moments ? &moments : nullptr);
    } catch (const PipelineError& e) {
      throw PipelineError("frame " + std::to_string(t) + ": " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError("frame " + std::to_string(t) + ": " + e.what());
    }
    res.trajectory.frames.push_back(fr.poses);
    res.trajectory.timestamps.push_back(frames[t].timestamp);
    res.loss_traces.push_back(std::move(fr.loss_trace));
    prev = res.trajectory.frames.back();
  }
  return res;
}

RefineResult refine_trajectory(const GaussianScene& scene, const Camera& camera,
                               const std::vector<ObservationFrame>& frames, const Trajectory& trajectory,
                               const TrackerOptions& opts) {
  opts.validate();
  if (frames.size() != trajectory.size())
    throw ValidationError("trajectory has " + std::to_string(trajectory.size()) + " frames but " +
                          std::to_string(frames.size()) + " observations were given");
  trajectory.validate(scene.num_parts());
  const std::size_t T = frames.size(), P = scene.num_parts();
  std::vector<PreparedFrame> prepared(T);
  for (std::size_t t = 0; t < T; ++t) {
    frames[t].validate(camera, scene.feature_dim());
    prepared[t] = prepare_frame(frames[t], opts);
  }
  const BoundaryPairSet pairs = find_boundary_pairs(scene, opts.boundary_radius);

  const double unit = translation_unit(scene, opts);
  Eigen::VectorXd params(static_cast<Eigen::Index>(7 * P * T));
  for (std::size_t t = 0; t < T; ++t) params.segment(static_cast<Eigen::Index>(7 * P * t), 7 * P) = pack(trajectory.frames[t], unit);
  Adam adam(params.size(), opts.adam, opts.refine_steps);

  // Frames are evaluated concurrently; each render then runs single-threaded.
  TrackerOptions inner = opts;
  inner.workers = 1;
  RefineResult res;
  for (int k = 0; k < opts.refine_steps; ++k) {
    Trajectory cur;
    cur.timestamps = trajectory.timestamps;
    for (std::size_t t = 0; t < T; ++t) cur.frames.push_back(unpack(params, 7 * P * t, P, unit));
    std::vector<FrameObjective> objs(T);
    std::vector<std::string> errors(T);
    parallel_for(T, opts.workers, [&](std::size_t b, std::size_t e) {
      for (std::size_t t = b; t < e; ++t) {
        try {
          objs[t] = evaluate_frame(scene, camera, cur.frames[t], prepared[t], pairs, inner,
                                   frame_sampling_seed(opts.rng_seed, t));
        } catch (const std::exception& ex) {
          errors[t] = ex.what();
        }
      }
    });
    for (std::size_t t = 0; t < T; ++t)
      if (!errors[t].empty()) throw PipelineError("frame " + std::to_string(t) + ": " + errors[t]);

    Eigen::VectorXd g = Eigen::VectorXd::Zero(params.size());
    double value = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      value += objs[t].value;
      pack_grad(objs[t].grad, g, 7 * P * t, unit);
    }
    if (opts.weights.temporal > 0) {
      const TrajectoryLoss tl = temporal_laplacian(scene, cur);
      if (!std::isfinite(tl.value)) throw PipelineError("non-finite temporal smoothness loss");
      value += opts.weights.temporal * tl.value;
      for (std::size_t t = 0; t < T; ++t) {
        PoseGradients scaled(P);
        add_scaled(scaled, tl.grad[t], opts.weights.temporal);
        pack_grad(scaled, g, 7 * P * t, unit);
      }
    }
    res.loss_trace.push_back(value);
    adam.step(params, g);
    renormalize_quats(params);
  }
  res.trajectory.timestamps = trajectory.timestamps;
  for (std::size_t t = 0; t < T; ++t) {
    PartPoseSet poses = unpack(params, 7 * P * t, P, unit);
    for (auto& p : poses) p.q.normalize();
    res.trajectory.frames.push_back(std::move(poses));
  }
  return res;
}

std::vector<std::pair<std::size_t, std::size_t>> mutual_feature_matches(const GaussianScene& scene,
                                                                         const Image& features) {
  const auto& gs = scene.gaussians();
  const Eigen::Index D = static_cast<Eigen::Index>(scene.feature_dim());
  if (features.channels != D) throw ValidationError("feature map dimension does not match the scene");

  std::vector<std::size_t> gidx;
  Eigen::MatrixXd G(D, static_cast<Eigen::Index>(gs.size()));
  for (std::size_t i = 0; i < gs.size(); ++i) {
    const double n = gs[i].feature.norm();
    if (n < 1e-12) continue;
    G.col(static_cast<Eigen::Index>(gidx.size())) = gs[i].feature / n;
    gidx.push_back(i);
  }
  G.conservativeResize(D, static_cast<Eigen::Index>(gidx.size()));

  std::vector<std::size_t> pidx;
  for (std::size_t px = 0; px < features.pixels(); ++px) {
    const double* f = features.pixel(px);
    double n2 = 0.0;
    for (Eigen::Index c = 0; c < D; ++c) n2 += f[c] * f[c];
    if (n2 > 1e-24) pidx.push_back(px);
  }
  if (gidx.empty() || pidx.empty()) return {};

  std::vector<double> g_best(gidx.size(), -2.0), p_best(pidx.size(), -2.0);
  std::vector<std::size_t> g_arg(gidx.size(), 0), p_arg(pidx.size(), 0);
  constexpr std::size_t kBlock = 512;
  Eigen::MatrixXd Pm(D, static_cast<Eigen::Index>(kBlock));
  for (std::size_t b = 0; b < pidx.size(); b += kBlock) {
    const std::size_t e = std::min(pidx.size(), b + kBlock);
    const Eigen::Index n = static_cast<Eigen::Index>(e - b);
    for (std::size_t k = b; k < e; ++k) {
      const Eigen::Map<const Eigen::VectorXd> f(features.pixel(pidx[k]), D);
      Pm.col(static_cast<Eigen::Index>(k - b)) = f / f.norm();
    }
    const Eigen::MatrixXd S = G.transpose() * Pm.leftCols(n);  // gaussians x pixels
    for (Eigen::Index c = 0; c < n; ++c) {
      const std::size_t k = b + static_cast<std::size_t>(c);
      for (Eigen::Index r = 0; r < S.rows(); ++r) {
        const double s = S(r, c);
        if (s > p_best[k]) {
          p_best[k] = s;
          p_arg[k] = static_cast<std::size_t>(r);
        }
        if (s > g_best[static_cast<std::size_t>(r)]) {
          g_best[static_cast<std::size_t>(r)] = s;
          g_arg[static_cast<std::size_t>(r)] = k;
        }
      }
    }
  }
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t r = 0; r < gidx.size(); ++r)
    if (p_arg[g_arg[r]] == r) out.emplace_back(gidx[r], pidx[g_arg[r]]);
  return out;
}

namespace {

double median(std::vector<double> v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) {
    const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    m = 0.5 * (m + lo);
  }
  return m;
}

/// Camera-frame distance along the optical axis at which to place the object centroid.
double placement_depth(const GaussianScene& scene, const Camera& camera, const ObservationFrame& frame,
                       const std::vector<std::pair<std::size_t, std::size_t>>& matches, const Image* metric) {
  std::vector<double> vals;
  if (metric) {
    for (const auto& [g, px] : matches)
      if (std::isfinite(metric->data[px]) && metric->data[px] > 0) vals.push_back(metric->data[px]);
    if (vals.empty()) throw PipelineError("metric depth has no valid samples on the matched pixels");
    return median(std::move(vals));
  }
  // Affine fit z = a * mono + b against the matched gaussians' camera-frame depths.
  const Rigid cam_from_world = camera.world_from_camera.inverse();
  const std::size_t n = matches.size();
  double sm = 0, sz = 0, smm = 0, smz = 0;
  std::vector<double> zs;
  for (const auto& [g, px] : matches) {
    const double m = frame.mono_depth.data[px];
    const double z = (cam_from_world * scene.gaussians()[g].center).z();
    sm += m;
    sz += z;
    smm += m * m;
    smz += m * z;
    zs.push_back(z);
  }
  const double var = smm - sm * sm / static_cast<double>(n);
  if (n < 2 || var <= 1e-18 * std::max(1.0, smm)) return median(std::move(zs));
  const double a = (smz - sm * sz / static_cast<double>(n)) / var;
  const double b = (sz - a * sm) / static_cast<double>(n);
  for (const auto& [g, px] : matches) vals.push_back(a * frame.mono_depth.data[px] + b);
  const double d = median(std::move(vals));
  return d > 1e-3 ? d : median(std::move(zs));
}

}  // namespace

InitResult initialize_pose(const GaussianScene& scene, const Camera& camera, const ObservationFrame& frame,
                           const TrackerOptions& opts, const Image* metric_depth) {
  opts.validate();
  camera.validate();
  frame.validate(camera, scene.feature_dim());
  if (metric_depth && (metric_depth->height != camera.height || metric_depth->width != camera.width))
    throw ValidationError("metric depth map does not match the camera size");

  const PreparedFrame prepared = prepare_frame(frame, opts);
  const Image blurred_features = opts.photometric ? blur_features(frame.features, opts.blur_kernel) : prepared.target;
  const auto matches = mutual_feature_matches(scene, blurred_features);
  if (matches.empty()) throw PipelineError("object not found in frame");

  double u = 0, v = 0;
  for (const auto& [g, px] : matches) {
    u += static_cast<double>(px % static_cast<std::size_t>(camera.width));
    v += static_cast<double>(px / static_cast<std::size_t>(camera.width));
  }
  u /= static_cast<double>(matches.size());
  v /= static_cast<double>(matches.size());
  const double depth = placement_depth(scene, camera, frame, matches, metric_depth);
  const Vec3 ray((u - camera.cx) / camera.fx, (v - camera.cy) / camera.fy, 1.0);
  const Vec3 target = camera.world_from_camera * Vec3(depth * ray);
  const Vec3 c_obj = scene.object_centroid();

  InitResult res;
  res.matches = matches.size();
  res.placement = target;
  const std::size_t n_seeds = static_cast<std::size_t>(opts.seeds);
  res.seed_losses.assign(n_seeds, 0.0);
  std::vector<PartPose> finals(n_seeds);

  TrackerOptions inner = opts;
  inner.workers = n_seeds > 1 ? 1 : opts.workers;
  AdamOptions adam_opts = opts.adam;
  const std::uint64_t seed = frame_sampling_seed(opts.rng_seed, 0);
  const BoundaryPairSet no_pairs;
  const double unit = translation_unit(scene, opts);

  auto objective = [&](const Eigen::Matrix<double, 7, 1>& x, Eigen::Matrix<double, 7, 1>* grad) {
    PartPose obj;
    obj.q = x.head<4>();
    obj.t = x.tail<3>() * unit;
    const PartPoseSet poses = object_pose_to_parts(scene, obj);
    const FrameObjective f = evaluate_frame(scene, camera, poses, prepared, no_pairs, inner, seed);
    if (grad) {
      Mat3 gr = Mat3::Zero();
      Vec3 gt = Vec3::Zero();
      for (std::size_t p = 0; p < poses.size(); ++p) {
        gt += f.grad[p].t;
        gr += f.grad[p].rotation + f.grad[p].t * (scene.part_centroid(p) - c_obj).transpose();
      }
      grad->head<4>() = normalize_vjp(obj.q, quat_matrix_vjp(obj.q.normalized(), gr));
      grad->tail<3>() = gt * unit;
    }
    return f.value;
  };

  std::vector<std::string> errors(n_seeds);
  parallel_for(n_seeds, opts.workers, [&](std::size_t b, std::size_t e) {
    for (std::size_t k = b; k < e; ++k) {
      try {
        const double yaw = 2.0 * kPi * static_cast<double>(k) / static_cast<double>(n_seeds);
        Eigen::VectorXd x(7);
        x.head<4>() = quat_from_axis_angle(scene.gravity_axis(), yaw);
        x.tail<3>() = (target - c_obj) / unit;
        Adam adam(7, adam_opts, opts.init_iters);
        Eigen::Matrix<double, 7, 1> g;
        for (int it = 0; it < opts.init_iters; ++it) {
          objective(x, &g);
          adam.step(x, g);
          x.head<4>().normalize();
        }
        res.seed_losses[k] = objective(x, nullptr);
        finals[k].q = x.head<4>();
        finals[k].t = x.tail<3>() * unit;
      } catch (const std::exception& ex) {
        errors[k] = ex.what();
      }
    }
  });
  for (std::size_t k = 0; k < n_seeds; ++k)
    if (!errors[k].empty()) throw PipelineError("initialization seed " + std::to_string(k) + ": " + errors[k]);

  res.best_seed = static_cast<std::size_t>(
      std::min_element(res.seed_losses.begin(), res.seed_losses.end()) - res.seed_losses.begin());
  res.object = finals[res.best_seed];
  res.object.q = quat_canonical(res.object.q);
  res.part_poses = object_pose_to_parts(scene, res.object);
  return res;
}

namespace {

std::string frame_name(std::size_t i, const char* ext) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%05zu.%s", i, ext);
  return buf;
}

}  // namespace

void save_frames(const std::filesystem::path& dir, const FrameSequence& seq) {
  std::filesystem::create_directories(dir);
  Json frames = Json::array();
  for (std::size_t i = 0; i < seq.frames.size(); ++i) {
    const ObservationFrame& f = seq.frames[i];
    Json j;
    j["timestamp"] = f.timestamp;
    j["features"] = frame_name(i, "feat");
    j["depth"] = frame_name(i, "depth");
    write_tensor(dir / frame_name(i, "feat"), f.features);
    write_tensor(dir / frame_name(i, "depth"), f.mono_depth);
    if (!f.rgb.data.empty()) {
      j["rgb"] = frame_name(i, "rgb");
      write_tensor(dir / frame_name(i, "rgb"), f.rgb);
    }
    if (!f.hands.empty()) {
      Json hands = Json::array();
      for (const auto& h : f.hands) hands.push_back({{"thumb", to_json(h.thumb)}, {"index", to_json(h.index)}});
      j["hands"] = hands;
    }
    frames.push_back(j);
  }
  write_json(dir / "frames.json", Json{{"version", 1}, {"camera", to_json(seq.camera)}, {"frames", frames}});
}

FrameSequence load_frames(const std::filesystem::path& dir) {
  const std::filesystem::path index = std::filesystem::is_directory(dir) ? dir / "frames.json" : dir;
  const std::filesystem::path base = index.parent_path();
  const Json j = read_json(index);
  FrameSequence seq;
  seq.camera = camera_from_json(require(j, "camera"));
  seq.camera.validate();
  for (const Json& fj : require(j, "frames")) {
    ObservationFrame f;
    f.timestamp = require(fj, "timestamp").get<double>();
    f.features = read_tensor(base / require(fj, "features").get<std::string>());
    f.mono_depth = read_tensor(base / require(fj, "depth").get<std::string>());
    if (fj.contains("rgb")) f.rgb = read_tensor(base / fj["rgb"].get<std::string>());
    if (fj.contains("hands"))
      for (const Json& h : fj["hands"]) f.hands.push_back({vec3_from_json(require(h, "thumb")), vec3_from_json(require(h, "index"))});
    seq.frames.push_back(std::move(f));
  }
  return seq;
}

std::string loss_traces_csv(const std::vector<std::vector<double>>& traces) {
  std::ostringstream os;
  os.precision(17);
  os << "frame,step,loss\n";
  for (std::size_t t = 0; t < traces.size(); ++t)
    for (std::size_t k = 0; k < traces[t].size(); ++k) os << t << ',' << k << ',' << traces[t][k] << '\n';
  return os.str();
}

}  // namespace artic
