#include <artic/rasterizer.hpp>

#include <artic/errors.hpp>
#include <artic/parallel.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numeric>
#include <string>

namespace artic {

namespace {

const double kTail = std::exp(-4.5);
const double kPeak = 1.0 - 5.5 * kTail;

struct PartFrame {
  Mat3 rotation;
  Vec3 centroid;
  Vec3 translation;
};

std::vector<PartFrame> part_frames(const GaussianScene& scene, const PartPoseSet& poses) {
  if (poses.size() != scene.num_parts())
    throw ValidationError("pose set covers " + std::to_string(poses.size()) + " parts, scene has " +
                          std::to_string(scene.num_parts()));
  std::vector<PartFrame> out(poses.size());
  for (std::size_t p = 0; p < poses.size(); ++p) {
    if (!(poses[p].q.norm() > 0)) throw ValidationError("part " + std::to_string(p) + " has a zero quaternion");
    out[p] = {quat_to_matrix<double>(poses[p].q.normalized()), scene.part_centroid(p), poses[p].t};
  }
  return out;
}

Mat3 scene_covariance(const Gaussian& g) {
  const Mat3 r = quat_to_matrix<double>(g.rotation);
  return r * g.scale.cwiseProduct(g.scale).asDiagonal() * r.transpose();
}

void check_gradient_shape(const Image& g, int h, int w, int c, const char* name) {
  if (g.data.empty()) return;
  if (g.height != h || g.width != w || g.channels != c)
    throw ValidationError(std::string("gradient image '") + name + "' has shape " + std::to_string(g.height) + "x" +
                          std::to_string(g.width) + "x" + std::to_string(g.channels) + ", render is " +
                          std::to_string(h) + "x" + std::to_string(w) + "x" + std::to_string(c));
}

}  // namespace

double splat_footprint(double m) {
  if (m >= 9.0) return 0.0;
  return (std::exp(-0.5 * m) - kTail * (5.5 - 0.5 * m)) / kPeak;
}

double splat_footprint_derivative(double m) {
  if (m >= 9.0) return 0.0;
  return (-0.5 * std::exp(-0.5 * m) + 0.5 * kTail) / kPeak;
}

RenderOutput rasterize(const GaussianScene& scene, const PartPoseSet& poses, const Camera& camera,
                       const RenderOptions& options, RenderCache* cache_out) {
  camera.validate();
  const auto frames = part_frames(scene, poses);
  const int h = camera.height, w = camera.width;
  const std::size_t npix = static_cast<std::size_t>(h) * w;
  const Rigid cam_from_world = camera.world_from_camera.inverse();
  const Mat3& wrot = cam_from_world.rotation;
  const auto& gs = scene.gaussians();
  const std::size_t n = gs.size();

  // Project.
  std::vector<RenderCache::Projected> projected(n);
  std::vector<unsigned char> valid(n, 0);
  struct Box {
    int x0, x1, y0, y1;
  };
  std::vector<Box> boxes(n);
  parallel_for(n, options.workers, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      const Gaussian& g = gs[i];
      const PartFrame& pf = frames[scene.part_of(i)];
      const Vec3 x = g.center + (pf.rotation - Mat3::Identity()) * (g.center - pf.centroid) + pf.translation;
      const Vec3 pc = wrot * x + cam_from_world.translation;
      if (pc.z() < options.near_plane) continue;
      const double iz = 1.0 / pc.z();
      Eigen::Matrix<double, 2, 3> jac;
      jac << camera.fx * iz, 0, -camera.fx * pc.x() * iz * iz, 0, camera.fy * iz, -camera.fy * pc.y() * iz * iz;
      RenderCache::Projected s;
      s.index = static_cast<std::uint32_t>(i);
      s.cam = pc;
      s.proj = jac * wrot;
      s.cov_world = pf.rotation * scene_covariance(g) * pf.rotation.transpose();
      const Eigen::Matrix2d cov2 = s.proj * s.cov_world * s.proj.transpose() + options.dilation * Eigen::Matrix2d::Identity();
      const double det = cov2.determinant();
      if (!(det > 1e-12)) continue;
      s.conic << cov2(1, 1) / det, -cov2(0, 1) / det, -cov2(1, 0) / det, cov2(0, 0) / det;
      s.mean = Eigen::Vector2d(camera.fx * pc.x() * iz + camera.cx, camera.fy * pc.y() * iz + camera.cy);
      const double mid = 0.5 * (cov2(0, 0) + cov2(1, 1));
      const double lmax = mid + std::sqrt(std::max(0.0, mid * mid - det));
      const double radius = 3.0 * std::sqrt(lmax);
      Box bx{std::max(0, static_cast<int>(std::ceil(s.mean.x() - radius))),
             std::min(w - 1, static_cast<int>(std::floor(s.mean.x() + radius))),
             std::max(0, static_cast<int>(std::ceil(s.mean.y() - radius))),
             std::min(h - 1, static_cast<int>(std::floor(s.mean.y() + radius)))};
      if (bx.x0 > bx.x1 || bx.y0 > bx.y1 || g.opacity <= 0.0) continue;
      projected[i] = s;
      boxes[i] = bx;
      valid[i] = 1;
    }
  });

  RenderCache local;
  RenderCache& cache = cache_out ? *cache_out : local;
  cache = RenderCache{};
  cache.height = h;
  cache.width = w;
  std::vector<std::uint32_t> order;
  for (std::size_t i = 0; i < n; ++i)
    if (valid[i]) order.push_back(static_cast<std::uint32_t>(i));
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    const double za = projected[a].cam.z(), zb = projected[b].cam.z();
    return za < zb || (za == zb && a < b);
  });
  cache.splats.reserve(order.size());
  for (auto i : order) cache.splats.push_back(projected[i]);

  // Per-splat pixel footprints, gathered in contiguous chunks so the entry
  // order is independent of the worker count.
  std::map<std::size_t, std::vector<RenderCache::Entry>> chunks;
  std::mutex chunk_mutex;
  parallel_for(cache.splats.size(), options.workers, [&](std::size_t b, std::size_t e) {
    std::vector<RenderCache::Entry> local_entries;
    for (std::size_t s = b; s < e; ++s) {
      const auto& sp = cache.splats[s];
      const Box& bx = boxes[sp.index];
      const double opacity = gs[sp.index].opacity;
      for (int y = bx.y0; y <= bx.y1; ++y) {
        for (int x = bx.x0; x <= bx.x1; ++x) {
          const Eigen::Vector2d d(x - sp.mean.x(), y - sp.mean.y());
          const double m = d.dot(sp.conic * d);
          if (m >= 9.0) continue;
          RenderCache::Entry en;
          en.splat = static_cast<std::uint32_t>(s);
          en.pixel = static_cast<std::uint32_t>(y * w + x);
          en.alpha = opacity * splat_footprint(m);
          local_entries.push_back(en);
        }
      }
    }
    std::lock_guard<std::mutex> lock(chunk_mutex);
    chunks[b] = std::move(local_entries);
  });
  for (auto& [start, ents] : chunks) {
    (void)start;
    cache.entries.insert(cache.entries.end(), ents.begin(), ents.end());
  }
  for (std::size_t k = 0; k < cache.entries.size(); ++k) {
    auto& sp = cache.splats[cache.entries[k].splat];
    if (sp.num_entries == 0) sp.first_entry = static_cast<std::uint32_t>(k);
    ++sp.num_entries;
  }

  // Pixel-major index via a stable counting sort.
  cache.pixel_offsets.assign(npix + 1, 0);
  for (const auto& en : cache.entries) ++cache.pixel_offsets[en.pixel + 1];
  std::partial_sum(cache.pixel_offsets.begin(), cache.pixel_offsets.end(), cache.pixel_offsets.begin());
  cache.pixel_entries.resize(cache.entries.size());
  {
    std::vector<std::uint32_t> cursor(cache.pixel_offsets.begin(), cache.pixel_offsets.end() - 1);
    for (std::size_t k = 0; k < cache.entries.size(); ++k)
      cache.pixel_entries[cursor[cache.entries[k].pixel]++] = static_cast<std::uint32_t>(k);
  }

  // Composite.
  const int dim = static_cast<int>(scene.feature_dim());
  RenderOutput out;
  out.depth = Image(h, w, 1);
  out.alpha = Image(h, w, 1);
  if (options.features) out.features = Image(h, w, dim);
  if (options.rgb) out.rgb = Image(h, w, 3);
  parallel_for(npix, options.workers, [&](std::size_t b, std::size_t e) {
    for (std::size_t px = b; px < e; ++px) {
      double trans = 1.0, depth = 0.0;
      double* feat = options.features ? out.features.pixel(px) : nullptr;
      double* rgb = options.rgb ? out.rgb.pixel(px) : nullptr;
      for (std::uint32_t k = cache.pixel_offsets[px]; k < cache.pixel_offsets[px + 1]; ++k) {
        auto& en = cache.entries[cache.pixel_entries[k]];
        const auto& sp = cache.splats[en.splat];
        const Gaussian& g = gs[sp.index];
        en.transmittance = trans;
        const double wgt = trans * en.alpha;
        depth += wgt * sp.cam.z();
        if (feat) {
          const double* f = g.feature.data();
          for (int c = 0; c < dim; ++c) feat[c] += wgt * f[c];
        }
        if (rgb)
          for (int c = 0; c < 3; ++c) rgb[c] += wgt * g.color[c];
        trans *= 1.0 - en.alpha;
      }
      out.depth.data[px] = depth;
      out.alpha.data[px] = 1.0 - trans;
    }
  });
  return out;
}

PoseGradients backward(const GaussianScene& scene, const PartPoseSet& poses, const Camera& camera,
                       const RenderGradients& up, const RenderCache& cache, const RenderOptions& options) {
  camera.validate();
  const auto frames = part_frames(scene, poses);
  const int h = camera.height, w = camera.width;
  const int dim = static_cast<int>(scene.feature_dim());
  if (cache.height != h || cache.width != w) throw ValidationError("render cache does not match camera");
  check_gradient_shape(up.features, h, w, dim, "features");
  check_gradient_shape(up.depth, h, w, 1, "depth");
  check_gradient_shape(up.alpha, h, w, 1, "alpha");
  check_gradient_shape(up.rgb, h, w, 3, "rgb");
  const bool gf = !up.features.data.empty(), gd = !up.depth.data.empty(), ga = !up.alpha.data.empty(),
             gc = !up.rgb.data.empty();
  PoseGradients grads(scene.num_parts());
  if (!(gf || gd || ga || gc)) return grads;

  const auto& gs = scene.gaussians();
  const std::size_t npix = static_cast<std::size_t>(h) * w;
  std::vector<double> d_alpha(cache.entries.size(), 0.0), d_depth(cache.entries.size(), 0.0);

  // Per pixel, back to front: dL/dalpha_k = T_k (s_k - S_{k+1}) where s_k is
  // the upstream-weighted value of splat k and S_{k+1} the upstream-weighted
  // composite of everything behind it.
  parallel_for(npix, options.workers, [&](std::size_t b, std::size_t e) {
    for (std::size_t px = b; px < e; ++px) {
      const std::uint32_t lo = cache.pixel_offsets[px], hi = cache.pixel_offsets[px + 1];
      if (lo == hi) continue;
      const double* uf = gf ? up.features.pixel(px) : nullptr;
      const double* uc = gc ? up.rgb.pixel(px) : nullptr;
      const double ud = gd ? up.depth.data[px] : 0.0;
      const double ua = ga ? up.alpha.data[px] : 0.0;
      double behind = 0.0;
      for (std::uint32_t k = hi; k-- > lo;) {
        const std::uint32_t ei = cache.pixel_entries[k];
        const auto& en = cache.entries[ei];
        const auto& sp = cache.splats[en.splat];
        const Gaussian& g = gs[sp.index];
        double s = ua + ud * sp.cam.z();
        if (uf) {
          const double* f = g.feature.data();
          for (int c = 0; c < dim; ++c) s += uf[c] * f[c];
        }
        if (uc)
          for (int c = 0; c < 3; ++c) s += uc[c] * g.color[c];
        d_alpha[ei] = en.transmittance * (s - behind);
        d_depth[ei] = ud * en.transmittance * en.alpha;
        behind = en.alpha * s + (1.0 - en.alpha) * behind;
      }
    }
  });

  // Per splat: chain through the footprint, the 2D covariance and the
  // perspective projection down to the world-frame center and covariance.
  struct SplatGrad {
    Vec3 center = Vec3::Zero();
    Mat3 cov = Mat3::Zero();
  };
  std::vector<SplatGrad> sgrad(cache.splats.size());
  const Mat3 wrot = camera.world_from_camera.rotation.transpose();
  parallel_for(cache.splats.size(), options.workers, [&](std::size_t b, std::size_t e) {
    for (std::size_t si = b; si < e; ++si) {
      const auto& sp = cache.splats[si];
      const double opacity = gs[sp.index].opacity;
      Eigen::Vector2d g_mean = Eigen::Vector2d::Zero();
      Eigen::Matrix2d g_conic = Eigen::Matrix2d::Zero();
      double g_z = 0.0;
      for (std::uint32_t k = sp.first_entry; k < sp.first_entry + sp.num_entries; ++k) {
        const auto& en = cache.entries[k];
        const double x = static_cast<double>(en.pixel % static_cast<std::uint32_t>(w));
        const double y = static_cast<double>(en.pixel / static_cast<std::uint32_t>(w));
        const Eigen::Vector2d d(x - sp.mean.x(), y - sp.mean.y());
        const double m = d.dot(sp.conic * d);
        const double g_m = d_alpha[k] * opacity * splat_footprint_derivative(m);
        g_mean -= 2.0 * g_m * (sp.conic * d);
        g_conic += g_m * d * d.transpose();
        g_z += d_depth[k];
      }
      if (sp.num_entries == 0) continue;
      const Eigen::Matrix2d g_cov2 = -sp.conic * g_conic * sp.conic;
      const Mat3 g_cov = sp.proj.transpose() * g_cov2 * sp.proj;
      const Eigen::Matrix<double, 2, 3> g_proj = 2.0 * g_cov2 * sp.proj * sp.cov_world;
      const Eigen::Matrix<double, 2, 3> g_jac = g_proj * wrot.transpose();
      const double X = sp.cam.x(), Y = sp.cam.y(), Z = sp.cam.z();
      const double iz = 1.0 / Z, iz2 = iz * iz, iz3 = iz2 * iz;
      const double fx = camera.fx, fy = camera.fy;
      Vec3 g_cam;
      g_cam.x() = g_jac(0, 2) * (-fx * iz2) + g_mean.x() * fx * iz;
      g_cam.y() = g_jac(1, 2) * (-fy * iz2) + g_mean.y() * fy * iz;
      g_cam.z() = g_jac(0, 0) * (-fx * iz2) + g_jac(0, 2) * (2.0 * fx * X * iz3) + g_jac(1, 1) * (-fy * iz2) +
                  g_jac(1, 2) * (2.0 * fy * Y * iz3) - g_mean.x() * fx * X * iz2 - g_mean.y() * fy * Y * iz2 + g_z;
      sgrad[si].center = wrot.transpose() * g_cam;
      sgrad[si].cov = g_cov;
    }
  });

  // Fixed-order reduction into parts.
  for (std::size_t si = 0; si < cache.splats.size(); ++si) {
    const auto& sp = cache.splats[si];
    if (sp.num_entries == 0) continue;
    const std::size_t p = scene.part_of(sp.index);
    const PartFrame& pf = frames[p];
    const Gaussian& g = gs[sp.index];
    grads[p].t += sgrad[si].center;
    grads[p].rotation += sgrad[si].center * (g.center - pf.centroid).transpose() +
                         2.0 * sgrad[si].cov * pf.rotation * scene_covariance(g);
  }
  for (std::size_t p = 0; p < grads.size(); ++p) {
    const Vec4 unit = poses[p].q.normalized();
    grads[p].q = normalize_vjp(poses[p].q, quat_matrix_vjp(unit, grads[p].rotation));
  }
  return grads;
}

PoseGradients backward(const GaussianScene& scene, const PartPoseSet& poses, const Camera& camera,
                       const RenderGradients& upstream, const RenderOptions& options) {
  RenderCache cache;
  RenderOptions fwd = options;
  fwd.features = !upstream.features.data.empty();
  fwd.rgb = !upstream.rgb.data.empty();
  rasterize(scene, poses, camera, fwd, &cache);
  return backward(scene, poses, camera, upstream, cache, options);
}

Image blur_features(const Image& image, int kernel_size) {
  if (kernel_size <= 1) return image;
  if (kernel_size % 2 == 0) ++kernel_size;
  const int r = kernel_size / 2;
  const double inv = 1.0 / kernel_size;
  const int h = image.height, w = image.width, ch = image.channels;
  Image tmp(h, w, ch), out(h, w, ch);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double* dst = tmp.ptr(y, x);
      for (int o = -r; o <= r; ++o) {
        const double* src = image.ptr(y, std::clamp(x + o, 0, w - 1));
        for (int c = 0; c < ch; ++c) dst[c] += src[c] * inv;
      }
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double* dst = out.ptr(y, x);
      for (int o = -r; o <= r; ++o) {
        const double* src = tmp.ptr(std::clamp(y + o, 0, h - 1), x);
        for (int c = 0; c < ch; ++c) dst[c] += src[c] * inv;
      }
    }
  return out;
}

Image blur_features_adjoint(const Image& grad, int kernel_size) {
  if (kernel_size <= 1) return grad;
  if (kernel_size % 2 == 0) ++kernel_size;
  const int r = kernel_size / 2;
  const double inv = 1.0 / kernel_size;
  const int h = grad.height, w = grad.width, ch = grad.channels;
  Image tmp(h, w, ch), out(h, w, ch);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double* src = grad.ptr(y, x);
      for (int o = -r; o <= r; ++o) {
        double* dst = tmp.ptr(std::clamp(y + o, 0, h - 1), x);
        for (int c = 0; c < ch; ++c) dst[c] += src[c] * inv;
      }
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double* src = tmp.ptr(y, x);
      for (int o = -r; o <= r; ++o) {
        double* dst = out.ptr(y, std::clamp(x + o, 0, w - 1));
        for (int c = 0; c < ch; ++c) dst[c] += src[c] * inv;
      }
    }
  return out;
}

Mask object_mask(const Image& alpha, double threshold, int erosion_px) {
  const int h = alpha.height, w = alpha.width;
  Mask base(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) base.set(y, x, alpha.at(y, x) > threshold);
  if (erosion_px <= 0) return base;
  // Separable erosion; pixels outside the image count as background.
  Mask rows(h, w), out(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      bool all = true;
      for (int o = -erosion_px; o <= erosion_px && all; ++o) {
        const int xx = x + o;
        all = xx >= 0 && xx < w && base.at(y, xx);
      }
      rows.set(y, x, all);
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      bool all = true;
      for (int o = -erosion_px; o <= erosion_px && all; ++o) {
        const int yy = y + o;
        all = yy >= 0 && yy < h && rows.at(yy, x);
      }
      out.set(y, x, all);
    }
  return out;
}

}  // namespace artic
