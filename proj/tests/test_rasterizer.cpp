#include <artic/errors.hpp>
#include <artic/rasterizer.hpp>

#include <gtest/gtest.h>

#include "test_support.hpp"

namespace artic {
namespace {

using testing::small_camera;

GaussianScene single_gaussian_scene(const Vec3& center, double scale, double opacity, std::size_t dim = 2) {
  Gaussian g;
  g.center = center;
  g.scale = Vec3::Constant(scale);
  g.opacity = opacity;
  g.feature = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(dim));
  return GaussianScene({g}, {{0}}, dim);
}

TEST(Rasterizer, EmptySceneRendersNothing) {
  GaussianScene scene({}, {}, 4);
  const RenderOutput out = rasterize(scene, {}, small_camera());
  for (double v : out.alpha.data) EXPECT_EQ(v, 0.0);
  for (double v : out.features.data) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(out.features.channels, 4);
}

TEST(Rasterizer, ZeroSizeImageIsRejected) {
  GaussianScene scene({}, {}, 4);
  Camera cam = small_camera();
  cam.width = 0;
  EXPECT_THROW(rasterize(scene, {}, cam), ValidationError);
}

TEST(Rasterizer, PoseCountMismatchIsRejected) {
  const auto scene = single_gaussian_scene(Vec3(0, 0, 2), 0.05, 0.8);
  EXPECT_THROW(rasterize(scene, PartPoseSet(2), small_camera()), ValidationError);
}

TEST(Rasterizer, OnAxisIsotropicGaussianMatchesBruteForce) {
  const double z = 2.0, s = 0.1, opacity = 0.8;
  const Camera cam = small_camera(33, 40.0);  // cx = cy = 16 lands on a pixel
  const auto scene = single_gaussian_scene(Vec3(0, 0, z), s, opacity);
  const RenderOutput out = rasterize(scene, identity_poses(1), cam);

  // Independent per-pixel evaluation: isotropic projected variance plus dilation.
  const double var = std::pow(cam.fx * s / z, 2) + 0.3;
  const double tail = std::exp(-4.5);
  double max_alpha = -1.0;
  int arg_x = -1, arg_y = -1;
  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      const double m = (std::pow(x - cam.cx, 2) + std::pow(y - cam.cy, 2)) / var;
      const double expected = m >= 9 ? 0.0 : opacity * (std::exp(-m / 2) - tail * (5.5 - m / 2)) / (1 - 5.5 * tail);
      EXPECT_NEAR(out.alpha.at(y, x), expected, 1e-12) << x << "," << y;
      if (out.alpha.at(y, x) > max_alpha) {
        max_alpha = out.alpha.at(y, x);
        arg_x = x;
        arg_y = y;
      }
    }
  }
  EXPECT_EQ(arg_x, 16);
  EXPECT_EQ(arg_y, 16);
  EXPECT_NEAR(max_alpha, opacity, 1e-12);
  // Radial symmetry: the 8 symmetric images of a pixel agree.
  for (int dy = 0; dy <= 5; ++dy)
    for (int dx = 0; dx <= 5; ++dx) {
      const double ref = out.alpha.at(16 + dy, 16 + dx);
      EXPECT_NEAR(out.alpha.at(16 - dy, 16 - dx), ref, 1e-14);
      EXPECT_NEAR(out.alpha.at(16 + dx, 16 + dy), ref, 1e-14);
      EXPECT_NEAR(out.alpha.at(16 - dx, 16 + dy), ref, 1e-14);
    }
}

TEST(Rasterizer, OpaqueFrontGaussianOccludesDepth) {
  Gaussian front, back;
  front.center = Vec3(0, 0, 1.0);
  front.scale = Vec3::Constant(0.05);
  front.opacity = 0.999;
  back.center = Vec3(0, 0, 2.0);
  back.scale = Vec3::Constant(0.1);
  back.opacity = 0.9;
  front.feature = back.feature = Eigen::VectorXd::Zero(1);
  // Back gaussian listed first so ordering must come from depth, not index.
  GaussianScene scene({back, front}, {{0, 1}}, 1);
  const Camera cam = small_camera(33, 40.0);
  const RenderOutput out = rasterize(scene, identity_poses(1), cam);
  EXPECT_NEAR(out.depth.at(16, 16), 1.0, 0.01);
  EXPECT_GT(out.alpha.at(16, 16), 0.999);
}

TEST(Rasterizer, CompositingWeightsSumToAlpha) {
  std::mt19937_64 rng(3);
  const auto scene = testing::random_scene(rng, 40, 2, 3);
  // Every feature equal to 1 makes each feature channel the sum of weights.
  std::vector<Gaussian> gs = scene.gaussians();
  for (auto& g : gs) g.feature.setOnes();
  GaussianScene ones(gs, scene.parts(), 3);
  const RenderOutput out = rasterize(ones, identity_poses(2), small_camera());
  for (std::size_t px = 0; px < out.alpha.pixels(); ++px) {
    EXPECT_GE(out.alpha.data[px], 0.0);
    EXPECT_LE(out.alpha.data[px], 1.0);
    EXPECT_NEAR(out.features.pixel(px)[0], out.alpha.data[px], 1e-12);
  }
}

TEST(Rasterizer, OutputIndependentOfWorkerCount) {
  std::mt19937_64 rng(11);
  const auto scene = testing::random_scene(rng, 50, 3, 4);
  const auto poses = testing::random_poses(rng, 3);
  const Camera cam = small_camera();
  RenderGradients up{testing::random_image(rng, 32, 32, 4), testing::random_image(rng, 32, 32, 1),
                     testing::random_image(rng, 32, 32, 1), testing::random_image(rng, 32, 32, 3)};
  RenderOptions one, many;
  many.workers = 4;
  RenderCache c1, c4;
  const auto o1 = rasterize(scene, poses, cam, one, &c1);
  const auto o4 = rasterize(scene, poses, cam, many, &c4);
  EXPECT_EQ(o1.features.data, o4.features.data);
  EXPECT_EQ(o1.depth.data, o4.depth.data);
  EXPECT_EQ(o1.alpha.data, o4.alpha.data);
  const auto g1 = testing::flatten(backward(scene, poses, cam, up, c1, one));
  const auto g4 = testing::flatten(backward(scene, poses, cam, up, c4, many));
  EXPECT_EQ(g1, g4);
}

TEST(RasterizerBackward, ZeroUpstreamGivesZeroGradient) {
  std::mt19937_64 rng(5);
  const auto scene = testing::random_scene(rng, 30, 2, 4);
  const Camera cam = small_camera();
  RenderGradients up{Image(32, 32, 4), Image(32, 32, 1), Image(32, 32, 1), Image(32, 32, 3)};
  for (double v : testing::flatten(backward(scene, identity_poses(2), cam, up))) EXPECT_EQ(v, 0.0);
}

TEST(RasterizerBackward, ShapeMismatchIsRejected) {
  std::mt19937_64 rng(5);
  const auto scene = testing::random_scene(rng, 10, 1, 4);
  RenderGradients up;
  up.features = Image(16, 16, 4);
  EXPECT_THROW(backward(scene, identity_poses(1), small_camera(), up), ValidationError);
}

TEST(RasterizerBackward, PartOutsideFrustumHasZeroTranslationGradient) {
  std::mt19937_64 rng(9);
  auto base = testing::random_scene(rng, 20, 2, 2);
  std::vector<Gaussian> gs = base.gaussians();
  for (std::size_t i : base.parts()[1]) gs[i].center += Vec3(50.0, 0, 0);
  GaussianScene scene(gs, base.parts(), 2);
  RenderGradients up{testing::random_image(rng, 32, 32, 2), testing::random_image(rng, 32, 32, 1), {}, {}};
  const auto g = backward(scene, identity_poses(2), small_camera(), up);
  EXPECT_EQ(g[1].t, Vec3::Zero());
  EXPECT_EQ(g[1].q, Vec4::Zero());
  EXPECT_GT(g[0].t.norm(), 0.0);
}

class RasterizerGradientCheck : public ::testing::TestWithParam<int> {};

TEST_P(RasterizerGradientCheck, MatchesCentralDifferences) {
  std::mt19937_64 rng(static_cast<std::uint64_t>(GetParam()));
  const std::size_t parts = 1 + GetParam() % 3;
  const auto scene = testing::random_scene(rng, 50, parts, 4);
  const auto poses = testing::random_poses(rng, parts);
  const Camera cam = small_camera();
  RenderGradients up{testing::random_image(rng, 32, 32, 4), testing::random_image(rng, 32, 32, 1),
                     testing::random_image(rng, 32, 32, 1), testing::random_image(rng, 32, 32, 3)};
  auto loss = [&](const PartPoseSet& p) {
    const auto o = rasterize(scene, p, cam);
    return testing::dot(o.features, up.features) + testing::dot(o.depth, up.depth) +
           testing::dot(o.alpha, up.alpha) + testing::dot(o.rgb, up.rgb);
  };
  const auto analytic = testing::flatten(backward(scene, poses, cam, up));
  const auto numeric = testing::numeric_pose_gradient(poses, loss);
  const double scale = testing::max_abs(numeric);
  ASSERT_GT(scale, 0.0);
  for (std::size_t k = 0; k < analytic.size(); ++k)
    EXPECT_LT(testing::relative_error(analytic[k], numeric[k], scale), 1e-3)
        << "component " << k << ": analytic " << analytic[k] << " numeric " << numeric[k];
}

INSTANTIATE_TEST_SUITE_P(Seeds, RasterizerGradientCheck, ::testing::Range(1, 6));

TEST(BlurFeatures, KernelOneIsIdentity) {
  std::mt19937_64 rng(1);
  const Image img = testing::random_image(rng, 8, 9, 3);
  EXPECT_EQ(blur_features(img, 1).data, img.data);
}

TEST(BlurFeatures, ConstantImageUnchanged) {
  const Image img(7, 6, 2, 0.25);
  for (double v : blur_features(img, 5).data) EXPECT_NEAR(v, 0.25, 1e-15);
}

TEST(BlurFeatures, ImpulseSpreadsOverNeighbors) {
  Image row(1, 7, 1);
  row.at(0, 3) = 1.0;
  const Image out = blur_features(row, 3);
  EXPECT_NEAR(out.at(0, 2), 1.0 / 3, 1e-15);
  EXPECT_NEAR(out.at(0, 3), 1.0 / 3, 1e-15);
  EXPECT_NEAR(out.at(0, 4), 1.0 / 3, 1e-15);
  EXPECT_EQ(out.at(0, 1), 0.0);
  EXPECT_EQ(out.at(0, 5), 0.0);
}

TEST(BlurFeatures, EvenKernelRoundsUp) {
  std::mt19937_64 rng(2);
  const Image img = testing::random_image(rng, 6, 6, 1);
  EXPECT_EQ(blur_features(img, 4).data, blur_features(img, 5).data);
}

TEST(BlurFeatures, AdjointSatisfiesInnerProductIdentity) {
  std::mt19937_64 rng(4);
  const Image a = testing::random_image(rng, 9, 11, 2), b = testing::random_image(rng, 9, 11, 2);
  EXPECT_NEAR(testing::dot(blur_features(a, 5), b), testing::dot(a, blur_features_adjoint(b, 5)), 1e-12);
}

TEST(ObjectMask, FullAlphaNoErosionIsAllTrue) {
  const Image alpha(10, 12, 1, 1.0);
  EXPECT_EQ(object_mask(alpha, 0.9, 0).count(), 120u);
}

TEST(ObjectMask, SmallBlockErodesAway) {
  Image alpha(30, 30, 1, 0.0);
  for (int y = 10; y < 20; ++y)
    for (int x = 10; x < 20; ++x) alpha.at(y, x) = 1.0;
  EXPECT_EQ(object_mask(alpha, 0.9, 0).count(), 100u);
  EXPECT_EQ(object_mask(alpha, 0.9, 4).count(), 4u);  // 10 - 2*4 = 2 per side
  EXPECT_EQ(object_mask(alpha, 0.9, 5).count(), 0u);
}

TEST(ObjectMask, ThresholdIsStrict) {
  const Image alpha(3, 3, 1, 0.9);
  EXPECT_EQ(object_mask(alpha, 0.9, 0).count(), 0u);
}

}  // namespace
}  // namespace artic
