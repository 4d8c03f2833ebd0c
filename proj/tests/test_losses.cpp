#include <artic/errors.hpp>
#include <artic/losses.hpp>

#include <gtest/gtest.h>

#include "test_support.hpp"

namespace artic {
namespace {

TEST(FeatureMse, IdenticalMapsGiveZero) {
  std::mt19937_64 rng(1);
  const Image a = testing::random_image(rng, 5, 6, 3);
  const auto l = feature_mse(a, a);
  EXPECT_EQ(l.value, 0.0);
  for (double g : l.grad.data) EXPECT_EQ(g, 0.0);
}

TEST(FeatureMse, ConstantUnitDifferenceGivesOne) {
  EXPECT_DOUBLE_EQ(feature_mse(Image(4, 4, 2, 0.0), Image(4, 4, 2, 1.0)).value, 1.0);
}

TEST(FeatureMse, SingleDifferingPixelMatchesDirectSum) {
  Image a(4, 5, 3, 0.2), b(4, 5, 3, 0.2);
  b.at(2, 3, 1) = 0.7;
  // diff^2 / (pixels * D)
  EXPECT_NEAR(feature_mse(a, b).value, 0.25 / (20.0 * 3.0), 1e-15);
}

TEST(FeatureMse, ClippedPixelsAreIgnored) {
  Image a(2, 2, 1, 0.0), b(2, 2, 1, 1.0);
  Mask keep(2, 2, true);
  keep.set(0, 0, false);
  b.at(0, 0) = 10.0;
  const auto l = feature_mse(a, b, keep);
  EXPECT_DOUBLE_EQ(l.value, 1.0);
  EXPECT_EQ(l.grad.at(0, 0), 0.0);
}

TEST(FeatureMse, ShapeMismatchRejected) {
  EXPECT_THROW(feature_mse(Image(2, 2, 3), Image(2, 2, 4)), ValidationError);
}

TEST(FeatureMse, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(2);
  Image a = testing::random_image(rng, 3, 4, 2);
  const Image b = testing::random_image(rng, 3, 4, 2);
  const auto l = feature_mse(a, b);
  for (std::size_t k = 0; k < a.data.size(); ++k) {
    Image p = a, m = a;
    p.data[k] += 1e-4;
    m.data[k] -= 1e-4;
    const double fd = (feature_mse(p, b).value - feature_mse(m, b).value) / 2e-4;
    EXPECT_LT(testing::relative_error(l.grad.data[k], fd, 1.0), 1e-3);
  }
}

TEST(DepthRanking, ConsistentOrdersGiveZero) {
  std::mt19937_64 rng(3);
  const Image d = testing::random_image(rng, 8, 8, 1);
  EXPECT_EQ(depth_ranking_loss(d, d, Mask(8, 8, true), 1000, 0.0, 1).value, 0.0);
}

TEST(DepthRanking, SinglePairHandComputed) {
  Image rendered(1, 2, 1), mono(1, 2, 1);
  mono.data = {0.1, 0.2};    // a closer than b
  rendered.data = {2.0, 1.0};  // order violated by 1
  const auto l = depth_ranking_loss(rendered, mono, Mask(1, 2, true), 10, 0.0, 7);
  EXPECT_DOUBLE_EQ(l.value, 1.0);
  EXPECT_DOUBLE_EQ(l.grad.data[0], 1.0);
  EXPECT_DOUBLE_EQ(l.grad.data[1], -1.0);
}

TEST(DepthRanking, DegenerateMaskGivesZero) {
  Image d(3, 3, 1, 1.0);
  Mask one(3, 3);
  one.set(1, 1, true);
  EXPECT_EQ(depth_ranking_loss(d, d, one, 100, 0.01, 1).value, 0.0);
  EXPECT_EQ(depth_ranking_loss(d, d, Mask(3, 3), 100, 0.01, 1).value, 0.0);
}

TEST(DepthRanking, InvariantUnderMonotoneMonoTransforms) {
  std::mt19937_64 rng(4);
  const Image rendered = testing::random_image(rng, 16, 16, 1);
  Image mono = testing::random_image(rng, 16, 16, 1);
  Mask mask(16, 16, true);
  mask.set(0, 0, false);
  const auto base = depth_ranking_loss(rendered, mono, mask, 5000, 1e-3, 42);
  EXPECT_GT(base.value, 0.0);
  const std::vector<std::function<double(double)>> transforms = {
      [](double v) { return 3.0 * v + 1.0; }, [](double v) { return std::exp(v); },
      [](double v) { return std::atan(v); }, [](double v) { return v * v * v; },
      [](double v) { return std::exp(2.0 * v) + 5.0 * v; }};
  for (const auto& f : transforms) {
    Image m2 = mono;
    for (double& v : m2.data) v = f(v);
    const auto l = depth_ranking_loss(rendered, m2, mask, 5000, 1e-3, 42);
    EXPECT_EQ(l.value, base.value);
    EXPECT_EQ(l.grad.data, base.grad.data);
  }
}

TEST(DepthRanking, ReproducibleFromSeed) {
  std::mt19937_64 rng(5);
  const Image r = testing::random_image(rng, 10, 10, 1), m = testing::random_image(rng, 10, 10, 1);
  const Mask mask(10, 10, true);
  EXPECT_EQ(depth_ranking_loss(r, m, mask, 300, 0.0, 9).grad.data, depth_ranking_loss(r, m, mask, 300, 0.0, 9).grad.data);
  EXPECT_NE(depth_ranking_loss(r, m, mask, 300, 0.0, 9).value, depth_ranking_loss(r, m, mask, 300, 0.0, 10).value);
}

TEST(DepthRanking, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(6);
  Image r = testing::random_image(rng, 6, 6, 1);
  const Image m = testing::random_image(rng, 6, 6, 1);
  const Mask mask(6, 6, true);
  const auto l = depth_ranking_loss(r, m, mask, 200, 0.05, 3);
  for (std::size_t k = 0; k < r.data.size(); ++k) {
    Image p = r, q = r;
    p.data[k] += 1e-6;
    q.data[k] -= 1e-6;
    const double fd =
        (depth_ranking_loss(p, m, mask, 200, 0.05, 3).value - depth_ranking_loss(q, m, mask, 200, 0.05, 3).value) / 2e-6;
    EXPECT_NEAR(l.grad.data[k], fd, 1e-6);
  }
}

TEST(BarronRho, SpotValues) {
  for (double a : {-1.0, 0.0, 0.1, 1.0, 2.0, 4.0}) EXPECT_EQ(barron_rho(0.0, a, 0.7).value, 0.0);
  EXPECT_NEAR(barron_rho(0.3, 2.0, 0.3).value, 0.5, 1e-12);
  EXPECT_NEAR(barron_rho(1.0, 1.0, 1.0).value, std::sqrt(2.0) - 1.0, 1e-12);
  EXPECT_NEAR(barron_rho(1.0, 0.0, 1.0).value, std::log(1.5), 1e-12);
}

TEST(BarronRho, LimitsAreContinuous) {
  for (double x : {0.3, 1.0, 1.5}) {
    EXPECT_NEAR(barron_rho(x, 2.0 + 1e-6, 1.0).value, barron_rho(x, 2.0, 1.0).value, 1e-5);
    EXPECT_NEAR(barron_rho(x, 1e-7, 1.0).value, barron_rho(x, 0.0, 1.0).value, 1e-5);
  }
}

TEST(BarronRho, EvenMonotoneAndFlatAtZero) {
  for (double a : {-2.0, 0.0, 0.1, 1.0, 2.0}) {
    EXPECT_EQ(barron_rho(0.0, a, 1.0).derivative, 0.0);
    double prev = -1.0;
    for (double x = 0.0; x < 5.0; x += 0.25) {
      const double v = barron_rho(x, a, 1.0).value;
      EXPECT_EQ(v, barron_rho(-x, a, 1.0).value);
      EXPECT_GE(v, prev);
      prev = v;
      const double fd = (barron_rho(x + 1e-6, a, 1.0).value - barron_rho(x - 1e-6, a, 1.0).value) / 2e-6;
      EXPECT_NEAR(barron_rho(x, a, 1.0).derivative, fd, 1e-6);
    }
  }
}

TEST(BarronRho, NonPositiveScaleRejected) {
  EXPECT_THROW(barron_rho(1.0, 1.0, 0.0), ValidationError);
  EXPECT_THROW(barron_rho(1.0, 1.0, -1.0), ValidationError);
}

GaussianScene two_point_scene(double gap) {
  Gaussian a, b;
  a.center = Vec3(0, 0, 0);
  b.center = Vec3(gap, 0, 0);
  a.feature = b.feature = Eigen::VectorXd::Zero(1);
  return GaussianScene({a, b}, {{0}, {1}}, 1);
}

TEST(Arap, NoMotionIsZero) {
  const auto s = two_point_scene(0.002);
  const auto l = arap_loss(s, {{0, 1, 0.002}}, identity_poses(2), 1.0, 0.0025);
  EXPECT_EQ(l.value, 0.0);
  EXPECT_EQ(l.grad[0].t, Vec3::Zero());
}

TEST(Arap, EmptyPairSetIsZero) {
  const auto s = two_point_scene(0.002);
  std::mt19937_64 rng(1);
  const auto l = arap_loss(s, {}, testing::random_poses(rng, 2), 1.0, 0.0025);
  EXPECT_EQ(l.value, 0.0);
  EXPECT_EQ(l.grad[1].t, Vec3::Zero());
}

TEST(Arap, SinglePairSeparation) {
  const auto s = two_point_scene(0.002);
  PartPoseSet poses(2);
  poses[1].t = Vec3(0.001, 0, 0);
  const auto l = arap_loss(s, {{0, 1, 0.002}}, poses, 2.0, 0.0025);
  EXPECT_NEAR(l.value, 0.5 * std::pow(1.0 / 2.5, 2), 1e-12);
  EXPECT_GT(l.grad[1].t.x(), 0.0);
}

BoundaryPairSet all_pairs(const GaussianScene& s) {
  BoundaryPairSet out;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = i + 1; j < s.size(); ++j)
      if (s.part_of(i) != s.part_of(j))
        out.push_back({i, j, (s.gaussians()[i].center - s.gaussians()[j].center).norm()});
  return out;
}

TEST(Arap, InvariantUnderWholeObjectRigidMotion) {
  std::mt19937_64 rng(7);
  const auto s = testing::random_scene(rng, 20, 3, 1);
  const auto pairs = all_pairs(s);
  for (int trial = 0; trial < 5; ++trial) {
    PartPose obj;
    obj.q = testing::random_unit_quat(rng);
    obj.t = Vec3::Random();
    const auto l = arap_loss(s, pairs, object_pose_to_parts(s, obj), 1.0, 0.0025);
    EXPECT_EQ(l.value, 0.0);
    for (const auto& g : l.grad) EXPECT_EQ(g.t, Vec3::Zero());
  }
  PartPoseSet moved(3);
  moved[2].t = Vec3(1e-4, 0, 0);
  EXPECT_GT(arap_loss(s, pairs, moved, 1.0, 0.0025).value, 0.0);
}

TEST(Arap, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(8);
  const auto s = testing::random_scene(rng, 12, 3, 1);
  const auto pairs = all_pairs(s);
  const auto poses = testing::random_poses(rng, 3, 0.05, 0.01);
  for (double alpha : {0.1, 1.0, 2.0}) {
    const auto analytic = testing::flatten(arap_loss(s, pairs, poses, alpha, 0.05).grad);
    const auto numeric = testing::numeric_pose_gradient(
        poses, [&](const PartPoseSet& p) { return arap_loss(s, pairs, p, alpha, 0.05).value; });
    const double scale = testing::max_abs(numeric);
    for (std::size_t k = 0; k < analytic.size(); ++k)
      EXPECT_LT(testing::relative_error(analytic[k], numeric[k], scale), 1e-3) << k;
  }
}

Trajectory trajectory_from(const std::vector<PartPoseSet>& frames) {
  Trajectory t;
  t.frames = frames;
  for (std::size_t i = 0; i < frames.size(); ++i) t.timestamps.push_back(static_cast<double>(i));
  return t;
}

TEST(TemporalLaplacian, StaticAndShortTrajectoriesAreZero) {
  std::mt19937_64 rng(9);
  const auto s = testing::random_scene(rng, 10, 2, 1);
  const auto p = testing::random_poses(rng, 2);
  EXPECT_EQ(temporal_laplacian(s, trajectory_from({p, p, p, p})).value, 0.0);
  const auto q = testing::random_poses(rng, 2);
  EXPECT_EQ(temporal_laplacian(s, trajectory_from({p, q})).value, 0.0);
}

TEST(TemporalLaplacian, ConstantVelocityScrewIsZero) {
  std::mt19937_64 rng(10);
  const auto s = testing::random_scene(rng, 10, 1, 1);
  const Vec3 axis = Vec3(0.3, -0.4, 1.0).normalized(), point(0.2, 0.1, 2.0);
  std::vector<PartPoseSet> frames;
  for (int t = 0; t < 6; ++t) {
    Rigid r;
    r.rotation = so3_exp(axis * 0.2 * t);
    r.translation = point - r.rotation * point + axis * 0.01 * t;
    frames.push_back({PartPose::from_rigid(r, s.part_centroid(0))});
  }
  EXPECT_LT(temporal_laplacian(s, trajectory_from(frames)).value, 1e-20);
}

TEST(TemporalLaplacian, SecondDifferenceOfTranslation) {
  std::mt19937_64 rng(11);
  const auto s = testing::random_scene(rng, 10, 1, 1);
  PartPoseSet a(1), b(1), c(1);
  c[0].t = Vec3(0.01, 0, 0);
  EXPECT_NEAR(temporal_laplacian(s, trajectory_from({a, b, c})).value, 1e-4, 1e-15);
}

TEST(TemporalLaplacian, InvariantUnderConstantRigidOffset) {
  std::mt19937_64 rng(12);
  const auto s = testing::random_scene(rng, 10, 2, 1);
  std::vector<PartPoseSet> frames;
  for (int t = 0; t < 5; ++t) frames.push_back(testing::random_poses(rng, 2, 0.3, 0.05));
  const double base = temporal_laplacian(s, trajectory_from(frames)).value;
  Rigid g;
  g.rotation = quat_to_matrix<double>(testing::random_unit_quat(rng));
  g.translation = Vec3(0.3, -0.1, 0.2);
  for (auto& f : frames)
    for (std::size_t p = 0; p < 2; ++p)
      f[p] = PartPose::from_rigid(g * f[p].as_rigid(s.part_centroid(p)), s.part_centroid(p));
  EXPECT_NEAR(temporal_laplacian(s, trajectory_from(frames)).value, base, 1e-12 * (1 + base));
}

TEST(TemporalLaplacian, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(13);
  const auto s = testing::random_scene(rng, 10, 2, 1);
  std::vector<PartPoseSet> frames;
  for (int t = 0; t < 4; ++t) frames.push_back(testing::random_poses(rng, 2, 0.3, 0.05));
  const auto l = temporal_laplacian(s, trajectory_from(frames));
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const auto numeric = testing::numeric_pose_gradient(frames[t], [&](const PartPoseSet& p) {
      auto f = frames;
      f[t] = p;
      return temporal_laplacian(s, trajectory_from(f)).value;
    });
    const auto analytic = testing::flatten(l.grad[t]);
    const double scale = testing::max_abs(numeric);
    for (std::size_t k = 0; k < analytic.size(); ++k)
      EXPECT_LT(testing::relative_error(analytic[k], numeric[k], scale), 1e-3) << "frame " << t << " comp " << k;
  }
}

TEST(TotalTrackingLoss, WeightedSum) {
  LossTerms terms;
  terms.feature.value = 2.0;
  terms.feature.grad = Image(1, 1, 1, 1.0);
  terms.depth.value = 3.0;
  terms.depth.grad = Image(1, 1, 1, 1.0);
  terms.arap.value = 5.0;
  terms.arap.grad.resize(1);
  terms.arap.grad[0].t = Vec3(1, 0, 0);
  const LossWeights defaults;
  EXPECT_DOUBLE_EQ(defaults.dino, 1.0);
  EXPECT_DOUBLE_EQ(defaults.mono, 0.5);
  EXPECT_DOUBLE_EQ(defaults.arap, 0.2);
  const auto w = total_tracking_loss(terms, defaults);
  EXPECT_DOUBLE_EQ(w.value, 2.0 + 1.5 + 1.0);
  EXPECT_DOUBLE_EQ(w.depth_grad.data[0], 0.5);
  EXPECT_DOUBLE_EQ(w.arap_grad[0].t.x(), 0.2);
  const auto only = total_tracking_loss(terms, LossWeights{1, 0, 0, 0});
  EXPECT_DOUBLE_EQ(only.value, terms.feature.value);
  EXPECT_EQ(total_tracking_loss(LossTerms{}, defaults).value, 0.0);
}

}  // namespace
}  // namespace artic
