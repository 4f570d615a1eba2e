#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <fstream>
#include <random>

#include "aberrex/blur_estimation.hpp"
#include "aberrex/charts.hpp"
#include "aberrex/degrade.hpp"
#include "aberrex/error.hpp"
#include "test_util.hpp"

using namespace aberrex;
using std::numbers::pi;

namespace {

double angle_error(double a, double b) {
  const double d = std::abs(canonical_angle(a) - canonical_angle(b));
  return std::min(d, pi - d);
}

GaussianPsf uniform_psf(double theta, double sigma, double rho) {
  GaussianPsf p;
  p.theta = theta;
  for (auto& c : p.channels) c = {sigma, rho};
  return p;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

}  // namespace

TEST(Normalize, TwoValuedMapsToUnitRange) {
  Plane p(10, 10, 0.2f);
  for (int y = 0; y < 10; ++y)
    for (int x = 5; x < 10; ++x) p(y, x) = 0.8f;
  const auto n = normalize(p);
  EXPECT_FALSE(n.flat);
  for (int y = 0; y < 10; ++y) {
    EXPECT_FLOAT_EQ(n.values(y, 0), 0.0f);
    EXPECT_FLOAT_EQ(n.values(y, 9), 1.0f);
  }
}

TEST(Normalize, ConstantIsFlat) {
  const auto n = normalize(Plane(8, 8, 0.5f));
  EXPECT_TRUE(n.flat);
  for (float v : n.values.data()) EXPECT_EQ(v, 0.0f);
}

TEST(Normalize, LongTailsClippedAtQuantiles) {
  // 100 x 100 ramp over [0, 1] with ten extreme outliers on each side.
  Plane p(100, 100);
  for (int i = 0; i < 10000; ++i) p.data()[i] = i / 9999.0f;
  for (int i = 0; i < 10; ++i) {
    p.data()[i] = -50.0f;
    p.data()[9999 - i] = 50.0f;
  }
  const auto n = normalize(p, 0.001);
  EXPECT_EQ(n.values.data()[0], 0.0f);
  EXPECT_EQ(n.values.data()[9999], 1.0f);
  // The middle of the ramp is barely affected by the outliers.
  EXPECT_NEAR(n.values.data()[5000], 0.5, 0.01);
}

TEST(Normalize, AffineInvariant) {
  const Plane p = testutil::random_plane(32, 32, 1);
  Plane q(32, 32);
  for (std::size_t i = 0; i < p.size(); ++i) q.data()[i] = 3.0f * p.data()[i] + 0.25f;
  EXPECT_LT(testutil::max_abs_diff(normalize(p).values, normalize(q).values), 1e-5);
}

TEST(StdFromNorm, AffineRule) {
  const AffineBlurModel m = AffineBlurModel::linear();
  EXPECT_NEAR(std_from_norm(0.2, m), std::sqrt(0.415 * 0.415 / 0.04 - 0.358 * 0.358), 1e-12);
  EXPECT_NEAR(std_from_norm(0.2, m), 2.044, 1e-3);
}

TEST(StdFromNorm, ClampPaths) {
  const AffineBlurModel m = AffineBlurModel::linear();
  EXPECT_EQ(std_from_norm(m.C / m.sigma_b, m), kMinStd);
  EXPECT_EQ(std_from_norm(1.2, m), kMinStd);  // negative radicand
  EXPECT_EQ(std_from_norm(0.05, m), kMinStd);  // would be ~8.3 px
  EXPECT_EQ(std_from_norm(0.0, m), kMinStd);
  for (int i = 1; i < 2000; ++i) {
    const double s = std_from_norm(i / 1000.0, m);
    EXPECT_GE(s, kMinStd);
    EXPECT_LE(s, kMaxStd);
  }
}

TEST(EstimateSigmas, LowVarianceClamps) {
  // Mostly constant patch with one thin line: normalized variance far below 0.09.
  Plane p(64, 64, 0.0f);
  for (int y = 0; y < 64; ++y) p(y, 32) = 1.0f;
  const auto n = normalize(p);
  const ChannelBlur b = estimate_sigmas(n.values, 0.0, AffineBlurModel::linear());
  EXPECT_EQ(b.sigma, kMinStd);
  EXPECT_EQ(b.rho, kMinStd);
}

TEST(EstimateDirection, StrongAnisotropyOnSiemensStar) {
  const PlanarImage chart = make_chart(160, 160, 3, ChartKind::siemens);
  const PlanarImage blurred = apply_psf(chart, uniform_psf(0.0, 3.0, 0.3));
  const double theta = estimate_direction(normalize(blurred.channel(1)).values);
  EXPECT_LE(angle_error(theta, 0.0), 6.0 * pi / 180.0 + 1e-9);
}

TEST(EstimateDirection, FollowsKernelRotation) {
  const PlanarImage chart = make_chart(160, 160, 3, ChartKind::siemens);
  for (double deg : {30.0, 66.0, 120.0, 150.0}) {
    const double t = deg * pi / 180.0;
    const PlanarImage blurred = apply_psf(chart, uniform_psf(t, 2.5, 0.6));
    const double theta = estimate_direction(normalize(blurred.channel(1)).values);
    EXPECT_LE(angle_error(theta, t), 6.0 * pi / 180.0 + 1e-9) << deg;
  }
}

TEST(EstimateDirection, ZeroAndHalfTurnScoresEqual) {
  const Plane n = normalize(make_chart(96, 96, 5).channel(1)).values;
  const Gradients g = gradients(n);
  EXPECT_DOUBLE_EQ(directional_inf_norm(g, 0.0), directional_inf_norm(g, pi));
  EXPECT_DOUBLE_EQ(directional_inf_norm(g, pi / 6), directional_inf_norm(g, pi / 6 + pi));
}

TEST(EstimateDirection, IsotropicTieTakesSmallestAngle) {
  // Radially symmetric bump: scores at 0 and 90 degrees tie exactly.
  Plane p(65, 65);
  for (int y = 0; y < 65; ++y)
    for (int x = 0; x < 65; ++x) p(y, x) = (std::hypot(x - 32.0, y - 32.0) < 12.0) ? 1.0f : 0.0f;
  EXPECT_NO_THROW(estimate_direction(normalize(p).values));
  const Plane flat(40, 40, 0.0f);
  EXPECT_THROW(estimate_direction(flat), NumericalError);
}

TEST(EstimateDirection, LinearInterpolationLandsOnCoarseNodes) {
  EstimatorSettings s;
  s.interpolation = AngleInterpolation::linear;
  const PlanarImage chart = make_chart(160, 160, 3, ChartKind::siemens);
  const PlanarImage blurred = apply_psf(chart, uniform_psf(0.7, 2.5, 0.6));
  const double theta = estimate_direction(normalize(blurred.channel(1)).values, s);
  const double steps = theta / (pi / 6);
  EXPECT_NEAR(steps, std::round(steps), 1e-9);
}

TEST(Estimate, RecoversStdsAtThirtyDegrees) {
  const double t = 30.0 * pi / 180.0;
  GaussianPsf psf;
  psf.theta = t;
  psf.channels = {ChannelBlur{2.5, 1.0}, ChannelBlur{1.8, 0.7}, ChannelBlur{3.2, 1.5}};
  std::vector<double> errors;
  for (int seed = 0; seed < 5; ++seed) {
    const PlanarImage blurred = apply_psf(make_chart(256, 256, 40 + seed), psf);
    const BlurEstimate est = estimate(blurred, AffineBlurModel::linear());
    for (int c = 0; c < 3; ++c) {
      errors.push_back(std::abs(est.psf.channels[c].sigma - psf.channels[c].sigma));
      errors.push_back(std::abs(est.psf.channels[c].rho - psf.channels[c].rho));
    }
  }
  EXPECT_LE(median(errors), 0.3);
}

TEST(Estimate, SharpPatchGivesSmallStds) {
  // Supersampled edges carry roughly 0.4 px of antialiasing blur.
  const BlurEstimate est = estimate(make_chart(128, 128, 8), AffineBlurModel::linear());
  for (int c = 0; c < 3; ++c) {
    EXPECT_LE(est.psf.channels[c].sigma, 0.7);
    EXPECT_LE(est.psf.channels[c].rho, 0.7);
  }
}

TEST(Estimate, FlatPatchIsDirac) {
  const BlurEstimate est = estimate(PlanarImage(64, 64, 3, ColorSpace::linear, 0.3f),
                                    AffineBlurModel::linear());
  for (int c = 0; c < 3; ++c) {
    EXPECT_TRUE(est.flat[c]);
    EXPECT_TRUE(est.is_dirac(c));
  }
}

TEST(Estimate, GreenDrivesTheta) {
  const PlanarImage chart = make_chart(160, 160, 3, ChartKind::siemens);
  const PlanarImage a = apply_psf(chart, uniform_psf(0.5, 2.5, 0.6));
  const PlanarImage b = apply_psf(chart, uniform_psf(2.0, 2.5, 0.6));
  PlanarImage mixed = a;
  mixed.set_channel(0, b.channel(0));
  mixed.set_channel(2, b.channel(2));
  const AffineBlurModel m = AffineBlurModel::linear();
  EXPECT_EQ(estimate(mixed, m).psf.theta, estimate(a, m).psf.theta);
  EXPECT_EQ(estimate(mixed, m).psf.theta, estimate_direction(normalize(a.channel(1)).values));
}

TEST(Estimate, InvariantToAffineIntensityChange) {
  const PlanarImage blurred = apply_psf(make_chart(128, 128, 9), uniform_psf(1.0, 2.0, 1.0));
  PlanarImage scaled = blurred;
  for (float& v : scaled.data()) v = 0.5f * v + 0.125f;  // exact in binary floating point
  const AffineBlurModel m = AffineBlurModel::linear();
  const BlurEstimate a = estimate(blurred, m), b = estimate(scaled, m);
  EXPECT_EQ(a.psf.theta, b.psf.theta);
  for (int c = 0; c < 3; ++c) {
    EXPECT_NEAR(a.psf.channels[c].sigma, b.psf.channels[c].sigma, 1e-4);
    EXPECT_NEAR(a.psf.channels[c].rho, b.psf.channels[c].rho, 1e-4);
  }
}

TEST(Estimate, HalfTurnKernelSameTheta) {
  const PlanarImage chart = make_chart(128, 128, 10);
  const AffineBlurModel m = AffineBlurModel::linear();
  EXPECT_EQ(estimate(apply_psf(chart, uniform_psf(0.6, 2.5, 1.0)), m).psf.theta,
            estimate(apply_psf(chart, uniform_psf(0.6 + pi, 2.5, 1.0)), m).psf.theta);
}

TEST(Estimate, MonotoneInTrueStd) {
  // Isotropic blur of increasing width on fixed content; past ~3.2 px the
  // major estimate exceeds 4 and clamps to the floor.
  const PlanarImage chart = make_chart(160, 160, 12);
  std::vector<double> est;
  for (double s = 0.6; s <= 3.1; s += 0.25) {
    const BlurEstimate e = estimate(apply_psf(chart, uniform_psf(0.0, s, s)), AffineBlurModel::linear());
    est.push_back(e.psf.channels[1].sigma);
  }
  int ordered = 0, total = 0;
  for (std::size_t i = 0; i < est.size(); ++i)
    for (std::size_t j = i + 1; j < est.size(); ++j) {
      ++total;
      ordered += est[j] >= est[i];
    }
  EXPECT_GE(ordered, 0.95 * total);
}

TEST(Estimate, OutputAlwaysInBounds) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 10; ++i) {
    const PlanarImage img = testutil::random_image(48, 48, 3, i);
    const BlurEstimate e = estimate(apply_psf(img, uniform_psf(u(rng) * pi, 0.2 + 5 * u(rng), 0.3)),
                                    AffineBlurModel::linear());
    for (const auto& c : e.psf.channels) {
      EXPECT_GE(c.sigma, kMinStd);
      EXPECT_LE(c.sigma, kMaxStd);
      EXPECT_GE(c.rho, kMinStd);
      EXPECT_LE(c.rho, kMaxStd);
    }
    EXPECT_GE(e.psf.theta, 0.0);
    EXPECT_LT(e.psf.theta, pi);
  }
}

TEST(Calibrate, RecoversPlantedModel) {
  const AffineBlurModel planted{0.44, 0.31};
  std::vector<CalibrationSample> samples;
  for (int i = 0; i < 80; ++i) {
    const double norm = 0.1 + 0.012 * i;
    const double r = planted.C * planted.C / (norm * norm) - planted.sigma_b * planted.sigma_b;
    if (r <= 0.0) continue;
    samples.push_back({norm, std::sqrt(r)});
  }
  ASSERT_GE(samples.size(), 50u);
  const AffineBlurModel m = calibrate(samples);
  EXPECT_NEAR(m.C, planted.C, 0.01 * planted.C);
  EXPECT_NEAR(m.sigma_b, planted.sigma_b, 0.01 * planted.sigma_b);
}

TEST(Calibrate, RobustToOutliers) {
  const AffineBlurModel planted{0.40, 0.45};
  std::vector<CalibrationSample> samples;
  for (int i = 0; i < 100; ++i) {
    const double norm = 0.11 + 0.007 * i;
    const double r = planted.C * planted.C / (norm * norm) - planted.sigma_b * planted.sigma_b;
    if (r <= 0.0) continue;
    samples.push_back({norm, std::sqrt(r) * (i % 10 == 0 ? 2.0 : 1.0)});
  }
  const AffineBlurModel m = calibrate(samples);
  EXPECT_NEAR(m.C, planted.C, 0.01 * planted.C);
  EXPECT_NEAR(m.sigma_b, planted.sigma_b, 0.01 * planted.sigma_b);
}

TEST(Calibrate, SingleLevelIsAnError) {
  std::vector<CalibrationSample> samples(60, CalibrationSample{0.2, 1.5});
  EXPECT_THROW(calibrate(samples), NumericalError);
  EXPECT_THROW(calibrate({}), NumericalError);
}

TEST(Calibrate, SamplesFromKnownPsf) {
  const GaussianPsf psf = uniform_psf(0.4, 2.0, 1.0);
  const auto s = calibration_samples(apply_psf(make_chart(128, 128, 2), psf), psf);
  ASSERT_EQ(s.size(), 6u);
  EXPECT_DOUBLE_EQ(s[0].true_std, 2.0);
  EXPECT_DOUBLE_EQ(s[1].true_std, 1.0);
  EXPECT_LT(s[0].grad_inf_norm, s[1].grad_inf_norm);
}

TEST(AffineModelFile, RoundTrip) {
  const auto dir = testutil::scratch_dir("affine");
  write_affine_model({0.3711, 0.4529}, dir / "m.txt");
  const AffineBlurModel m = read_affine_model(dir / "m.txt");
  EXPECT_NEAR(m.C, 0.3711, 1e-9);
  EXPECT_NEAR(m.sigma_b, 0.4529, 1e-9);
  {
    std::ofstream out(dir / "bad.txt");
    out << "C=abc\n";
  }
  EXPECT_THROW(read_affine_model(dir / "bad.txt"), IoError);
}
