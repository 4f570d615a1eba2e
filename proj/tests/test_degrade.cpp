#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "aberrex/charts.hpp"
#include "aberrex/degrade.hpp"
#include "aberrex/error.hpp"
#include "aberrex/image_io.hpp"
#include "aberrex/kernels.hpp"
#include "aberrex/warp.hpp"
#include "test_util.hpp"

using namespace aberrex;

TEST(ToneCurve, RoundTrip) {
  const PlanarImage img = testutil::random_image(16, 16, 3, 1);
  EXPECT_LT(testutil::max_abs_diff(reprocess(unprocess(img)), img), 1e-4);
  const PlanarImage lin = unprocess(img);
  for (float v : lin.data()) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
}

TEST(ToneCurve, FixedPoints) {
  PlanarImage img(1, 3, 1);
  img.data()[0] = 0.0f;
  img.data()[1] = 0.5f;
  img.data()[2] = 1.0f;
  const PlanarImage lin = unprocess(img);
  EXPECT_NEAR(lin.data()[0], 0.0f, 1e-6f);
  EXPECT_NEAR(lin.data()[1], std::pow(0.5, 2.2), 1e-5);  // smoothstep(0.5) = 0.5
  EXPECT_NEAR(lin.data()[2], 1.0f, 1e-6f);
}

TEST(HashedNormal, DeterministicAndStandard) {
  EXPECT_EQ(hashed_normal(1, 2, 3), hashed_normal(1, 2, 3));
  EXPECT_NE(hashed_normal(1, 2, 3), hashed_normal(1, 2, 4));
  EXPECT_NE(hashed_normal(1, 2, 3), hashed_normal(2, 2, 3));
  double s = 0.0, s2 = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double v = hashed_normal(9, 0, i);
    s += v;
    s2 += v * v;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.02);
}

TEST(Bayer, Rggb) {
  EXPECT_EQ(bayer_channel(0, 0), 0);
  EXPECT_EQ(bayer_channel(0, 1), 1);
  EXPECT_EQ(bayer_channel(1, 0), 1);
  EXPECT_EQ(bayer_channel(1, 1), 2);
  EXPECT_EQ(bayer_channel(2, 3), 1);
}

TEST(Mosaick, PicksChannelPerSite) {
  const PlanarImage img = testutil::random_image(6, 8, 3, 2);
  const Plane raw = mosaick(img);
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 8; ++x) EXPECT_EQ(raw(y, x), img.at(bayer_channel(y, x), y, x));
}

TEST(Demosaick, ConstantColourExact) {
  const PlanarImage img(32, 32, 3, ColorSpace::linear, 0.0f);
  PlanarImage c = img;
  for (int ch = 0; ch < 3; ++ch)
    for (float& v : c.plane_data(ch)) v = 0.2f + 0.3f * ch;
  EXPECT_LT(testutil::max_abs_diff(demosaick_hamilton_adams(mosaick(c)), c), 1e-6);
}

TEST(Demosaick, SmoothImageAccurate) {
  PlanarImage img(64, 64, 3);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x)
        img.plane_data(c)[y * 64 + x] =
            0.5f + 0.2f * std::sin(0.1 * x + c) * std::cos(0.07 * y);
  const PlanarImage out = demosaick_hamilton_adams(mosaick(img));
  EXPECT_LT(testutil::max_abs_diff(crop(out, 4, 4, 56, 56), crop(img, 4, 4, 56, 56)), 0.01);
  // Measured sites are kept.
  const Plane raw = mosaick(img);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x)
      EXPECT_NEAR(out.at(bayer_channel(y, x), y, x), raw(y, x), 1e-6);
}

TEST(Demosaick, OddSizeRejected) {
  EXPECT_THROW(demosaick_hamilton_adams(Plane(7, 8)), InvalidInput);
}

TEST(SimulateRaw, NoiseVarianceFollowsSignal) {
  // Constant image of level s: raw noise variance must be alpha * s + beta.
  const double alpha = 0.01, beta = 2e-5;
  for (double s : {0.1, 0.4, 0.8}) {
    PlanarImage img(200, 200, 3, ColorSpace::linear, static_cast<float>(s));
    DegradeParams p;
    p.alpha = alpha;
    p.beta = beta;
    p.seed = 5;
    const Plane raw = simulate_raw(img, p, false);
    double m = 0.0, v = 0.0;
    for (float r : raw.data()) m += r;
    m /= raw.size();
    for (float r : raw.data()) v += (r - m) * (r - m);
    v /= raw.size() - 1;
    EXPECT_NEAR(m, s, 0.002);
    EXPECT_NEAR(v, alpha * s + beta, 0.03 * (alpha * s + beta)) << s;
  }
}

TEST(SimulateRaw, ClipSaturates) {
  PlanarImage img(32, 32, 3, ColorSpace::linear, 0.99f);
  DegradeParams p;
  p.alpha = 0.01;
  p.seed = 1;
  const Plane raw = simulate_raw(img, p, true);
  for (float v : raw.data()) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
}

TEST(SimulateRaw, NoiselessDiracIsMosaic) {
  const PlanarImage img = testutil::random_image(16, 16, 3, 3);
  DegradeParams p;
  EXPECT_EQ(testutil::max_abs_diff(simulate_raw(img, p), mosaick(img)), 0.0);
}

TEST(SimulateRaw, ShiftMovesRedOnly) {
  const PlanarImage img = make_chart(32, 32, 4);
  DegradeParams p;
  p.red_shift = {1.0, 0.0};
  const Plane raw = simulate_raw(img, p);
  const Plane red = translate(img.channel(0), 1.0, 0.0);
  for (int y = 0; y < 32; y += 2)
    for (int x = 0; x < 32; x += 2) EXPECT_NEAR(raw(y, x), red(y, x), 1e-6);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x)
      if (bayer_channel(y, x) == 1) EXPECT_EQ(raw(y, x), img.at(1, y, x));
}

TEST(ApplyPsf, FloorChannelsUnchanged) {
  const PlanarImage img = testutil::random_image(20, 20, 3, 6);
  GaussianPsf psf;
  psf.channels[1] = {1.5, 0.7};
  const PlanarImage out = apply_psf(img, psf);
  EXPECT_EQ(testutil::max_abs_diff(out.channel(0), img.channel(0)), 0.0);
  EXPECT_EQ(testutil::max_abs_diff(out.channel(1), convolve(img.channel(1), rasterize(0.0, 1.5, 0.7))), 0.0);
}

TEST(ForwardModel, ShapesAndDeterminism) {
  const PlanarImage clean = unprocess(make_chart(64, 64, 7));
  DatasetConfig cfg;
  const DegradeParams p = sample_params(3, 11, cfg);
  const SamplePair a = apply_forward_model(clean, p);
  const SamplePair b = apply_forward_model(clean, p);
  EXPECT_EQ(a.raw.height(), 64);
  EXPECT_EQ(a.aberrated_rgb.channels(), 3);
  EXPECT_EQ(testutil::max_abs_diff(a.aberrated_rgb, b.aberrated_rgb), 0.0);
  EXPECT_EQ(testutil::max_abs_diff(a.clean, clean), 0.0);
}

TEST(SampleParams, RangesAndPurity) {
  DatasetConfig cfg;
  for (int i = 0; i < 500; ++i) {
    const DegradeParams p = sample_params(42, i, cfg);
    EXPECT_GE(p.psf.theta, 0.0);
    EXPECT_LT(p.psf.theta, std::numbers::pi);
    for (const auto& c : p.psf.channels) {
      EXPECT_GE(c.sigma, kMinStd);
      EXPECT_LE(c.sigma, kMaxStd);
      EXPECT_GE(c.rho, kMinStd);
      EXPECT_LE(c.rho, kMaxStd);
    }
    for (auto s : {p.red_shift, p.blue_shift}) {
      EXPECT_LE(std::abs(s.dx), cfg.max_shift);
      EXPECT_LE(std::abs(s.dy), cfg.max_shift);
    }
    EXPECT_GE(p.alpha, cfg.alpha_min);
    EXPECT_LE(p.alpha, cfg.alpha_max);
    EXPECT_GE(p.beta, cfg.beta_min);
    EXPECT_LE(p.beta, cfg.beta_max);
  }
  const DegradeParams a = sample_params(42, 7, cfg), b = sample_params(42, 7, cfg);
  EXPECT_EQ(a.psf.theta, b.psf.theta);
  EXPECT_EQ(a.seed, b.seed);
  EXPECT_NE(a.psf.theta, sample_params(43, 7, cfg).psf.theta);
}

TEST(Dataset, LayoutManifestAndThreadIndependence) {
  const auto dir = testutil::scratch_dir("dataset");
  write_image(reprocess(make_chart(160, 160, 9)), dir / "src.pfm");
  DatasetConfig cfg;
  cfg.crop = 64;
  const int saved = worker_count();
  set_worker_count(1);
  const auto manifest = generate_dataset(dir / "src.pfm", 4, dir / "one", cfg, 5);
  set_worker_count(saved);
  generate_dataset(dir / "src.pfm", 4, dir / "many", cfg, 5);
  const auto rows = read_manifest(manifest);
  ASSERT_EQ(rows.size(), 4u);
  for (const auto& r : rows) {
    for (const char* sub : {"clean", "raw", "aberrated", "deblurred"}) {
      const auto a = read_image(dir / "one" / sub / (r.id + ".pfm"));
      const auto b = read_image(dir / "many" / sub / (r.id + ".pfm"));
      EXPECT_EQ(a.height(), 64);
      EXPECT_EQ(testutil::max_abs_diff(a, b), 0.0) << sub << " " << r.id;
    }
  }
  const DegradeParams p = sample_params(5, 2, cfg);
  EXPECT_NEAR(rows[2].params.psf.theta, p.psf.theta, 1e-6);
  EXPECT_NEAR(rows[2].params.alpha, p.alpha, 1e-6 * p.alpha);
  EXPECT_NEAR(rows[2].params.red_shift.dx, p.red_shift.dx, 1e-6);
}

TEST(Dataset, MissingSourceIsIoError) {
  const auto dir = testutil::scratch_dir("dataset_missing");
  EXPECT_THROW(generate_dataset(dir / "nope", 2, dir / "out", {}, 1), IoError);
}

TEST(Charts, DeterministicAndBounded) {
  const PlanarImage a = make_chart(64, 80, 5), b = make_chart(64, 80, 5);
  EXPECT_EQ(testutil::max_abs_diff(a, b), 0.0);
  EXPECT_GT(testutil::max_abs_diff(a, make_chart(64, 80, 6)), 0.1);
  for (float v : a.data()) {
    EXPECT_GE(v, 0.05f - 1e-6f);
    EXPECT_LE(v, 0.95f + 1e-6f);
  }
  EXPECT_THROW(make_chart(0, 10, 1), InvalidInput);
  EXPECT_THROW(make_chart(10, 10, 1, ChartKind::shapes, 0), InvalidInput);
}

TEST(Charts, PixelSampledEdgesAreHard) {
  // Without supersampling every pixel takes a palette color: far fewer
  // distinct levels than the antialiased rendering.
  auto levels = [](const PlanarImage& img) {
    std::vector<float> v(img.plane_data(1).begin(), img.plane_data(1).end());
    std::sort(v.begin(), v.end());
    return std::unique(v.begin(), v.end()) - v.begin();
  };
  const PlanarImage hard = make_chart(128, 128, 7, ChartKind::shapes, 1);
  const PlanarImage soft = make_chart(128, 128, 7);
  EXPECT_LT(levels(hard) * 4, levels(soft));
}
