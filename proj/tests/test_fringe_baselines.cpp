#include <gtest/gtest.h>

#include <cmath>

#include "aberrex/charts.hpp"
#include "aberrex/error.hpp"
#include "aberrex/fringe_baselines.hpp"
#include "aberrex/warp.hpp"
#include "test_util.hpp"

using namespace aberrex;

namespace {

double mean_abs_interior(const Plane& a, const Plane& b, int border) {
  double s = 0.0;
  int n = 0;
  for (int y = border; y < a.height() - border; ++y)
    for (int x = border; x < a.width() - border; ++x) {
      s += std::abs(a(y, x) - b(y, x));
      ++n;
    }
  return s / n;
}

Plane chart_plane(int n, std::uint64_t seed) { return make_chart(n, n, seed).channel(1); }

}  // namespace

TEST(PhaseCorrelate, IntegerShift) {
  const Plane fixed = chart_plane(128, 1);
  const Plane moving = translate(fixed, -5.0, 3.0);
  const Shift t = phase_correlate(moving, fixed);
  EXPECT_NEAR(t.dx, 5.0, 0.1);
  EXPECT_NEAR(t.dy, -3.0, 0.1);
}

TEST(PhaseCorrelate, SubpixelShift) {
  const Plane fixed = chart_plane(128, 2);
  const Plane moving = translate(fixed, 1.4, -2.3);
  const Shift t = phase_correlate(moving, fixed);
  EXPECT_NEAR(t.dx, -1.4, 0.25);
  EXPECT_NEAR(t.dy, 2.3, 0.25);
}

TEST(PhaseCorrelate, Errors) {
  EXPECT_THROW(phase_correlate(Plane(16, 16, 1.0f), Plane(16, 16, 1.0f)), InvalidInput);
  EXPECT_THROW(phase_correlate(Plane(64, 64), Plane(64, 64)), InvalidInput);
  EXPECT_THROW(phase_correlate(Plane(64, 64, 1.0f), Plane(64, 65, 1.0f)), InvalidInput);
}

TEST(LucasKanade, RecoversUniformTranslation) {
  const Plane fixed = chart_plane(128, 3);
  const Plane moving = translate(fixed, 1.5, -0.75);
  const LocalWarp w = lucas_kanade(moving, fixed, LocalWarp::Mode::translation);
  double dx, dy;
  w.displacement(64, 64, dx, dy);
  EXPECT_NEAR(dx, 1.5, 0.1);  // fixed(p) = moving(p + t)
  EXPECT_NEAR(dy, -0.75, 0.1);
  EXPECT_LT(mean_abs_interior(apply_warp(moving, w), fixed, 8),
            0.3 * mean_abs_interior(moving, fixed, 8));
}

TEST(LucasKanade, SimilarityModeHandlesTranslation) {
  const Plane fixed = chart_plane(128, 4);
  const Plane moving = translate(fixed, -1.0, 1.0);
  const LocalWarp w = lucas_kanade(moving, fixed, LocalWarp::Mode::similarity);
  EXPECT_LT(mean_abs_interior(apply_warp(moving, w), fixed, 8),
            0.3 * mean_abs_interior(moving, fixed, 8));
}

TEST(LucasKanade, FlatBlocksAreSingular) {
  const Plane flat(128, 128, 0.5f);
  const LocalWarp w = lucas_kanade(flat, flat, LocalWarp::Mode::translation);
  ASSERT_FALSE(w.blocks.empty());
  for (const auto& b : w.blocks) {
    EXPECT_TRUE(b.singular);
    EXPECT_EQ(b.tx, 0.0);
    EXPECT_EQ(b.ty, 0.0);
  }
}

TEST(Radial, FitReducesResidualMonotonically) {
  const Plane fixed = chart_plane(128, 5);
  const Plane moving = apply_warp(fixed, RadialWarp::centered(128, 128, 0.02, -0.01));
  const RadialFit fit = fit_radial(moving, fixed, 100);
  EXPECT_LE(fit.final_residual, fit.initial_residual);
  for (std::size_t i = 1; i < fit.best_history.size(); ++i)
    EXPECT_LE(fit.best_history[i], fit.best_history[i - 1]);
  EXPECT_LT(fit.final_residual, 0.5 * fit.initial_residual);
}

TEST(Radial, IdentityWarpIsExact) {
  const Plane p = testutil::random_plane(32, 40, 6);
  EXPECT_LT(testutil::max_abs_diff(apply_warp(p, RadialWarp::centered(32, 40)), p), 1e-6);
}

TEST(AlignChannels, MethodNames) {
  for (auto m : {FringeMethod::none, FringeMethod::cnn, FringeMethod::radial,
                 FringeMethod::phasecorr, FringeMethod::plk_t, FringeMethod::plk_s})
    EXPECT_EQ(parse_fringe_method(to_string(m)), m);
  EXPECT_THROW(parse_fringe_method("unet"), InvalidInput);
}

TEST(AlignChannels, RejectsNonClassical) {
  const PlanarImage z = make_chart(64, 64, 7);
  EXPECT_THROW(align_channels(z, FringeMethod::cnn), InvalidInput);
  EXPECT_THROW(align_channels(z, FringeMethod::none), InvalidInput);
}

TEST(AlignChannels, ShiftedRedAndBlueRealigned) {
  const PlanarImage clean = make_chart(128, 128, 8);
  PlanarImage z = clean;
  z.set_channel(0, translate(clean.channel(0), 2.0, 0.0));
  z.set_channel(2, translate(clean.channel(2), 0.0, -2.0));
  for (auto m : {FringeMethod::phasecorr, FringeMethod::plk_t, FringeMethod::plk_s}) {
    const PlanarImage u = align_channels(z, m);
    EXPECT_EQ(testutil::max_abs_diff(u.channel(1), z.channel(1)), 0.0);
    for (int c : {0, 2})
      EXPECT_LT(mean_abs_interior(u.channel(c), clean.channel(c), 8),
                0.4 * mean_abs_interior(z.channel(c), clean.channel(c), 8))
          << to_string(m) << " channel " << c;
    for (float v : u.data()) {
      EXPECT_GE(v, 0.0f);
      EXPECT_LE(v, 1.0f);
    }
  }
}
