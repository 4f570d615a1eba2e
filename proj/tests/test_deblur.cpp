#include <gtest/gtest.h>

#include <cmath>

#include "aberrex/charts.hpp"
#include "aberrex/deblur.hpp"
#include "aberrex/degrade.hpp"
#include "aberrex/error.hpp"
#include "aberrex/kernels.hpp"
#include "aberrex/psf.hpp"
#include "test_util.hpp"

using namespace aberrex;

namespace {

double rmse(const Plane& a, const Plane& b, int border) {
  double s = 0.0;
  int n = 0;
  for (int y = border; y < a.height() - border; ++y)
    for (int x = border; x < a.width() - border; ++x) {
      const double d = a(y, x) - b(y, x);
      s += d * d;
      ++n;
    }
  return std::sqrt(s / n);
}

}  // namespace

TEST(InversePolynomial, DefaultHasUnitDcGain) {
  EXPECT_DOUBLE_EQ(InversePolynomial{}.dc_gain(), 1.0);
  EXPECT_DOUBLE_EQ(InversePolynomial::listing_variant().dc_gain(), -1.0);
  EXPECT_DOUBLE_EQ(InversePolynomial::text_variant().dc_gain(), -4.0);
}

TEST(InversePolynomial, Parse) {
  EXPECT_EQ(InversePolynomial::parse("3,-3,1").coeffs, (std::vector<double>{3, -3, 1}));
  EXPECT_EQ(InversePolynomial::parse("4, -6, 4, -1").coeffs.size(), 4u);
  EXPECT_THROW(InversePolynomial::parse(""), InvalidInput);
  EXPECT_THROW(InversePolynomial::parse("1,2,x"), InvalidInput);
  EXPECT_THROW(InversePolynomial::parse("1,2,3,4,5"), InvalidInput);
}

TEST(BuildInverse, MatchesExplicitExpansion) {
  const Kernel2D k = rasterize(0.3, 1.5, 0.8);
  const Kernel2D kk = convolve_kernels(k, k);
  const Kernel2D p = build_inverse(k, {});
  ASSERT_EQ(p.side, kk.side);
  const int r = p.radius();
  for (int dy = -r; dy <= r; ++dy)
    for (int dx = -r; dx <= r; ++dx) {
      double expect = kk.at(dy, dx);
      if (std::abs(dy) <= k.radius() && std::abs(dx) <= k.radius()) expect -= 3.0 * k.at(dy, dx);
      if (dy == 0 && dx == 0) expect += 3.0;
      EXPECT_NEAR(p.at(dy, dx), expect, 1e-12);
    }
  EXPECT_NEAR(p.sum(), 1.0, 1e-9);
}

TEST(BuildInverse, DiracKernelGivesDcGainDirac) {
  const Kernel2D p = build_inverse(Kernel2D::dirac(), {});
  EXPECT_EQ(p.side, 1);
  EXPECT_DOUBLE_EQ(p.taps[0], 1.0);
}

TEST(ApplyInverse, EquivalentToExplicitFilter) {
  const Plane img = testutil::random_plane(40, 50, 2);
  const Kernel2D k = rasterize(1.0, 1.2, 0.6);
  const Plane chained = apply_inverse(img, k, {});
  const Plane direct = convolve(img, build_inverse(k, {}));
  // Equal away from the border, where reflect padding of a chain differs.
  const int b = 2 * k.radius();
  for (int y = b; y < 40 - b; ++y)
    for (int x = b; x < 50 - b; ++x) EXPECT_NEAR(chained(y, x), direct(y, x), 1e-5);
}

TEST(ApplyInverse, ConstantPreservedWithUnitGain) {
  const Plane flat(30, 30, 0.4f);
  const Plane out = apply_inverse(flat, rasterize(0.0, 2.0, 1.0), {});
  for (float v : out.data()) EXPECT_NEAR(v, 0.4f, 1e-5f);
}

TEST(ApplyInverse, ReducesBlurError) {
  const Plane sharp = make_chart(128, 128, 4).channel(1);
  for (double s : {0.8, 1.2, 1.6}) {
    const Kernel2D k = rasterize(0.4, s, 0.6 * s);
    const Plane blurred = convolve(sharp, k);
    const Plane restored = apply_inverse(blurred, k, {});
    EXPECT_LT(rmse(restored, sharp, 12), rmse(blurred, sharp, 12)) << s;
  }
}

TEST(DeblurPatch, DiracEstimateIsIdentity) {
  const PlanarImage img = testutil::random_image(33, 47, 3, 5);
  const PlanarImage out = deblur_patch(img, BlurEstimate::dirac());
  EXPECT_EQ(testutil::max_abs_diff(out, img), 0.0);
}

TEST(DeblurPatch, DiracChannelsPassThroughOthersFiltered) {
  const PlanarImage img = apply_psf(make_chart(64, 64, 6), GaussianPsf{0.0, {{{1.5, 1.5}, {1.5, 1.5}, {1.5, 1.5}}}});
  BlurEstimate est;
  est.psf.channels[0] = {1.5, 1.0};
  const PlanarImage out = deblur_patch(img, est);
  EXPECT_GT(testutil::max_abs_diff(out.channel(0), img.channel(0)), 1e-3);
  EXPECT_EQ(testutil::max_abs_diff(out.channel(1), img.channel(1)), 0.0);
  EXPECT_EQ(testutil::max_abs_diff(out.channel(2), img.channel(2)), 0.0);
}

TEST(DeblurPatch, OutputClampedToUnitRange) {
  const PlanarImage img = make_chart(64, 64, 7);
  BlurEstimate est;
  for (auto& c : est.psf.channels) c = {3.0, 3.0};
  const PlanarImage out = deblur_patch(img, est, InversePolynomial::text_variant());
  for (float v : out.data()) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
}

TEST(DeblurPatch, SharedThetaPerChannelWidths) {
  const PlanarImage img = testutil::random_image(48, 48, 3, 8);
  BlurEstimate est;
  est.psf.theta = 0.7;
  est.psf.channels = {ChannelBlur{1.0, 0.5}, ChannelBlur{2.0, 1.0}, ChannelBlur{0.6, 0.4}};
  const PlanarImage out = deblur_patch(img, est);
  for (int c = 0; c < 3; ++c) {
    const auto& cb = est.psf.channels[c];
    Plane expect = apply_inverse(img.channel(c), rasterize(0.7, cb.sigma, cb.rho), {});
    clamp_unit(expect.data());
    EXPECT_EQ(testutil::max_abs_diff(out.channel(c), expect), 0.0) << c;
  }
}
