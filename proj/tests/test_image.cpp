#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <iterator>

#include "aberrex/error.hpp"
#include "aberrex/image.hpp"
#include "aberrex/image_io.hpp"
#include "test_util.hpp"

using namespace aberrex;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST(MirrorIndex, Reflect101) {
  EXPECT_EQ(mirror_index(-1, 5), 1);
  EXPECT_EQ(mirror_index(-2, 5), 2);
  EXPECT_EQ(mirror_index(5, 5), 3);
  EXPECT_EQ(mirror_index(6, 5), 2);
  EXPECT_EQ(mirror_index(3, 5), 3);
  EXPECT_EQ(mirror_index(-9, 5), 1);
  EXPECT_EQ(mirror_index(7, 1), 0);
}

TEST(PlanarImage, LayoutAndChannels) {
  PlanarImage img(2, 3, 3);
  EXPECT_EQ(img.data().size(), 18u);
  img.at(2, 1, 2) = 0.5f;
  EXPECT_EQ(img.plane_data(2)[5], 0.5f);
  Plane p = img.channel(2);
  EXPECT_EQ(p(1, 2), 0.5f);
  p(0, 0) = 0.25f;
  img.set_channel(0, p);
  EXPECT_EQ(img.at(0, 0, 0), 0.25f);
  EXPECT_THROW(img.set_channel(1, Plane(3, 3)), InvalidInput);
}

TEST(Gamma, FixedPoints) {
  PlanarImage img(1, 2, 1);
  img.at(0, 0, 1) = 1.0f;
  const auto d = gamma_decode(img);
  const auto e = gamma_encode(img);
  EXPECT_EQ(d.at(0, 0, 0), 0.0f);
  EXPECT_EQ(d.at(0, 0, 1), 1.0f);
  EXPECT_EQ(e.at(0, 0, 0), 0.0f);
  EXPECT_EQ(e.at(0, 0, 1), 1.0f);
  EXPECT_EQ(d.colorspace(), ColorSpace::linear);
  EXPECT_EQ(e.colorspace(), ColorSpace::gamma22);
}

TEST(Gamma, ScalarAndRoundTrip) {
  PlanarImage img(1, 1, 1, ColorSpace::linear, 0.5f);
  EXPECT_NEAR(gamma_decode(img).at(0, 0, 0), std::pow(0.5, 2.2), 1e-7);
  EXPECT_NEAR(gamma_decode(img).at(0, 0, 0), 0.2176, 1e-4);
  img.at(0, 0, 0) = 0.25f;
  EXPECT_NEAR(gamma_decode(gamma_encode(img)).at(0, 0, 0), 0.25, 1e-6);
}

TEST(Gamma, MonotoneInverseOnGrid) {
  PlanarImage img(1, 1001, 1);
  for (int i = 0; i <= 1000; ++i) img.at(0, 0, i) = i / 1000.0f;
  const auto d = gamma_decode(img);
  const auto e = gamma_encode(img);
  for (int i = 1; i <= 1000; ++i) {
    EXPECT_LE(d.at(0, 0, i - 1), d.at(0, 0, i));
    EXPECT_LE(e.at(0, 0, i - 1), e.at(0, 0, i));
  }
  EXPECT_LE(testutil::max_abs_diff(gamma_encode(d), img), 1e-6);
  EXPECT_LE(testutil::max_abs_diff(gamma_decode(e), img), 1e-6);
}

TEST(Gamma, ClampsOutOfRange) {
  PlanarImage img(1, 2, 1);
  img.at(0, 0, 0) = -0.5f;
  img.at(0, 0, 1) = 1.5f;
  const auto d = gamma_decode(img);
  EXPECT_EQ(d.at(0, 0, 0), 0.0f);
  EXPECT_EQ(d.at(0, 0, 1), 1.0f);
}

TEST(ImageIo, EightBitMaxIsOne) {
  const auto dir = testutil::scratch_dir("io8");
  PlanarImage img(2, 2, 3, ColorSpace::linear, 1.0f);
  write_image(img, dir / "white.png");
  const auto back = read_image(dir / "white.png");
  ASSERT_EQ(back.channels(), 3);
  for (float v : back.data()) EXPECT_EQ(v, 1.0f);
}

TEST(ImageIo, SixteenBitScaling) {
  const auto dir = testutil::scratch_dir("io16");
  {
    std::ofstream out(dir / "v.pgm", std::ios::binary);
    out << "P5\n1 1\n65535\n";
    out.put(static_cast<char>(0x80));
    out.put(0);
  }
  EXPECT_FLOAT_EQ(read_image(dir / "v.pgm").at(0, 0, 0), 32768.0f / 65535.0f);
  PlanarImage img(1, 1, 1, ColorSpace::linear, 32768.0f / 65535.0f);
  write_image(img, dir / "v.png", {16});
  EXPECT_FLOAT_EQ(read_image(dir / "v.png").at(0, 0, 0), 32768.0f / 65535.0f);
}

TEST(ImageIo, EightBitPngRoundTripIsBitIdentical) {
  const auto dir = testutil::scratch_dir("iort");
  PlanarImage img = testutil::random_image(17, 23, 3, 5);
  for (float& v : img.data()) v = std::round(v * 255.0f) / 255.0f;
  write_image(img, dir / "a.png");
  const auto a = read_image(dir / "a.png");
  EXPECT_EQ(testutil::max_abs_diff(a, img), 0.0);
  write_image(a, dir / "b.png");
  EXPECT_EQ(slurp(dir / "a.png"), slurp(dir / "b.png"));
  const auto b = read_image(dir / "b.png");
  EXPECT_EQ(testutil::max_abs_diff(a, b), 0.0);
}

TEST(ImageIo, GrayPngAndPpm) {
  const auto dir = testutil::scratch_dir("iogray");
  PlanarImage gray = testutil::random_image(5, 7, 1, 2);
  for (float& v : gray.data()) v = std::round(v * 255.0f) / 255.0f;
  write_image(gray, dir / "g.png");
  EXPECT_EQ(testutil::max_abs_diff(read_image(dir / "g.png"), gray), 0.0);
  PlanarImage rgb = testutil::random_image(5, 7, 3, 3);
  for (float& v : rgb.data()) v = std::round(v * 65535.0f) / 65535.0f;
  write_image(rgb, dir / "c.ppm", {16});
  EXPECT_LE(testutil::max_abs_diff(read_image(dir / "c.ppm"), rgb), 1e-7);
}

TEST(ImageIo, RoundHalfUp) {
  const auto dir = testutil::scratch_dir("iohalf");
  PlanarImage img(1, 2, 1);
  img.at(0, 0, 0) = 0.5f / 255.0f;
  img.at(0, 0, 1) = 0.49f / 255.0f;
  write_image(img, dir / "h.pgm");
  const auto back = read_image(dir / "h.pgm");
  EXPECT_FLOAT_EQ(back.at(0, 0, 0), 1.0f / 255.0f);
  EXPECT_EQ(back.at(0, 0, 1), 0.0f);
}

TEST(ImageIo, PfmIsLossless) {
  const auto dir = testutil::scratch_dir("iopfm");
  PlanarImage rgb = testutil::random_image(9, 4, 3, 4);
  rgb.at(1, 2, 3) = 1.75f;  // out-of-range values survive
  write_image(rgb, dir / "c.pfm");
  EXPECT_EQ(testutil::max_abs_diff(read_image(dir / "c.pfm"), rgb), 0.0);
  PlanarImage gray = testutil::random_image(3, 8, 1, 6);
  write_image(gray, dir / "g.pfm");
  const auto back = read_image(dir / "g.pfm");
  EXPECT_EQ(back.channels(), 1);
  EXPECT_EQ(testutil::max_abs_diff(back, gray), 0.0);
}

TEST(ImageIo, Errors) {
  const auto dir = testutil::scratch_dir("ioerr");
  EXPECT_THROW(read_image(dir / "missing.png"), IoError);
  {
    std::ofstream out(dir / "junk.png", std::ios::binary);
    out << "not an image at all";
  }
  EXPECT_THROW(read_image(dir / "junk.png"), IoError);
  PlanarImage img = testutil::random_image(16, 16, 3, 1);
  write_image(img, dir / "t.png");
  write_image(img, dir / "t.pfm");
  for (const char* name : {"t.png", "t.pfm"}) {
    std::string bytes = slurp(dir / name);
    std::ofstream out(dir / (std::string("cut_") + name), std::ios::binary);
    out << bytes.substr(0, bytes.size() / 2);
  }
  EXPECT_THROW(read_image(dir / "cut_t.png"), IoError);
  EXPECT_THROW(read_image(dir / "cut_t.pfm"), IoError);
  try {
    read_image(dir / "cut_t.pfm");
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("cut_t.pfm"), std::string::npos);
  }
  EXPECT_THROW(write_image(img, dir / "x.bmp"), IoError);
}

TEST(Crop, CopiesWindow) {
  PlanarImage img = testutil::random_image(10, 12, 3, 9);
  const auto c = crop(img, 2, 3, 4, 5);
  EXPECT_EQ(c.height(), 4);
  EXPECT_EQ(c.width(), 5);
  EXPECT_EQ(c.at(1, 3, 4), img.at(1, 5, 7));
  EXPECT_THROW(crop(img, 8, 0, 4, 4), InvalidInput);
}
