#include "aberrex/image.hpp"

#include <algorithm>
#include <cmath>

#include "aberrex/error.hpp"

namespace aberrex {

Plane::Plane(int height, int width, float fill)
    : height_(height), width_(width) {
  if (height < 0 || width < 0) throw InvalidInput("negative plane size");
  data_.assign(static_cast<std::size_t>(height) * static_cast<std::size_t>(width), fill);
}

PlanarImage::PlanarImage(int height, int width, int channels, ColorSpace space,
                         float fill)
    : height_(height), width_(width), channels_(channels), space_(space) {
  if (height < 0 || width < 0 || channels < 0)
    throw InvalidInput("negative image size");
  data_.assign(plane_size() * static_cast<std::size_t>(channels), fill);
}

PlanarImage PlanarImage::from_planes(std::span<const Plane> planes,
                                     ColorSpace space) {
  if (planes.empty()) throw InvalidInput("no planes");
  PlanarImage out(planes[0].height(), planes[0].width(),
                  static_cast<int>(planes.size()), space);
  for (std::size_t c = 0; c < planes.size(); ++c) {
    out.set_channel(static_cast<int>(c), planes[c]);
  }
  return out;
}

Plane PlanarImage::channel(int c) const {
  if (c < 0 || c >= channels_) throw InvalidInput("channel index out of range");
  Plane out(height_, width_);
  auto src = plane_data(c);
  std::copy(src.begin(), src.end(), out.data().begin());
  return out;
}

void PlanarImage::set_channel(int c, const Plane& plane) {
  if (c < 0 || c >= channels_) throw InvalidInput("channel index out of range");
  if (plane.height() != height_ || plane.width() != width_)
    throw InvalidInput("plane shape does not match image");
  auto src = plane.data();
  std::copy(src.begin(), src.end(), plane_data(c).begin());
}

namespace {

PlanarImage apply_power(const PlanarImage& image, double exponent,
                        ColorSpace tag) {
  PlanarImage out = image;
  out.set_colorspace(tag);
  const float e = static_cast<float>(exponent);
  for (float& v : out.data()) {
    v = std::pow(std::clamp(v, 0.0f, 1.0f), e);
  }
  return out;
}

}  // namespace

PlanarImage gamma_decode(const PlanarImage& image, double exponent) {
  return apply_power(image, exponent, ColorSpace::linear);
}

PlanarImage gamma_encode(const PlanarImage& image, double exponent) {
  return apply_power(image, 1.0 / exponent, ColorSpace::gamma22);
}

void clamp_unit(std::span<float> samples) {
  for (float& v : samples) v = std::clamp(v, 0.0f, 1.0f);
}

bool all_finite(std::span<const float> samples) {
  return std::all_of(samples.begin(), samples.end(),
                     [](float v) { return std::isfinite(v); });
}

PlanarImage crop(const PlanarImage& image, int row, int col, int h, int w) {
  if (row < 0 || col < 0 || h < 0 || w < 0 || row + h > image.height() ||
      col + w > image.width())
    throw InvalidInput("crop window outside image");
  PlanarImage out(h, w, image.channels(), image.colorspace());
  for (int c = 0; c < image.channels(); ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) out.at(c, y, x) = image.at(c, row + y, col + x);
  return out;
}

Plane crop(const Plane& plane, int row, int col, int h, int w) {
  if (row < 0 || col < 0 || h < 0 || w < 0 || row + h > plane.height() ||
      col + w > plane.width())
    throw InvalidInput("crop window outside plane");
  Plane out(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) out(y, x) = plane(row + y, col + x);
  return out;
}

}  // namespace aberrex
