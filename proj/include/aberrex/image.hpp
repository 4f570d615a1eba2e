#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace aberrex {

enum class ColorSpace { linear, gamma22 };

/// Reflect-101 boundary index: ... 2 1 | 0 1 2 ... n-1 | n-2 n-3 ...
/// Works for offsets of any size by folding with period 2(n-1).
inline int mirror_index(int i, int n) noexcept {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

/// Single-channel float image, row-major.
class Plane {
 public:
  Plane() = default;
  Plane(int height, int width, float fill = 0.0f);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  float& operator()(int y, int x) noexcept { return data_[index(y, x)]; }
  float operator()(int y, int x) const noexcept { return data_[index(y, x)]; }
  /// Sample with reflect-101 boundary handling.
  float mirrored(int y, int x) const noexcept {
    return data_[index(mirror_index(y, height_), mirror_index(x, width_))];
  }

  std::span<float> row(int y) noexcept {
    return {data_.data() + index(y, 0), static_cast<std::size_t>(width_)};
  }
  std::span<const float> row(int y) const noexcept {
    return {data_.data() + index(y, 0), static_cast<std::size_t>(width_)};
  }
  std::span<float> data() noexcept { return data_; }
  std::span<const float> data() const noexcept { return data_; }

  bool same_shape(const Plane& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_;
  }

 private:
  std::size_t index(int y, int x) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<float> data_;
};

/// H x W x C float image, channel-planar and row-major within a plane.
class PlanarImage {
 public:
  PlanarImage() = default;
  PlanarImage(int height, int width, int channels,
              ColorSpace space = ColorSpace::linear, float fill = 0.0f);
  /// Assemble from equally sized planes.
  static PlanarImage from_planes(std::span<const Plane> planes,
                                 ColorSpace space = ColorSpace::linear);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int channels() const noexcept { return channels_; }
  ColorSpace colorspace() const noexcept { return space_; }
  void set_colorspace(ColorSpace space) noexcept { space_ = space; }
  bool empty() const noexcept { return data_.empty(); }

  std::size_t plane_size() const noexcept {
    return static_cast<std::size_t>(height_) * static_cast<std::size_t>(width_);
  }
  float& at(int c, int y, int x) noexcept { return data_[index(c, y, x)]; }
  float at(int c, int y, int x) const noexcept { return data_[index(c, y, x)]; }

  std::span<float> plane_data(int c) noexcept {
    return {data_.data() + c * plane_size(), plane_size()};
  }
  std::span<const float> plane_data(int c) const noexcept {
    return {data_.data() + c * plane_size(), plane_size()};
  }
  std::span<float> data() noexcept { return data_; }
  std::span<const float> data() const noexcept { return data_; }

  Plane channel(int c) const;
  void set_channel(int c, const Plane& plane);

  bool same_shape(const PlanarImage& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_ &&
           channels_ == other.channels_;
  }

 private:
  std::size_t index(int c, int y, int x) const noexcept {
    return static_cast<std::size_t>(c) * plane_size() +
           static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  ColorSpace space_ = ColorSpace::linear;
  std::vector<float> data_;
};

/// x -> clamp(x, 0, 1)^exponent per sample; result tagged linear.
PlanarImage gamma_decode(const PlanarImage& image, double exponent = 2.2);
/// x -> clamp(x, 0, 1)^(1/exponent) per sample; result tagged gamma22.
PlanarImage gamma_encode(const PlanarImage& image, double exponent = 2.2);

void clamp_unit(std::span<float> samples);
bool all_finite(std::span<const float> samples);

/// Copy of the h x w window whose top-left corner is (row, col).
PlanarImage crop(const PlanarImage& image, int row, int col, int h, int w);
Plane crop(const Plane& plane, int row, int col, int h, int w);

}  // namespace aberrex
