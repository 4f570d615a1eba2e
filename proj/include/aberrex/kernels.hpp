#pragma once

// Data-parallel compute kernels. Each hot loop has an OpenMP version and a
// plain serial reference kept for tests and benchmarks. Work is split into
// fixed-size row bands so results are bit-identical for any thread count.

#include <span>
#include <vector>

#include "aberrex/image.hpp"

namespace aberrex {

/// Odd-sided, centered 2D filter. Taps are stored row-major; tap (dy, dx)
/// with dy, dx in [-radius, radius] lives at (dy + radius) * side + dx + radius.
struct Kernel2D {
  int side = 1;
  std::vector<double> taps{1.0};

  int radius() const noexcept { return side / 2; }
  double at(int dy, int dx) const noexcept {
    return taps[static_cast<std::size_t>(dy + radius()) * side + dx + radius()];
  }
  double sum() const noexcept;
  static Kernel2D dirac() { return {}; }
};

/// Full (support-growing) convolution of two kernels.
Kernel2D convolve_kernels(const Kernel2D& a, const Kernel2D& b);

/// Same-size 2D convolution with reflect-101 boundary, 64-bit accumulation:
/// out(y, x) = sum k(dy, dx) * in(y - dy, x - dx).
Plane convolve(const Plane& input, const Kernel2D& kernel);
Plane convolve_serial(const Plane& input, const Kernel2D& kernel);

/// Channel-major stack of feature planes: data[c * H * W + y * W + x].
struct FeatureMap {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<float> data;

  FeatureMap() = default;
  FeatureMap(int c, int h, int w)
      : channels(c), height(h), width(w),
        data(static_cast<std::size_t>(c) * h * w, 0.0f) {}
  std::size_t plane_size() const noexcept {
    return static_cast<std::size_t>(height) * width;
  }
  float& at(int c, int y, int x) noexcept {
    return data[c * plane_size() + static_cast<std::size_t>(y) * width + x];
  }
  float at(int c, int y, int x) const noexcept {
    return data[c * plane_size() + static_cast<std::size_t>(y) * width + x];
  }
};

/// Stride-1 3x3 convolution (cross-correlation, as in CNN frameworks) with
/// reflect padding of one pixel. `weights` is out x in x 3 x 3 row-major.
/// Per output channel, y = scale * conv + shift, then optional ReLU.
struct Conv3x3Params {
  int out_channels = 0;
  int in_channels = 0;
  std::span<const float> weights;
  std::span<const float> scale;  ///< per output channel
  std::span<const float> shift;  ///< per output channel
  bool relu = false;
};

FeatureMap conv3x3(const FeatureMap& input, const Conv3x3Params& params);
FeatureMap conv3x3_reference(const FeatureMap& input, const Conv3x3Params& params);

/// Bilateral filter over a (2 ceil(2 spatial_sigma) + 1)^2 window with
/// reflect-101 boundary. range_sigma <= 0 returns the input unchanged.
Plane bilateral(const Plane& input, double spatial_sigma, double range_sigma);
Plane bilateral_serial(const Plane& input, double spatial_sigma, double range_sigma);

/// Number of OpenMP workers used by the parallel kernels.
int worker_count();
void set_worker_count(int n);

}  // namespace aberrex
