#include "aberrex/kernels.hpp"

#include <omp.h>

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "aberrex/error.hpp"

namespace aberrex {

namespace {
constexpr int kConvBandRows = 8;
constexpr int kGemmBandRows = 4;
}  // namespace

double Kernel2D::sum() const noexcept {
  return std::accumulate(taps.begin(), taps.end(), 0.0);
}

Kernel2D convolve_kernels(const Kernel2D& a, const Kernel2D& b) {
  Kernel2D out;
  out.side = a.side + b.side - 1;
  out.taps.assign(static_cast<std::size_t>(out.side) * out.side, 0.0);
  for (int ay = 0; ay < a.side; ++ay)
    for (int ax = 0; ax < a.side; ++ax) {
      const double va = a.taps[static_cast<std::size_t>(ay) * a.side + ax];
      if (va == 0.0) continue;
      for (int by = 0; by < b.side; ++by)
        for (int bx = 0; bx < b.side; ++bx)
          out.taps[static_cast<std::size_t>(ay + by) * out.side + ax + bx] +=
              va * b.taps[static_cast<std::size_t>(by) * b.side + bx];
    }
  return out;
}

Plane convolve_serial(const Plane& input, const Kernel2D& kernel) {
  const int r = kernel.radius();
  Plane out(input.height(), input.width());
  for (int y = 0; y < input.height(); ++y)
    for (int x = 0; x < input.width(); ++x) {
      double acc = 0.0;
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx)
          acc += kernel.at(dy, dx) * input.mirrored(y - dy, x - dx);
      out(y, x) = static_cast<float>(acc);
    }
  return out;
}

Plane convolve(const Plane& input, const Kernel2D& kernel) {
  const int H = input.height();
  const int W = input.width();
  const int r = kernel.radius();
  const int PW = W + 2 * r;
  // Mirror-padded copy so the inner loop is a contiguous multiply-add.
  std::vector<float> padded(static_cast<std::size_t>(H + 2 * r) * PW);
  for (int y = 0; y < H + 2 * r; ++y) {
    const int sy = mirror_index(y - r, H);
    for (int x = 0; x < PW; ++x)
      padded[static_cast<std::size_t>(y) * PW + x] = input(sy, mirror_index(x - r, W));
  }
  Plane out(H, W);
  const int bands = (H + kConvBandRows - 1) / kConvBandRows;
#pragma omp parallel
  {
    std::vector<double> acc(W);
#pragma omp for schedule(static)
    for (int band = 0; band < bands; ++band) {
      const int y_end = std::min(H, (band + 1) * kConvBandRows);
      for (int y = band * kConvBandRows; y < y_end; ++y) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for (int dy = -r; dy <= r; ++dy) {
          const float* src_row = padded.data() + static_cast<std::size_t>(y - dy + r) * PW;
          for (int dx = -r; dx <= r; ++dx) {
            const double w = kernel.at(dy, dx);
            if (w == 0.0) continue;
            const float* src = src_row + (r - dx);
            for (int x = 0; x < W; ++x) acc[x] += w * src[x];
          }
        }
        auto dst = out.row(y);
        for (int x = 0; x < W; ++x) dst[x] = static_cast<float>(acc[x]);
      }
    }
  }
  return out;
}

namespace {

void check_conv(const FeatureMap& input, const Conv3x3Params& p) {
  if (input.channels != p.in_channels)
    throw InvalidInput("conv3x3: input channel count mismatch");
  if (p.weights.size() != static_cast<std::size_t>(p.out_channels) * p.in_channels * 9 ||
      p.scale.size() != static_cast<std::size_t>(p.out_channels) ||
      p.shift.size() != static_cast<std::size_t>(p.out_channels))
    throw InvalidInput("conv3x3: parameter size mismatch");
  if (input.height < 2 || input.width < 2)
    throw InvalidInput("conv3x3: feature map smaller than 2x2");
}

inline float epilogue(double v, const Conv3x3Params& p, int co) {
  float y = static_cast<float>(p.scale[co] * v + p.shift[co]);
  if (p.relu && y < 0.0f) y = 0.0f;
  return y;
}

}  // namespace

FeatureMap conv3x3_reference(const FeatureMap& input, const Conv3x3Params& p) {
  check_conv(input, p);
  const int H = input.height;
  const int W = input.width;
  FeatureMap out(p.out_channels, H, W);
  for (int co = 0; co < p.out_channels; ++co)
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        double acc = 0.0;
        for (int ci = 0; ci < p.in_channels; ++ci)
          for (int ky = 0; ky < 3; ++ky)
            for (int kx = 0; kx < 3; ++kx) {
              const float w = p.weights[((static_cast<std::size_t>(co) * p.in_channels + ci) * 3 + ky) * 3 + kx];
              acc += static_cast<double>(w) *
                     input.at(ci, mirror_index(y + ky - 1, H), mirror_index(x + kx - 1, W));
            }
        out.at(co, y, x) = epilogue(acc, p, co);
      }
  return out;
}

FeatureMap conv3x3(const FeatureMap& input, const Conv3x3Params& p) {
  check_conv(input, p);
  using RowMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const int H = input.height;
  const int W = input.width;
  const int K = p.in_channels * 9;
  FeatureMap out(p.out_channels, H, W);
  const Eigen::Map<const RowMatrix> weights(p.weights.data(), p.out_channels, K);
  const int bands = (H + kGemmBandRows - 1) / kGemmBandRows;

#pragma omp parallel
  {
    RowMatrix cols(K, static_cast<Eigen::Index>(kGemmBandRows) * W);
    RowMatrix result(p.out_channels, static_cast<Eigen::Index>(kGemmBandRows) * W);
    std::vector<int> xm(W + 2);
    for (int x = -1; x <= W; ++x) xm[x + 1] = mirror_index(x, W);
#pragma omp for schedule(static)
    for (int band = 0; band < bands; ++band) {
      const int y0 = band * kGemmBandRows;
      const int rows = std::min(kGemmBandRows, H - y0);
      const Eigen::Index n = static_cast<Eigen::Index>(rows) * W;
      // im2col: row k = ci * 9 + ky * 3 + kx, column = pixel within the band.
      for (int ci = 0; ci < p.in_channels; ++ci) {
        const float* plane = input.data.data() + ci * input.plane_size();
        for (int ky = 0; ky < 3; ++ky)
          for (int kx = 0; kx < 3; ++kx) {
            float* dst = cols.data() + static_cast<Eigen::Index>(ci * 9 + ky * 3 + kx) * cols.cols();
            for (int yy = 0; yy < rows; ++yy) {
              const float* src = plane + static_cast<std::size_t>(mirror_index(y0 + yy + ky - 1, H)) * W;
              float* d = dst + static_cast<std::size_t>(yy) * W;
              d[0] = src[xm[kx]];
              d[W - 1] = src[xm[W - 1 + kx]];
              const float* s = src + kx - 1;
              for (int x = 1; x < W - 1; ++x) d[x] = s[x];
            }
          }
      }
      result.leftCols(n).noalias() = weights * cols.leftCols(n);
      for (int co = 0; co < p.out_channels; ++co) {
        float* dst = out.data.data() + co * out.plane_size() + static_cast<std::size_t>(y0) * W;
        const float* src = result.data() + static_cast<Eigen::Index>(co) * result.cols();
        const float s = p.scale[co];
        const float b = p.shift[co];
        if (p.relu) {
          for (Eigen::Index i = 0; i < n; ++i) dst[i] = std::max(0.0f, s * src[i] + b);
        } else {
          for (Eigen::Index i = 0; i < n; ++i) dst[i] = s * src[i] + b;
        }
      }
    }
  }
  return out;
}

namespace {

inline int bilateral_radius(double spatial_sigma) {
  return static_cast<int>(std::ceil(2.0 * spatial_sigma));
}

}  // namespace

Plane bilateral_serial(const Plane& input, double spatial_sigma, double range_sigma) {
  if (range_sigma <= 0.0 || spatial_sigma <= 0.0) return input;
  const int r = bilateral_radius(spatial_sigma);
  const double ks = -0.5 / (spatial_sigma * spatial_sigma);
  const double kr = -0.5 / (range_sigma * range_sigma);
  Plane out(input.height(), input.width());
  for (int y = 0; y < input.height(); ++y)
    for (int x = 0; x < input.width(); ++x) {
      const double center = input(y, x);
      double num = 0.0;
      double den = 0.0;
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
          const double v = input.mirrored(y + dy, x + dx);
          const double w = std::exp(ks * (dy * dy + dx * dx) + kr * (v - center) * (v - center));
          num += w * v;
          den += w;
        }
      out(y, x) = static_cast<float>(num / den);
    }
  return out;
}

Plane bilateral(const Plane& input, double spatial_sigma, double range_sigma) {
  if (range_sigma <= 0.0 || spatial_sigma <= 0.0) return input;
  const int r = bilateral_radius(spatial_sigma);
  const int side = 2 * r + 1;
  const double ks = -0.5 / (spatial_sigma * spatial_sigma);
  const double kr = -0.5 / (range_sigma * range_sigma);
  std::vector<double> spatial(static_cast<std::size_t>(side) * side);
  for (int dy = -r; dy <= r; ++dy)
    for (int dx = -r; dx <= r; ++dx)
      spatial[static_cast<std::size_t>(dy + r) * side + dx + r] = ks * (dy * dy + dx * dx);
  const int H = input.height();
  const int W = input.width();
  Plane out(H, W);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const double center = input(y, x);
      double num = 0.0;
      double den = 0.0;
      const bool interior = y >= r && y < H - r && x >= r && x < W - r;
      for (int dy = -r; dy <= r; ++dy) {
        const double* sw = spatial.data() + static_cast<std::size_t>(dy + r) * side + r;
        for (int dx = -r; dx <= r; ++dx) {
          const double v = interior ? input(y + dy, x + dx) : input.mirrored(y + dy, x + dx);
          const double d = v - center;
          const double w = std::exp(sw[dx] + kr * d * d);
          num += w * v;
          den += w;
        }
      }
      out(y, x) = static_cast<float>(num / den);
    }
  }
  return out;
}

int worker_count() { return omp_get_max_threads(); }

void set_worker_count(int n) {
  if (n < 1) throw InvalidInput("thread count must be >= 1");
  omp_set_num_threads(n);
}

}  // namespace aberrex
