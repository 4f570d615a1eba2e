#include "aberrex/tiling.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "aberrex/error.hpp"

namespace aberrex {

std::vector<int> axis_origins(int length, int patch, double overlap) {
  std::vector<int> out;
  if (patch >= length) return {0};
  const int stride =
      std::max(1, static_cast<int>(std::lround(patch * (1.0 - overlap))));
  for (int p = 0; p + patch < length; p += stride) out.push_back(p);
  const int last = length - patch;
  if (out.empty() || out.back() != last) out.push_back(last);
  return out;
}

PatchGrid tile(int height, int width, int patch_size, double overlap) {
  if (height <= 0 || width <= 0) throw InvalidInput("tile: empty image");
  if (patch_size < 32) throw InvalidInput("tile: patch size must be >= 32");
  if (!(overlap >= 0.0 && overlap <= 0.5))
    throw InvalidInput("tile: overlap must lie in [0, 0.5]");
  PatchGrid grid;
  grid.image_height = height;
  grid.image_width = width;
  grid.patch_size = patch_size;
  grid.overlap = overlap;
  grid.patch_height = std::min(patch_size, height);
  grid.patch_width = std::min(patch_size, width);
  const auto rows = axis_origins(height, grid.patch_height, overlap);
  const auto cols = axis_origins(width, grid.patch_width, overlap);
  for (int r : rows)
    for (int c : cols) grid.origins.push_back({r, c});
  return grid;
}

PlanarImage extract_patch(const PlanarImage& image, const PatchGrid& grid,
                          std::size_t index) {
  if (index >= grid.origins.size()) throw InvalidInput("patch index out of range");
  const auto& o = grid.origins[index];
  return crop(image, o.row, o.col, grid.patch_height, grid.patch_width);
}

std::vector<double> hamming_window(int n) {
  if (n <= 1) return std::vector<double>(std::max(n, 0), 1.0);
  std::vector<double> w(n);
  for (int i = 0; i < n; ++i)
    w[i] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * i / (n - 1));
  return w;
}

PlanarImage fuse(std::span<const PlanarImage> patches, const PatchGrid& grid) {
  if (patches.size() != grid.origins.size())
    throw InvalidInput("fuse: patch count does not match grid");
  if (patches.empty()) throw InvalidInput("fuse: no patches");
  const int channels = patches[0].channels();
  for (const auto& p : patches) {
    if (p.height() != grid.patch_height || p.width() != grid.patch_width ||
        p.channels() != channels)
      throw InvalidInput("fuse: patch shape does not match grid");
  }
  const auto wy = hamming_window(grid.patch_height);
  const auto wx = hamming_window(grid.patch_width);
  const int H = grid.image_height;
  const int W = grid.image_width;
  PlanarImage out(H, W, channels, patches[0].colorspace());

#pragma omp parallel
  {
    std::vector<double> num(static_cast<std::size_t>(W) * channels);
    std::vector<double> den(W);
#pragma omp for schedule(static)
    for (int y = 0; y < H; ++y) {
      std::fill(num.begin(), num.end(), 0.0);
      std::fill(den.begin(), den.end(), 0.0);
      for (std::size_t i = 0; i < patches.size(); ++i) {
        const auto& o = grid.origins[i];
        const int py = y - o.row;
        if (py < 0 || py >= grid.patch_height) continue;
        for (int px = 0; px < grid.patch_width; ++px) {
          const double w = wy[py] * wx[px];
          const int x = o.col + px;
          den[x] += w;
          for (int c = 0; c < channels; ++c)
            num[static_cast<std::size_t>(c) * W + x] += w * patches[i].at(c, py, px);
        }
      }
      for (int c = 0; c < channels; ++c)
        for (int x = 0; x < W; ++x)
          out.at(c, y, x) =
              static_cast<float>(num[static_cast<std::size_t>(c) * W + x] / den[x]);
    }
  }
  return out;
}

}  // namespace aberrex
