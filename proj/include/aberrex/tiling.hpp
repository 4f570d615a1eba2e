#pragma once

#include <span>
#include <vector>

#include "aberrex/image.hpp"

namespace aberrex {

struct PatchOrigin {
  int row = 0;
  int col = 0;
  bool operator==(const PatchOrigin&) const = default;
};

/// Overlapping tiling of an image. Patches are patch_height x patch_width
/// (the nominal size clamped to the image extent) and never leave the image:
/// the last origin on each axis is shifted back to end at the border.
struct PatchGrid {
  int image_height = 0;
  int image_width = 0;
  int patch_size = 0;
  double overlap = 0.0;
  int patch_height = 0;
  int patch_width = 0;
  std::vector<PatchOrigin> origins;  ///< row-major order
};

/// Anchors along one axis of `length` for patches of `patch` pixels.
std::vector<int> axis_origins(int length, int patch, double overlap);

/// Throws InvalidInput for empty images, patch_size < 32 or overlap outside
/// [0, 0.5].
PatchGrid tile(int height, int width, int patch_size, double overlap);
inline PatchGrid tile(const PlanarImage& image, int patch_size, double overlap) {
  return tile(image.height(), image.width(), patch_size, overlap);
}

PlanarImage extract_patch(const PlanarImage& image, const PatchGrid& grid,
                          std::size_t index);

/// Symmetric Hamming window 0.54 - 0.46 cos(2 pi n / (N - 1)); N = 1 gives {1}.
std::vector<double> hamming_window(int n);

/// Hamming-weighted overlap-add normalized by the accumulated weight.
/// Contributions are summed in patch order for every pixel, so the result
/// does not depend on the number of worker threads.
PlanarImage fuse(std::span<const PlanarImage> patches, const PatchGrid& grid);

}  // namespace aberrex
