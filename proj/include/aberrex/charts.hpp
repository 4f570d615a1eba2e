#pragma once

#include <cstdint>

#include "aberrex/image.hpp"

namespace aberrex {

enum class ChartKind {
  shapes,  ///< random polygons, ellipses and bars on a flat background
  siemens  ///< Siemens star centered in the frame
};

/// Linear RGB test chart, each pixel the coverage average of supersample^2
/// point samples (1 gives hard, pixel-aligned edges). Shapes are dark or
/// light gray with occasional color tints; values stay in [0.05, 0.95].
PlanarImage make_chart(int height, int width, std::uint64_t seed,
                       ChartKind kind = ChartKind::shapes, int supersample = 4);

}  // namespace aberrex
