#pragma once

#include <filesystem>
#include <iosfwd>

#include "aberrex/image.hpp"

namespace aberrex {

/// Reads PNG (8/16-bit gray or RGB, alpha dropped), binary PGM/PPM (P5/P6)
/// and PFM (Pf/PF). Integer samples are mapped to [0,1] by division by
/// 2^bits - 1. The result is tagged linear; callers retag display-referred
/// inputs.
PlanarImage read_image(const std::filesystem::path& path);

struct WriteOptions {
  int bit_depth = 8;  ///< 8 or 16, integer formats only
};

/// Format chosen by extension: .png, .ppm/.pgm, .pfm. Integer formats clamp
/// to [0,1] and quantize with round-half-up.
void write_image(const PlanarImage& image, const std::filesystem::path& path,
                 WriteOptions options = {});

/// PFM payload on an open stream; `name` only labels errors.
PlanarImage read_pfm(std::istream& in, const std::string& name);
void write_pfm(std::ostream& out, const PlanarImage& image);

}  // namespace aberrex
