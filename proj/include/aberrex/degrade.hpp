#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "aberrex/blur_estimation.hpp"
#include "aberrex/deblur.hpp"
#include "aberrex/image.hpp"
#include "aberrex/psf.hpp"
#include "aberrex/warp.hpp"

namespace aberrex {

/// Inverse of the smoothstep tone curve 3x^2 - 2x^3, then x^2.2.
PlanarImage unprocess(const PlanarImage& display);
/// Forward counterpart: x^(1/2.2) then smoothstep.
PlanarImage reprocess(const PlanarImage& linear);

struct DegradeParams {
  GaussianPsf psf;
  Shift red_shift{};
  Shift blue_shift{};
  double alpha = 0.0;  ///< shot-noise weight
  double beta = 0.0;   ///< read-noise variance
  std::uint64_t seed = 0;
};

struct SamplePair {
  PlanarImage clean;          ///< linear, 3 channels
  Plane raw;                  ///< RGGB mosaic after noise and clipping
  PlanarImage aberrated_rgb;  ///< denoised + demosaicked raw
  DegradeParams params;
};

/// Each channel convolved with its own rasterized kernel; channels at the
/// std floor are copied unchanged.
PlanarImage apply_psf(const PlanarImage& image, const GaussianPsf& psf);

/// Standard normal deviate that depends only on (seed, stream, index).
double hashed_normal(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

/// RGGB: (even, even) red, (odd, odd) blue, green elsewhere.
int bayer_channel(int y, int x) noexcept;

/// Per channel: translation (red/blue only), Gaussian blur, heteroscedastic
/// noise N(0, alpha * s + beta), mosaic. `clip` applies the [0,1] saturation.
Plane simulate_raw(const PlanarImage& clean, const DegradeParams& params, bool clip = true);

Plane mosaick(const PlanarImage& rgb);

/// Hamilton-Adams: gradient-directed green with Laplacian correction, then
/// red/blue as green plus interpolated colour differences. H, W must be even.
PlanarImage demosaick_hamilton_adams(const Plane& raw);

/// Bilateral filter applied to each of the four Bayer sub-lattices.
Plane denoise_raw(const Plane& raw, double spatial_sigma, double range_sigma);

/// Full chain: simulate_raw, bilateral denoise (spatial 1.8, range
/// 3 sqrt(0.5 alpha + beta)), Hamilton-Adams.
SamplePair apply_forward_model(const PlanarImage& clean, const DegradeParams& params);

struct DatasetConfig {
  int crop = 128;
  double alpha_min = 1e-4;
  double alpha_max = 0.012;
  double beta_min = 1e-7;
  double beta_max = 4e-5;
  double max_shift = 4.0;
  AffineBlurModel model = AffineBlurModel::linear();
  InversePolynomial poly{};
};

/// Random parameters for sample `index`, a pure function of (seed, index).
DegradeParams sample_params(std::uint64_t seed, std::uint64_t index, const DatasetConfig& config);

/// Writes out_dir/{clean,raw,aberrated,deblurred}/NNNNNN.pfm and
/// out_dir/manifest.tsv. Sources are PNG/PPM (unprocessed) or PFM (taken as
/// linear). Returns the manifest path.
std::filesystem::path generate_dataset(const std::filesystem::path& source,
                                       int count, const std::filesystem::path& out_dir,
                                       const DatasetConfig& config, std::uint64_t seed);

struct ManifestRow {
  std::string id;
  DegradeParams params;
};
std::vector<ManifestRow> read_manifest(const std::filesystem::path& path);

}  // namespace aberrex
