#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <vector>

#include "aberrex/image.hpp"
#include "aberrex/psf.hpp"

namespace aberrex {

/// Affine link between gradient extremes and blur width:
/// std = sqrt(C^2 / |grad|_inf^2 - sigma_b^2).
struct AffineBlurModel {
  double C = 0.415;
  double sigma_b = 0.358;

  static AffineBlurModel linear() { return {0.415, 0.358}; }
  static AffineBlurModel jpeg() { return {0.371, 0.453}; }
};

AffineBlurModel read_affine_model(const std::filesystem::path& path);
void write_affine_model(const AffineBlurModel& model, const std::filesystem::path& path);

/// How the 30-degree direction scores are resampled to the 6-degree grid.
enum class AngleInterpolation {
  cubic,  ///< periodic Keys cubic (a = -0.5)
  linear  ///< piecewise linear; the argmin always falls on a 30-degree node
};

struct EstimatorSettings {
  double quantile = 0.001;
  double variance_threshold = 0.09;
  int border = 2;  ///< pixels excluded from the infinity norm
  AngleInterpolation interpolation = AngleInterpolation::cubic;
};

/// Result of blind estimation on one RGB patch.
struct BlurEstimate {
  GaussianPsf psf;
  std::array<bool, 3> flat{false, false, false};

  /// True when both stds sit on the floor: the channel is left untouched.
  bool is_dirac(int c) const noexcept {
    return flat[c] ||
           (psf.channels[c].sigma <= kMinStd && psf.channels[c].rho <= kMinStd);
  }
  static BlurEstimate dirac();
};

struct NormalizedPlane {
  Plane values;
  bool flat = false;
};

/// Quantile stretch clamp((v - v[q]) / (v[1-q] - v[q]), 0, 1); quantiles use
/// linear interpolation between order statistics. Ranges below 1e-6 are
/// reported flat with an all-zero plane.
NormalizedPlane normalize(const Plane& channel, double quantile = 0.001);

/// Forward-difference derivatives with a mirrored last row/column.
struct Gradients {
  Plane dx;
  Plane dy;
};
Gradients gradients(const Plane& plane);

/// max |cos(phi) dx + sin(phi) dy| over the interior (border excluded).
double directional_inf_norm(const Gradients& g, double phi, int border = 2);

/// Scores at 0, 30, ..., 180 degrees, interpolated to 6 degree steps; argmin
/// with ties resolved to the smallest angle, folded to [0, pi).
/// Throws NumericalError when every score is zero (flat patch).
double estimate_direction(const Plane& normalized_green, const EstimatorSettings& settings = {});

/// Affine rule plus the conservative clamp: results outside (0, 4], negative
/// radicands and low-variance planes all map to kMinStd.
double std_from_norm(double grad_inf_norm, const AffineBlurModel& model);
ChannelBlur estimate_sigmas(const Plane& normalized, double theta,
                            const AffineBlurModel& model,
                            const EstimatorSettings& settings = {});

BlurEstimate estimate(const PlanarImage& patch, const AffineBlurModel& model,
                      const EstimatorSettings& settings = {});

/// One calibration observation: infinity norm of the normalized gradient along
/// a principal direction, and the true std along that direction.
struct CalibrationSample {
  double grad_inf_norm = 0.0;
  double true_std = 0.0;
};

/// Samples along theta and theta + pi/2 for every channel of a blurred image
/// with known PSF.
std::vector<CalibrationSample> calibration_samples(const PlanarImage& blurred,
                                                   const GaussianPsf& truth,
                                                   const EstimatorSettings& settings = {});

/// Least-absolute-deviation fit of true_std^2 = C^2 t - sigma_b^2 with
/// t = 1 / norm^2 (iteratively reweighted least squares).
/// Throws NumericalError with fewer than two distinct gradient levels.
AffineBlurModel calibrate(std::span<const CalibrationSample> samples);

}  // namespace aberrex
