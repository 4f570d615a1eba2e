#pragma once

#include "aberrex/blur_estimation.hpp"
#include "aberrex/deblur.hpp"
#include "aberrex/image.hpp"

namespace aberrex {

struct SsimConfig {
  int window = 11;
  double window_sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;
};

/// Mean SSIM over all positions where the Gaussian window fits ("valid").
double ssim(const Plane& a, const Plane& b, const SsimConfig& cfg = {});
/// Channel-averaged SSIM.
double ssim(const PlanarImage& a, const PlanarImage& b, const SsimConfig& cfg = {});

struct SsimRatio {
  double ratio = 1.0;
  double ssim_true = 0.0;       ///< deblurred with the true kernel
  double ssim_estimated = 0.0;  ///< deblurred with the estimated kernel
  int shift_x = 0;
  int shift_y = 0;
};

/// (SSIM[p(g) * v, u] + 2) / (SSIM[p(g_est) * v, u] + 2). The integer shift
/// in [-2, 2]^2 maximizing the true-kernel SSIM is applied to both, and
/// 15-pixel borders are cropped. Images below 61x61 are rejected.
SsimRatio ssim_ratio(const PlanarImage& blurry, const PlanarImage& clean,
                     const BlurEstimate& truth, const BlurEstimate& estimated,
                     const InversePolynomial& poly = {});

/// Chroma-gradient energy: sum over c in {R, B} and both axes of the mean
/// |dz_G / z_G - du_c / u_c|, forward differences, divisors floored at eps.
double energy(const Plane& u_r, const Plane& u_b, const Plane& z_g, double eps = 1e-3);
/// energy() on the R, B and G planes of an RGB image.
double energy(const PlanarImage& rgb, double eps = 1e-3);

/// sum over c in {R, B} of mean |(u_c - u_G) - (z_c - phi_c - z_G)|.
double residual_loss(const PlanarImage& clean, const PlanarImage& deblurred,
                     const Plane& phi_r, const Plane& phi_b);

}  // namespace aberrex
