#pragma once

#include <string>
#include <vector>

#include "aberrex/image.hpp"
#include "aberrex/warp.hpp"

namespace aberrex {

/// Translation t such that translate(moving, t) best matches fixed, from the
/// peak of the normalized cross-power spectrum (Hann-windowed inputs) with
/// per-axis parabolic refinement. Throws InvalidInput for mismatched,
/// too-small (< 32x32) or all-zero inputs.
Shift phase_correlate(const Plane& moving, const Plane& fixed);

struct LucasKanadeSettings {
  int block_size = 64;
  int levels = 3;
  int max_iterations = 20;
  double tolerance = 1e-3;  ///< pixels, at the level being refined
};

/// Coarse-to-fine Gauss-Newton on the sum of squared intensity differences,
/// one parameter set per block. Blocks whose normal equations are singular
/// get zero motion and the `singular` flag.
LocalWarp lucas_kanade(const Plane& moving, const Plane& fixed, LocalWarp::Mode mode,
                       const LucasKanadeSettings& settings = {});

struct RadialFit {
  RadialWarp warp;
  double initial_residual = 0.0;
  double final_residual = 0.0;
  std::vector<double> best_history;  ///< best objective after each iteration
};

/// Nelder-Mead over (k1, k3) from (0, 0), center fixed at the image center,
/// minimizing mean |apply_warp(moving) - fixed|.
RadialFit fit_radial(const Plane& moving, const Plane& fixed, int max_iterations = 200);

enum class FringeMethod { none, cnn, radial, phasecorr, plk_t, plk_s };

FringeMethod parse_fringe_method(const std::string& name);
std::string to_string(FringeMethod method);

/// Aligns red and blue onto green with one of the classical models, then
/// clamps to [0,1]. `cnn` and `none` are rejected here.
PlanarImage align_channels(const PlanarImage& z, FringeMethod method);

}  // namespace aberrex
