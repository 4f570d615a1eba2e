#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "aberrex/kernels.hpp"

namespace aberrex {

/// Bounds of the per-channel standard deviations, in pixels.
inline constexpr double kMinStd = 0.2;
inline constexpr double kMaxStd = 4.0;

/// Fold an angle into [0, pi).
double canonical_angle(double theta);

/// Anisotropic Gaussian blur of one channel: standard deviation `sigma` along
/// direction theta and `rho` along theta + pi/2. Angles are measured from
/// the +x (column) axis towards +y (row, pointing down).
struct ChannelBlur {
  double sigma = kMinStd;
  double rho = kMinStd;
};

/// RGB Gaussian PSF sharing one orientation across channels.
struct GaussianPsf {
  double theta = 0.0;
  std::array<ChannelBlur, 3> channels{};
};

struct Covariance {
  double xx = 0.0;
  double xy = 0.0;
  double yy = 0.0;
};

/// Sigma = U diag(sigma^2, rho^2) U^T with U = [(cos t, sin t), (-sin t, cos t)].
/// With this convention (pi/4, 2, 1) gives [[2.5, 1.5], [1.5, 2.5]].
Covariance covariance(double theta, double sigma, double rho);

/// Point-sampled Gaussian on a (2 ceil(4 max(sigma, rho)) + 1)^2 lattice,
/// renormalized to unit sum. Standard deviations must lie in (0, 8].
Kernel2D rasterize(double theta, double sigma, double rho);

struct GaussianFit {
  double theta = 0.0;
  double sigma = kMinStd;
  double rho = kMinStd;
  bool clamped = false;  ///< a std was below kMinStd and raised to it
};

/// Moment fit: eigendecomposition of the tap covariance about the centroid.
/// Throws InvalidInput for grids with no positive mass or negative taps.
GaussianFit fit_gaussian(const Kernel2D& taps);

/// Measured per-channel PSF taps on a common odd-sided grid.
struct EmpiricalPsf {
  int side = 0;
  std::vector<Kernel2D> channels;
};

/// Reads every "EPSF <side> <channels>" record (each followed by one Pf
/// block per channel) from the file. Channels are renormalized to unit sum.
std::vector<EmpiricalPsf> read_empirical_psfs(const std::filesystem::path& path);
void write_empirical_psfs(const std::filesystem::path& path,
                          const std::vector<EmpiricalPsf>& psfs);

}  // namespace aberrex
