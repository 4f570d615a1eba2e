#pragma once

#include <vector>

#include "aberrex/image.hpp"

namespace aberrex {

/// Translation in pixels along columns (dx) and rows (dy).
struct Shift {
  double dx = 0.0;
  double dy = 0.0;
};

/// Keys cubic convolution (a = -0.5) at fractional (y, x), reflect-101 edges.
float sample_bicubic(const Plane& plane, double y, double x);

/// out(y, x) = in(y - dy, x - dx): content moves by (+dx, +dy).
Plane translate(const Plane& plane, double dx, double dy);

/// Global radial warp about a fixed center. A fixed-image pixel at radius r
/// samples the moving image at r' = r (1 + k1 rn^2 + k3 rn^4) where rn is r
/// over the half diagonal.
struct RadialWarp {
  double cx = 0.0;
  double cy = 0.0;
  double k1 = 0.0;
  double k3 = 0.0;

  static RadialWarp centered(int height, int width, double k1 = 0.0, double k3 = 0.0);
};

/// Block-wise similarity field. Each block stores (a, b, tx, ty) relative to
/// its own center (bx, by): a pixel (x, y) samples the moving image at
/// (x + a u - b v + tx, y + b u + a v + ty) with u = x - bx, v = y - by.
/// Displacements are blended bilinearly between block centers.
struct LocalWarp {
  enum class Mode { translation, similarity };
  struct Block {
    double a = 0.0;
    double b = 0.0;
    double tx = 0.0;
    double ty = 0.0;
    double error = 0.0;     ///< final mean squared intensity residual
    bool singular = false;  ///< normal equations degenerate; motion zeroed
  };

  Mode mode = Mode::translation;
  int block_size = 64;
  int image_height = 0;
  int image_width = 0;
  int blocks_y = 0;
  int blocks_x = 0;
  std::vector<Block> blocks;

  static LocalWarp uniform(int height, int width, int block_size, double tx, double ty);
  double block_center_x(int bx) const;
  double block_center_y(int by) const;
  /// Displacement (moving - fixed coordinates) at pixel (y, x).
  void displacement(double y, double x, double& dx, double& dy) const;
  double mean_error() const;
};

Plane apply_warp(const Plane& plane, const RadialWarp& warp);
Plane apply_warp(const Plane& plane, const LocalWarp& warp);

}  // namespace aberrex
