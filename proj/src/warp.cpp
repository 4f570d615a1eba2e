#include "aberrex/warp.hpp"

#include <algorithm>
#include <cmath>

#include "aberrex/error.hpp"

namespace aberrex {
namespace {

inline void cubic_weights(double t, double w[4]) {
  constexpr double a = -0.5;
  const double t2 = t * t;
  const double t3 = t2 * t;
  w[0] = a * (t3 - 2.0 * t2 + t);
  w[1] = (a + 2.0) * t3 - (a + 3.0) * t2 + 1.0;
  w[2] = -(a + 2.0) * t3 + (2.0 * a + 3.0) * t2 - a * t;
  w[3] = -a * (t3 - t2);
}

}  // namespace

float sample_bicubic(const Plane& plane, double y, double x) {
  const double fy = std::floor(y);
  const double fx = std::floor(x);
  double wy[4], wx[4];
  cubic_weights(y - fy, wy);
  cubic_weights(x - fx, wx);
  const int iy = static_cast<int>(fy);
  const int ix = static_cast<int>(fx);
  const int H = plane.height();
  const int W = plane.width();
  int cols[4];
  for (int j = 0; j < 4; ++j) cols[j] = mirror_index(ix - 1 + j, W);
  double acc = 0.0;
  for (int i = 0; i < 4; ++i) {
    if (wy[i] == 0.0) continue;
    auto row = plane.row(mirror_index(iy - 1 + i, H));
    double r = 0.0;
    for (int j = 0; j < 4; ++j) r += wx[j] * row[cols[j]];
    acc += wy[i] * r;
  }
  return static_cast<float>(acc);
}

Plane translate(const Plane& plane, double dx, double dy) {
  Plane out(plane.height(), plane.width());
#pragma omp parallel for schedule(static)
  for (int y = 0; y < plane.height(); ++y)
    for (int x = 0; x < plane.width(); ++x) out(y, x) = sample_bicubic(plane, y - dy, x - dx);
  return out;
}

RadialWarp RadialWarp::centered(int height, int width, double k1, double k3) {
  return {(width - 1) / 2.0, (height - 1) / 2.0, k1, k3};
}

LocalWarp LocalWarp::uniform(int height, int width, int block_size, double tx, double ty) {
  if (block_size < 1 || height < 1 || width < 1) throw InvalidInput("LocalWarp: bad size");
  LocalWarp w;
  w.block_size = block_size;
  w.image_height = height;
  w.image_width = width;
  w.blocks_y = (height + block_size - 1) / block_size;
  w.blocks_x = (width + block_size - 1) / block_size;
  LocalWarp::Block b;
  b.tx = tx;
  b.ty = ty;
  w.blocks.assign(static_cast<std::size_t>(w.blocks_y) * w.blocks_x, b);
  return w;
}

double LocalWarp::block_center_x(int bx) const {
  const int start = bx * block_size;
  const int end = std::min(start + block_size, image_width);
  return (start + end - 1) / 2.0;
}

double LocalWarp::block_center_y(int by) const {
  const int start = by * block_size;
  const int end = std::min(start + block_size, image_height);
  return (start + end - 1) / 2.0;
}

namespace {

// Index of the lower bracketing center and the blend weight toward the next.
void bracket(double v, int count, const auto& center, int& lo, double& t) {
  if (count == 1 || v <= center(0)) {
    lo = 0;
    t = 0.0;
    return;
  }
  if (v >= center(count - 1)) {
    lo = count - 1;
    t = 0.0;
    return;
  }
  lo = 0;
  while (lo + 1 < count - 1 && center(lo + 1) <= v) ++lo;
  t = (v - center(lo)) / (center(lo + 1) - center(lo));
}

}  // namespace

void LocalWarp::displacement(double y, double x, double& dx, double& dy) const {
  int by, bx;
  double ty_w, tx_w;
  bracket(y, blocks_y, [this](int i) { return block_center_y(i); }, by, ty_w);
  bracket(x, blocks_x, [this](int i) { return block_center_x(i); }, bx, tx_w);
  dx = 0.0;
  dy = 0.0;
  for (int i = 0; i < 2; ++i) {
    const double wy = i == 0 ? 1.0 - ty_w : ty_w;
    if (wy == 0.0) continue;
    const int row = std::min(by + i, blocks_y - 1);
    for (int j = 0; j < 2; ++j) {
      const double wx = j == 0 ? 1.0 - tx_w : tx_w;
      if (wx == 0.0) continue;
      const int col = std::min(bx + j, blocks_x - 1);
      const Block& b = blocks[static_cast<std::size_t>(row) * blocks_x + col];
      const double u = x - block_center_x(col);
      const double v = y - block_center_y(row);
      dx += wy * wx * (b.a * u - b.b * v + b.tx);
      dy += wy * wx * (b.b * u + b.a * v + b.ty);
    }
  }
}

double LocalWarp::mean_error() const {
  if (blocks.empty()) return 0.0;
  double s = 0.0;
  for (const auto& b : blocks) s += b.error;
  return s / static_cast<double>(blocks.size());
}

Plane apply_warp(const Plane& plane, const RadialWarp& warp) {
  const double half_diag = 0.5 * std::hypot(plane.width(), plane.height());
  const double inv2 = 1.0 / (half_diag * half_diag);
  Plane out(plane.height(), plane.width());
#pragma omp parallel for schedule(static)
  for (int y = 0; y < plane.height(); ++y)
    for (int x = 0; x < plane.width(); ++x) {
      const double u = x - warp.cx;
      const double v = y - warp.cy;
      const double rn2 = (u * u + v * v) * inv2;
      const double f = 1.0 + warp.k1 * rn2 + warp.k3 * rn2 * rn2;
      out(y, x) = sample_bicubic(plane, warp.cy + v * f, warp.cx + u * f);
    }
  return out;
}

Plane apply_warp(const Plane& plane, const LocalWarp& warp) {
  if (warp.image_height != plane.height() || warp.image_width != plane.width())
    throw InvalidInput("apply_warp: warp built for a different shape");
  Plane out(plane.height(), plane.width());
#pragma omp parallel for schedule(static)
  for (int y = 0; y < plane.height(); ++y)
    for (int x = 0; x < plane.width(); ++x) {
      double dx, dy;
      warp.displacement(y, x, dx, dy);
      out(y, x) = sample_bicubic(plane, y + dy, x + dx);
    }
  return out;
}

}  // namespace aberrex
