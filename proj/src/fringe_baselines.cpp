#include "aberrex/fringe_baselines.hpp"

#include <fftw3.h>

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>

#include "aberrex/error.hpp"

namespace aberrex {
namespace {

// FFTW planning is not thread-safe; execution is.
struct Dft2d {
  int h;
  int w;
  fftw_complex* buffer;
  fftw_plan forward;
  fftw_plan inverse;

  Dft2d(int height, int width) : h(height), w(width) {
    buffer = fftw_alloc_complex(static_cast<std::size_t>(h) * w);
#pragma omp critical(aberrex_fftw_plan)
    {
      forward = fftw_plan_dft_2d(h, w, buffer, buffer, FFTW_FORWARD, FFTW_ESTIMATE);
      inverse = fftw_plan_dft_2d(h, w, buffer, buffer, FFTW_BACKWARD, FFTW_ESTIMATE);
    }
  }
  ~Dft2d() {
#pragma omp critical(aberrex_fftw_plan)
    {
      fftw_destroy_plan(forward);
      fftw_destroy_plan(inverse);
    }
    fftw_free(buffer);
  }
  Dft2d(const Dft2d&) = delete;
  Dft2d& operator=(const Dft2d&) = delete;
};

std::vector<std::complex<double>> windowed_spectrum(const Plane& p, Dft2d& dft) {
  const int H = p.height();
  const int W = p.width();
  double mean = 0.0;
  for (float v : p.data()) mean += v;
  mean /= static_cast<double>(p.size());
  for (int y = 0; y < H; ++y) {
    const double wy = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * (y + 0.5) / H);
    for (int x = 0; x < W; ++x) {
      const double wx = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * (x + 0.5) / W);
      auto* c = dft.buffer[static_cast<std::size_t>(y) * W + x];
      c[0] = wy * wx * (p(y, x) - mean);
      c[1] = 0.0;
    }
  }
  fftw_execute(dft.forward);
  std::vector<std::complex<double>> out(static_cast<std::size_t>(H) * W);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = {dft.buffer[i][0], dft.buffer[i][1]};
  return out;
}

double parabolic_offset(double left, double center, double right) {
  const double denom = left - 2.0 * center + right;
  if (denom >= 0.0) return 0.0;
  return std::clamp(0.5 * (left - right) / denom, -0.5, 0.5);
}

}  // namespace

Shift phase_correlate(const Plane& moving, const Plane& fixed) {
  if (!moving.same_shape(fixed)) throw InvalidInput("phase_correlate: shapes differ");
  const int H = moving.height();
  const int W = moving.width();
  if (H < 32 || W < 32) throw InvalidInput("phase_correlate: inputs must be at least 32x32");
  auto energy = [](const Plane& p) {
    double e = 0.0;
    for (float v : p.data()) e += static_cast<double>(v) * v;
    return e;
  };
  if (energy(moving) == 0.0 || energy(fixed) == 0.0)
    throw InvalidInput("phase_correlate: all-zero input");

  Dft2d dft(H, W);
  const auto fm = windowed_spectrum(moving, dft);
  const auto ff = windowed_spectrum(fixed, dft);
  for (std::size_t i = 0; i < fm.size(); ++i) {
    std::complex<double> r = ff[i] * std::conj(fm[i]);
    const double mag = std::abs(r);
    r = mag > 1e-12 ? r / mag : std::complex<double>{};
    dft.buffer[i][0] = r.real();
    dft.buffer[i][1] = r.imag();
  }
  fftw_execute(dft.inverse);
  auto corr = [&](int y, int x) {
    y = ((y % H) + H) % H;
    x = ((x % W) + W) % W;
    return dft.buffer[static_cast<std::size_t>(y) * W + x][0];
  };
  int py = 0, px = 0;
  double best = corr(0, 0);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      if (corr(y, x) > best) {
        best = corr(y, x);
        py = y;
        px = x;
      }
  const double oy = parabolic_offset(corr(py - 1, px), best, corr(py + 1, px));
  const double ox = parabolic_offset(corr(py, px - 1), best, corr(py, px + 1));
  Shift s;
  s.dy = (py > H / 2 ? py - H : py) + oy;
  s.dx = (px > W / 2 ? px - W : px) + ox;
  return s;
}

namespace {

Plane downsample(const Plane& p) {
  static constexpr double k[5] = {1 / 16.0, 4 / 16.0, 6 / 16.0, 4 / 16.0, 1 / 16.0};
  const int H = p.height();
  const int W = p.width();
  Plane tmp(H, W);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      double acc = 0.0;
      for (int i = -2; i <= 2; ++i) acc += k[i + 2] * p.mirrored(y, x + i);
      tmp(y, x) = static_cast<float>(acc);
    }
  Plane out((H + 1) / 2, (W + 1) / 2);
  for (int y = 0; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x) {
      double acc = 0.0;
      for (int i = -2; i <= 2; ++i) acc += k[i + 2] * tmp.mirrored(2 * y + i, 2 * x);
      out(y, x) = static_cast<float>(acc);
    }
  return out;
}

struct Level {
  Plane moving;
  Plane fixed;
  Plane gx;
  Plane gy;
};

Plane central_dx(const Plane& p) {
  Plane out(p.height(), p.width());
  for (int y = 0; y < p.height(); ++y)
    for (int x = 0; x < p.width(); ++x)
      out(y, x) = 0.5f * (p.mirrored(y, x + 1) - p.mirrored(y, x - 1));
  return out;
}

Plane central_dy(const Plane& p) {
  Plane out(p.height(), p.width());
  for (int y = 0; y < p.height(); ++y)
    for (int x = 0; x < p.width(); ++x)
      out(y, x) = 0.5f * (p.mirrored(y + 1, x) - p.mirrored(y - 1, x));
  return out;
}

// Gauss-Newton refinement of one block at one pyramid level. Coordinates and
// translation are in level pixels.
bool refine_block(const Level& lv, int y0, int y1, int x0, int x1, double cy, double cx,
                  bool similarity, int max_iterations, double tolerance,
                  std::array<double, 4>& p) {
  const int n = similarity ? 4 : 2;
  const double reach = 0.5 * std::max(y1 - y0, x1 - x0);
  for (int iter = 0; iter < max_iterations; ++iter) {
    Eigen::Matrix4d A = Eigen::Matrix4d::Zero();
    Eigen::Vector4d rhs = Eigen::Vector4d::Zero();
    for (int y = y0; y < y1; ++y)
      for (int x = x0; x < x1; ++x) {
        const double u = x - cx;
        const double v = y - cy;
        const double wx = x + p[0] * u - p[1] * v + p[2];
        const double wy = y + p[1] * u + p[0] * v + p[3];
        const double e = lv.fixed(y, x) - sample_bicubic(lv.moving, wy, wx);
        const double gx = sample_bicubic(lv.gx, wy, wx);
        const double gy = sample_bicubic(lv.gy, wy, wx);
        Eigen::Vector4d J;
        if (similarity)
          J << gx * u + gy * v, -gx * v + gy * u, gx, gy;
        else
          J << gx, gy, 0.0, 0.0;
        A.noalias() += J * J.transpose();
        rhs.noalias() += J * e;
      }
    Eigen::VectorXd delta;
    {
      const Eigen::MatrixXd An = A.topLeftCorner(n, n);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(An);
      const double lmin = eig.eigenvalues().minCoeff();
      const double lmax = eig.eigenvalues().maxCoeff();
      if (!(lmax > 0.0) || lmin < 1e-9 * lmax) return false;
      delta = An.ldlt().solve(rhs.head(n));
    }
    double step;
    if (similarity) {
      p[0] += delta[0];
      p[1] += delta[1];
      p[2] += delta[2];
      p[3] += delta[3];
      step = std::max({std::abs(delta[2]), std::abs(delta[3]), reach * std::abs(delta[0]),
                       reach * std::abs(delta[1])});
    } else {
      p[2] += delta[0];
      p[3] += delta[1];
      step = std::max(std::abs(delta[0]), std::abs(delta[1]));
    }
    if (!std::isfinite(step)) return false;
    if (step < tolerance) break;
  }
  return true;
}

}  // namespace

LocalWarp lucas_kanade(const Plane& moving, const Plane& fixed, LocalWarp::Mode mode,
                       const LucasKanadeSettings& settings) {
  if (!moving.same_shape(fixed)) throw InvalidInput("lucas_kanade: shapes differ");
  if (settings.levels < 1) throw InvalidInput("lucas_kanade: levels must be >= 1");
  if (settings.block_size < 8) throw InvalidInput("lucas_kanade: block size must be >= 8");
  const bool similarity = mode == LocalWarp::Mode::similarity;

  std::vector<Level> pyramid;
  pyramid.push_back({moving, fixed, central_dx(moving), central_dy(moving)});
  while (static_cast<int>(pyramid.size()) < settings.levels) {
    const Level& prev = pyramid.back();
    const int scale = 1 << pyramid.size();
    if (settings.block_size / scale < 8 || prev.moving.height() < 16 || prev.moving.width() < 16)
      break;
    Plane m = downsample(prev.moving);
    Plane f = downsample(prev.fixed);
    Plane gx = central_dx(m);
    Plane gy = central_dy(m);
    pyramid.push_back({std::move(m), std::move(f), std::move(gx), std::move(gy)});
  }

  LocalWarp warp = LocalWarp::uniform(moving.height(), moving.width(), settings.block_size, 0, 0);
  warp.mode = mode;
  const int nblocks = static_cast<int>(warp.blocks.size());
#pragma omp parallel for schedule(dynamic)
  for (int bi = 0; bi < nblocks; ++bi) {
    const int by = bi / warp.blocks_x;
    const int bx = bi % warp.blocks_x;
    const int fy0 = by * settings.block_size;
    const int fx0 = bx * settings.block_size;
    const int fy1 = std::min(fy0 + settings.block_size, moving.height());
    const int fx1 = std::min(fx0 + settings.block_size, moving.width());
    std::array<double, 4> p{0, 0, 0, 0};  // a, b, tx, ty
    bool ok = true;
    for (int li = static_cast<int>(pyramid.size()) - 1; li >= 0 && ok; --li) {
      const double s = std::ldexp(1.0, li);
      const Level& lv = pyramid[li];
      const int y0 = static_cast<int>(fy0 / s);
      const int x0 = static_cast<int>(fx0 / s);
      const int y1 = std::max(y0 + 1, std::min(lv.moving.height(), static_cast<int>(std::ceil(fy1 / s))));
      const int x1 = std::max(x0 + 1, std::min(lv.moving.width(), static_cast<int>(std::ceil(fx1 / s))));
      // Full-resolution center mapped to this level.
      const double cy = warp.block_center_y(by) / s;
      const double cx = warp.block_center_x(bx) / s;
      std::array<double, 4> pl{p[0], p[1], p[2] / s, p[3] / s};
      ok = refine_block(lv, y0, y1, x0, x1, cy, cx, similarity, settings.max_iterations,
                        settings.tolerance, pl);
      p = {pl[0], pl[1], pl[2] * s, pl[3] * s};
    }
    LocalWarp::Block& b = warp.blocks[bi];
    if (!ok) {
      b = LocalWarp::Block{};
      b.singular = true;
    } else {
      b.a = p[0];
      b.b = p[1];
      b.tx = p[2];
      b.ty = p[3];
    }
    const double cy = warp.block_center_y(by);
    const double cx = warp.block_center_x(bx);
    double err = 0.0;
    for (int y = fy0; y < fy1; ++y)
      for (int x = fx0; x < fx1; ++x) {
        const double u = x - cx;
        const double v = y - cy;
        const double e = fixed(y, x) - sample_bicubic(moving, y + b.b * u + b.a * v + b.ty,
                                                      x + b.a * u - b.b * v + b.tx);
        err += e * e;
      }
    b.error = err / static_cast<double>((fy1 - fy0) * (fx1 - fx0));
  }
  return warp;
}

namespace {

double radial_objective(const Plane& moving, const Plane& fixed, double k1, double k3) {
  RadialWarp w = RadialWarp::centered(moving.height(), moving.width(), k1, k3);
  const Plane warped = apply_warp(moving, w);
  double s = 0.0;
  auto a = warped.data();
  auto b = fixed.data();
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

}  // namespace

RadialFit fit_radial(const Plane& moving, const Plane& fixed, int max_iterations) {
  if (!moving.same_shape(fixed)) throw InvalidInput("fit_radial: shapes differ");
  using Point = std::array<double, 2>;
  auto f = [&](const Point& p) { return radial_objective(moving, fixed, p[0], p[1]); };

  std::array<Point, 3> simplex{Point{0.0, 0.0}, Point{0.01, 0.0}, Point{0.0, 0.01}};
  std::array<double, 3> values{f(simplex[0]), f(simplex[1]), f(simplex[2])};
  RadialFit fit;
  fit.initial_residual = values[0];

  for (int iter = 0; iter < max_iterations; ++iter) {
    std::array<int, 3> order{0, 1, 2};
    std::sort(order.begin(), order.end(), [&](int i, int j) { return values[i] < values[j]; });
    const int best = order[0], mid = order[1], worst = order[2];
    fit.best_history.push_back(values[best]);
    if (values[worst] - values[best] <= 1e-10 &&
        std::abs(simplex[worst][0] - simplex[best][0]) + std::abs(simplex[worst][1] - simplex[best][1]) < 1e-7)
      break;

    const Point centroid{0.5 * (simplex[best][0] + simplex[mid][0]),
                         0.5 * (simplex[best][1] + simplex[mid][1])};
    auto along = [&](double t) {
      return Point{centroid[0] + t * (simplex[worst][0] - centroid[0]),
                   centroid[1] + t * (simplex[worst][1] - centroid[1])};
    };
    const Point reflected = along(-1.0);
    const double fr = f(reflected);
    if (fr < values[best]) {
      const Point expanded = along(-2.0);
      const double fe = f(expanded);
      if (fe < fr) {
        simplex[worst] = expanded;
        values[worst] = fe;
      } else {
        simplex[worst] = reflected;
        values[worst] = fr;
      }
    } else if (fr < values[mid]) {
      simplex[worst] = reflected;
      values[worst] = fr;
    } else {
      const bool outside = fr < values[worst];
      const Point contracted = along(outside ? -0.5 : 0.5);
      const double fc = f(contracted);
      if (fc < (outside ? fr : values[worst])) {
        simplex[worst] = contracted;
        values[worst] = fc;
      } else {
        for (int i : {mid, worst}) {
          simplex[i] = {0.5 * (simplex[i][0] + simplex[best][0]),
                        0.5 * (simplex[i][1] + simplex[best][1])};
          values[i] = f(simplex[i]);
        }
      }
    }
  }
  const auto best_it = std::min_element(values.begin(), values.end());
  const Point& bp = simplex[static_cast<std::size_t>(best_it - values.begin())];
  fit.warp = RadialWarp::centered(moving.height(), moving.width(), bp[0], bp[1]);
  fit.final_residual = *best_it;
  return fit;
}

FringeMethod parse_fringe_method(const std::string& name) {
  if (name == "none") return FringeMethod::none;
  if (name == "cnn") return FringeMethod::cnn;
  if (name == "radial") return FringeMethod::radial;
  if (name == "phasecorr") return FringeMethod::phasecorr;
  if (name == "plk-t") return FringeMethod::plk_t;
  if (name == "plk-s") return FringeMethod::plk_s;
  throw InvalidInput("unknown fringe method '" + name + "'");
}

std::string to_string(FringeMethod method) {
  switch (method) {
    case FringeMethod::none: return "none";
    case FringeMethod::cnn: return "cnn";
    case FringeMethod::radial: return "radial";
    case FringeMethod::phasecorr: return "phasecorr";
    case FringeMethod::plk_t: return "plk-t";
    case FringeMethod::plk_s: return "plk-s";
  }
  return "?";
}

PlanarImage align_channels(const PlanarImage& z, FringeMethod method) {
  if (z.channels() != 3) throw InvalidInput("align_channels: image must have 3 channels");
  if (method == FringeMethod::none || method == FringeMethod::cnn)
    throw InvalidInput("align_channels: not a registration method");
  const Plane green = z.channel(1);
  PlanarImage out = z;
  for (int c : {0, 2}) {
    const Plane moving = z.channel(c);
    Plane aligned;
    switch (method) {
      case FringeMethod::phasecorr: {
        const Shift s = phase_correlate(moving, green);
        aligned = translate(moving, s.dx, s.dy);
        break;
      }
      case FringeMethod::radial:
        aligned = apply_warp(moving, fit_radial(moving, green).warp);
        break;
      case FringeMethod::plk_t:
        aligned = apply_warp(moving, lucas_kanade(moving, green, LocalWarp::Mode::translation));
        break;
      case FringeMethod::plk_s:
        aligned = apply_warp(moving, lucas_kanade(moving, green, LocalWarp::Mode::similarity));
        break;
      default:
        break;
    }
    clamp_unit(aligned.data());
    out.set_channel(c, aligned);
  }
  return out;
}

}  // namespace aberrex
