#include "aberrex/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "aberrex/error.hpp"

namespace aberrex {
namespace {

std::vector<double> gaussian_window(int n, double sigma) {
  std::vector<double> w(n);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const double d = i - (n - 1) / 2.0;
    w[i] = std::exp(-d * d / (2.0 * sigma * sigma));
    total += w[i];
  }
  for (double& v : w) v /= total;
  return w;
}

// Separable "valid" filtering of a row-major H x W buffer.
std::vector<double> filter_valid(const std::vector<double>& in, int H, int W,
                                 const std::vector<double>& w) {
  const int n = static_cast<int>(w.size());
  const int OW = W - n + 1;
  const int OH = H - n + 1;
  std::vector<double> tmp(static_cast<std::size_t>(H) * OW);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < OW; ++x) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i) acc += w[i] * in[static_cast<std::size_t>(y) * W + x + i];
      tmp[static_cast<std::size_t>(y) * OW + x] = acc;
    }
  std::vector<double> out(static_cast<std::size_t>(OH) * OW);
  for (int y = 0; y < OH; ++y)
    for (int x = 0; x < OW; ++x) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i) acc += w[i] * tmp[static_cast<std::size_t>(y + i) * OW + x];
      out[static_cast<std::size_t>(y) * OW + x] = acc;
    }
  return out;
}

}  // namespace

double ssim(const Plane& a, const Plane& b, const SsimConfig& cfg) {
  if (!a.same_shape(b)) throw InvalidInput("ssim: shapes differ");
  if (a.height() < cfg.window || a.width() < cfg.window)
    throw InvalidInput("ssim: image smaller than the window");
  const int H = a.height();
  const int W = a.width();
  const auto w = gaussian_window(cfg.window, cfg.window_sigma);
  const std::size_t n = a.size();
  std::vector<double> va(n), vb(n), aa(n), bb(n), ab(n);
  for (std::size_t i = 0; i < n; ++i) {
    va[i] = a.data()[i];
    vb[i] = b.data()[i];
    aa[i] = va[i] * va[i];
    bb[i] = vb[i] * vb[i];
    ab[i] = va[i] * vb[i];
  }
  const auto mu_a = filter_valid(va, H, W, w);
  const auto mu_b = filter_valid(vb, H, W, w);
  const auto e_aa = filter_valid(aa, H, W, w);
  const auto e_bb = filter_valid(bb, H, W, w);
  const auto e_ab = filter_valid(ab, H, W, w);
  const double c1 = std::pow(cfg.k1 * cfg.dynamic_range, 2);
  const double c2 = std::pow(cfg.k2 * cfg.dynamic_range, 2);
  double total = 0.0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double ma = mu_a[i];
    const double mb = mu_b[i];
    const double sa = e_aa[i] - ma * ma;
    const double sb = e_bb[i] - mb * mb;
    const double sab = e_ab[i] - ma * mb;
    total += ((2.0 * ma * mb + c1) * (2.0 * sab + c2)) /
             ((ma * ma + mb * mb + c1) * (sa + sb + c2));
  }
  return total / static_cast<double>(mu_a.size());
}

double ssim(const PlanarImage& a, const PlanarImage& b, const SsimConfig& cfg) {
  if (!a.same_shape(b)) throw InvalidInput("ssim: shapes differ");
  double s = 0.0;
  for (int c = 0; c < a.channels(); ++c) s += ssim(a.channel(c), b.channel(c), cfg);
  return s / a.channels();
}

SsimRatio ssim_ratio(const PlanarImage& blurry, const PlanarImage& clean,
                     const BlurEstimate& truth, const BlurEstimate& estimated,
                     const InversePolynomial& poly) {
  if (!blurry.same_shape(clean)) throw InvalidInput("ssim_ratio: shapes differ");
  constexpr int kBorder = 15;
  constexpr int kMaxShift = 2;
  if (blurry.height() < 61 || blurry.width() < 61)
    throw InvalidInput("ssim_ratio: images must be at least 61x61");
  const PlanarImage z_true = deblur_patch(blurry, truth, poly);
  const PlanarImage z_est = deblur_patch(blurry, estimated, poly);
  const int h = blurry.height() - 2 * kBorder;
  const int w = blurry.width() - 2 * kBorder;
  const PlanarImage u = crop(clean, kBorder, kBorder, h, w);

  SsimRatio best;
  best.ssim_true = -std::numeric_limits<double>::infinity();
  for (int sy = -kMaxShift; sy <= kMaxShift; ++sy)
    for (int sx = -kMaxShift; sx <= kMaxShift; ++sx) {
      const double s = ssim(crop(z_true, kBorder + sy, kBorder + sx, h, w), u);
      if (s > best.ssim_true) {
        best.ssim_true = s;
        best.shift_x = sx;
        best.shift_y = sy;
      }
    }
  best.ssim_estimated =
      ssim(crop(z_est, kBorder + best.shift_y, kBorder + best.shift_x, h, w), u);
  best.ratio = (best.ssim_true + 2.0) / (best.ssim_estimated + 2.0);
  return best;
}

double energy(const Plane& u_r, const Plane& u_b, const Plane& z_g, double eps) {
  if (!u_r.same_shape(z_g) || !u_b.same_shape(z_g)) throw InvalidInput("energy: shapes differ");
  const int H = z_g.height();
  const int W = z_g.width();
  if (H < 2 || W < 2) throw InvalidInput("energy: image smaller than 2x2");
  auto term = [&](const Plane& u) {
    double sx = 0.0, sy = 0.0;
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        const double g = std::max<double>(z_g(y, x), eps);
        const double c = std::max<double>(u(y, x), eps);
        if (x + 1 < W)
          sx += std::abs((z_g(y, x + 1) - z_g(y, x)) / g - (u(y, x + 1) - u(y, x)) / c);
        if (y + 1 < H)
          sy += std::abs((z_g(y + 1, x) - z_g(y, x)) / g - (u(y + 1, x) - u(y, x)) / c);
      }
    return sx / (static_cast<double>(H) * (W - 1)) + sy / (static_cast<double>(H - 1) * W);
  };
  return term(u_r) + term(u_b);
}

double energy(const PlanarImage& rgb, double eps) {
  if (rgb.channels() != 3) throw InvalidInput("energy: image must have 3 channels");
  return energy(rgb.channel(0), rgb.channel(2), rgb.channel(1), eps);
}

double residual_loss(const PlanarImage& clean, const PlanarImage& deblurred,
                     const Plane& phi_r, const Plane& phi_b) {
  if (!clean.same_shape(deblurred) || clean.channels() != 3)
    throw InvalidInput("residual_loss: need two RGB images of equal shape");
  const std::size_t n = clean.plane_size();
  if (phi_r.size() != n || phi_b.size() != n) throw InvalidInput("residual_loss: residual shape");
  auto uG = clean.plane_data(1);
  auto zG = deblurred.plane_data(1);
  double total = 0.0;
  for (int c : {0, 2}) {
    auto uc = clean.plane_data(c);
    auto zc = deblurred.plane_data(c);
    auto phi = (c == 0 ? phi_r : phi_b).data();
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      s += std::abs((static_cast<double>(uc[i]) - uG[i]) -
                    (static_cast<double>(zc[i]) - phi[i] - zG[i]));
    total += s / static_cast<double>(n);
  }
  return total;
}

}  // namespace aberrex
