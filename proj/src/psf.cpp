#include "aberrex/psf.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "aberrex/error.hpp"
#include "aberrex/image_io.hpp"

namespace aberrex {

double canonical_angle(double theta) {
  double t = std::fmod(theta, std::numbers::pi);
  if (t < 0.0) t += std::numbers::pi;
  if (t >= std::numbers::pi) t = 0.0;
  return t;
}

Covariance covariance(double theta, double sigma, double rho) {
  if (!(sigma > 0.0) || !(rho > 0.0))
    throw InvalidInput("covariance: standard deviations must be positive");
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  const double s2 = sigma * sigma;
  const double r2 = rho * rho;
  return {s2 * c * c + r2 * s * s, (s2 - r2) * c * s, s2 * s * s + r2 * c * c};
}

Kernel2D rasterize(double theta, double sigma, double rho) {
  if (!(sigma > 0.0 && sigma <= 8.0 && rho > 0.0 && rho <= 8.0))
    throw InvalidInput("rasterize: standard deviations must lie in (0, 8]");
  const Covariance cov = covariance(canonical_angle(theta), sigma, rho);
  const double det = cov.xx * cov.yy - cov.xy * cov.xy;
  // Inverse covariance.
  const double ixx = cov.yy / det;
  const double ixy = -cov.xy / det;
  const double iyy = cov.xx / det;
  const int radius = static_cast<int>(std::ceil(4.0 * std::max(sigma, rho)));
  Kernel2D k;
  k.side = 2 * radius + 1;
  k.taps.resize(static_cast<std::size_t>(k.side) * k.side);
  double total = 0.0;
  for (int dy = -radius; dy <= radius; ++dy)
    for (int dx = -radius; dx <= radius; ++dx) {
      const double q = ixx * dx * dx + 2.0 * ixy * dx * dy + iyy * dy * dy;
      const double v = std::exp(-0.5 * q);
      k.taps[static_cast<std::size_t>(dy + radius) * k.side + dx + radius] = v;
      total += v;
    }
  for (double& v : k.taps) v /= total;
  return k;
}

GaussianFit fit_gaussian(const Kernel2D& taps) {
  const int r = taps.radius();
  double mass = 0.0, mx = 0.0, my = 0.0;
  for (int dy = -r; dy <= r; ++dy)
    for (int dx = -r; dx <= r; ++dx) {
      const double v = taps.at(dy, dx);
      if (!std::isfinite(v) || v < 0.0)
        throw InvalidInput("fit_gaussian: taps must be finite and nonnegative");
      mass += v;
      mx += v * dx;
      my += v * dy;
    }
  if (!(mass > 0.0)) throw InvalidInput("fit_gaussian: grid has no mass");
  mx /= mass;
  my /= mass;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (int dy = -r; dy <= r; ++dy)
    for (int dx = -r; dx <= r; ++dx) {
      const double v = taps.at(dy, dx) / mass;
      const double ex = dx - mx;
      const double ey = dy - my;
      sxx += v * ex * ex;
      sxy += v * ex * ey;
      syy += v * ey * ey;
    }
  const double mean = 0.5 * (sxx + syy);
  const double spread = std::hypot(0.5 * (sxx - syy), sxy);
  GaussianFit fit;
  fit.theta = canonical_angle(0.5 * std::atan2(2.0 * sxy, sxx - syy));
  fit.sigma = std::sqrt(std::max(mean + spread, 0.0));
  fit.rho = std::sqrt(std::max(mean - spread, 0.0));
  if (fit.sigma < kMinStd) {
    fit.sigma = kMinStd;
    fit.clamped = true;
  }
  if (fit.rho < kMinStd) {
    fit.rho = kMinStd;
    fit.clamped = true;
  }
  return fit;
}

std::vector<EmpiricalPsf> read_empirical_psfs(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open");
  std::vector<EmpiricalPsf> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream header(line);
    std::string magic;
    int side = 0, channels = 0;
    if (!(header >> magic >> side >> channels) || magic != "EPSF")
      throw IoError(path.string(), "bad EPSF header '" + line + "'");
    if (side <= 0 || side % 2 == 0 || channels <= 0)
      throw IoError(path.string(), "EPSF side must be odd and channels positive");
    EmpiricalPsf psf;
    psf.side = side;
    for (int c = 0; c < channels; ++c) {
      const PlanarImage block = read_pfm(in, path.string());
      if (block.channels() != 1 || block.height() != side || block.width() != side)
        throw IoError(path.string(), "EPSF channel block has wrong shape");
      Kernel2D k;
      k.side = side;
      k.taps.assign(block.data().begin(), block.data().end());
      for (double v : k.taps)
        if (v < 0.0) throw IoError(path.string(), "EPSF taps must be nonnegative");
      const double total = k.sum();
      if (!(total > 0.0)) throw IoError(path.string(), "EPSF channel has zero mass");
      for (double& v : k.taps) v /= total;
      psf.channels.push_back(std::move(k));
    }
    out.push_back(std::move(psf));
  }
  if (out.empty()) throw IoError(path.string(), "no EPSF records");
  return out;
}

void write_empirical_psfs(const std::filesystem::path& path,
                          const std::vector<EmpiricalPsf>& psfs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  for (const auto& psf : psfs) {
    out << "EPSF " << psf.side << ' ' << psf.channels.size() << '\n';
    for (const auto& k : psf.channels) {
      if (k.side != psf.side) throw InvalidInput("EPSF channel side mismatch");
      PlanarImage block(k.side, k.side, 1);
      std::transform(k.taps.begin(), k.taps.end(), block.data().begin(),
                     [](double v) { return static_cast<float>(v); });
      write_pfm(out, block);
    }
  }
  if (!out) throw IoError(path.string(), "write failed");
}

}  // namespace aberrex
