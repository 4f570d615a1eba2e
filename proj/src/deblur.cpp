#include "aberrex/deblur.hpp"

#include <numeric>
#include <sstream>

#include "aberrex/error.hpp"

namespace aberrex {

InversePolynomial InversePolynomial::parse(const std::string& text) {
  InversePolynomial poly;
  poly.coeffs.clear();
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      poly.coeffs.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw InvalidInput("polynomial: bad coefficient '" + item + "'");
    }
  }
  if (poly.coeffs.size() < 3 || poly.coeffs.size() > 4)
    throw InvalidInput("polynomial: expected 3 or 4 coefficients");
  return poly;
}

double InversePolynomial::dc_gain() const noexcept {
  return std::accumulate(coeffs.begin(), coeffs.end(), 0.0);
}

Kernel2D build_inverse(const Kernel2D& kernel, const InversePolynomial& poly) {
  const int degree = static_cast<int>(poly.coeffs.size()) - 1;
  const int side = degree * (kernel.side - 1) + 1;
  const int radius = side / 2;
  Kernel2D out;
  out.side = side;
  out.taps.assign(static_cast<std::size_t>(side) * side, 0.0);
  Kernel2D power = Kernel2D::dirac();
  for (int j = 0; j <= degree; ++j) {
    if (j > 0) power = convolve_kernels(power, kernel);
    const int pr = power.radius();
    for (int dy = -pr; dy <= pr; ++dy)
      for (int dx = -pr; dx <= pr; ++dx)
        out.taps[static_cast<std::size_t>(dy + radius) * side + dx + radius] +=
            poly.coeffs[j] * power.at(dy, dx);
  }
  return out;
}

Plane apply_inverse(const Plane& plane, const Kernel2D& kernel,
                    const InversePolynomial& poly) {
  std::vector<double> acc(plane.size());
  auto src = plane.data();
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] = poly.coeffs[0] * src[i];
  Plane power = plane;
  for (std::size_t j = 1; j < poly.coeffs.size(); ++j) {
    power = convolve(power, kernel);
    auto p = power.data();
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += poly.coeffs[j] * p[i];
  }
  Plane out(plane.height(), plane.width());
  auto dst = out.data();
  for (std::size_t i = 0; i < acc.size(); ++i) dst[i] = static_cast<float>(acc[i]);
  return out;
}

PlanarImage deblur_patch(const PlanarImage& patch, const BlurEstimate& est,
                         const InversePolynomial& poly) {
  if (patch.channels() != 3) throw InvalidInput("deblur_patch: patch must have 3 channels");
  PlanarImage out = patch;
  for (int c = 0; c < 3; ++c) {
    if (est.is_dirac(c)) continue;
    const auto& blur = est.psf.channels[c];
    const Kernel2D k = rasterize(est.psf.theta, blur.sigma, blur.rho);
    Plane z = apply_inverse(patch.channel(c), k, poly);
    clamp_unit(z.data());
    out.set_channel(c, z);
  }
  return out;
}

}  // namespace aberrex
