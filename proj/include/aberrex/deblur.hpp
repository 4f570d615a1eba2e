#pragma once

#include <string>
#include <vector>

#include "aberrex/blur_estimation.hpp"
#include "aberrex/image.hpp"
#include "aberrex/kernels.hpp"

namespace aberrex {

/// p(k) = a0 delta + a1 k + a2 k*k (+ a3 k*k*k), powers taken under convolution.
struct InversePolynomial {
  std::vector<double> coeffs{3.0, -3.0, 1.0};

  /// Degree-2 truncation of 1/x around 1: 3 - 3x + x^2, unit DC gain.
  static InversePolynomial standard() { return {}; }
  /// Variant printed in the algorithm listing: -3 k*k - k + 3 delta.
  static InversePolynomial listing_variant() { return {{3.0, -1.0, -3.0}}; }
  /// Variant printed in the method text: -3 k*k - 4k + 3 delta.
  static InversePolynomial text_variant() { return {{3.0, -4.0, -3.0}}; }
  /// Parses "a0,a1,a2[,a3]".
  static InversePolynomial parse(const std::string& text);

  double dc_gain() const noexcept;
};

/// Explicit filter sum_j a_j k^{*j}; support grows with the degree.
Kernel2D build_inverse(const Kernel2D& kernel, const InversePolynomial& poly);

/// p(k) applied to one plane via repeated same-size convolution with k
/// (Horner-free power chain), no clamping.
Plane apply_inverse(const Plane& plane, const Kernel2D& kernel,
                    const InversePolynomial& poly);

/// Every channel filtered with the inverse of its own kernel (shared theta),
/// then clamped to [0,1]. Channels whose estimate is Dirac pass through.
PlanarImage deblur_patch(const PlanarImage& patch, const BlurEstimate& est,
                         const InversePolynomial& poly = {});

}  // namespace aberrex
