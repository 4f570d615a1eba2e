#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "aberrex/blur_estimation.hpp"
#include "aberrex/deblur.hpp"
#include "aberrex/fringe_baselines.hpp"
#include "aberrex/fringe_net.hpp"
#include "aberrex/image.hpp"

namespace aberrex {

struct PipelineConfig {
  int patch_size = 400;
  double overlap = 0.25;
  /// Empty: linear coefficients for linear images, JPEG ones for gamma22.
  std::optional<AffineBlurModel> model;
  InversePolynomial poly{};
  FringeMethod fringe = FringeMethod::cnn;
  std::filesystem::path weights;
  int threads = 0;  ///< 0 keeps the OpenMP default
  std::uint64_t seed = 0;

  /// patch_size >= 100, overlap one of 0, 0.25, 0.5, C > 0, sigma_b >= 0.
  void validate() const;
  AffineBlurModel model_for(ColorSpace space) const;
};

/// Sets one field from its textual form. Keys: patch, overlap, coeffs
/// ("C,sigma_b" or "linear"/"jpeg"), poly, fringe-method, weights, threads,
/// seed. Throws InvalidInput on unknown keys or bad values.
void set_config_value(PipelineConfig& config, const std::string& key, const std::string& value);

/// key = value lines; '#' starts a comment. Values override `base`.
PipelineConfig read_config(const std::filesystem::path& path, PipelineConfig base = {});

/// Patch-wise blind correction: per patch estimate the Gaussian PSF, deblur
/// with the polynomial inverse, correct red/blue fringes against green, then
/// Hamming-fuse. Gamma22 inputs are decoded first and re-encoded at the end.
class Pipeline {
 public:
  /// Loads the weights file when the fringe method is cnn.
  explicit Pipeline(PipelineConfig config);
  Pipeline(PipelineConfig config, const FringeNetWeights& weights);

  const PipelineConfig& config() const noexcept { return config_; }

  PlanarImage correct(const PlanarImage& image) const;
  /// Stage 1 only.
  PlanarImage deblur(const PlanarImage& image) const;
  /// Stage 2 only.
  PlanarImage defringe(const PlanarImage& image) const;

  /// Blind estimate on the patch anchored at (row, col), clamped into the image.
  BlurEstimate estimate_patch(const PlanarImage& image, int row, int col) const;

 private:
  enum class Stages { both, deblur, defringe };
  PlanarImage run(const PlanarImage& image, Stages stages) const;
  PlanarImage process_patch(const PlanarImage& patch, const AffineBlurModel& model,
                            Stages stages) const;

  PipelineConfig config_;
  std::optional<FringeNet> net_;
};

}  // namespace aberrex
