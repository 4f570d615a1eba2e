#include "aberrex/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

#include <omp.h>

#include "aberrex/error.hpp"
#include "aberrex/kernels.hpp"
#include "aberrex/tiling.hpp"

namespace aberrex {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& text) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || !std::isfinite(v))
    throw InvalidInput(key + ": expected a number, got '" + text + "'");
  return v;
}

long long parse_integer(const std::string& key, const std::string& text) {
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size()) throw InvalidInput(key + ": expected an integer, got '" + text + "'");
  return v;
}

}  // namespace

void PipelineConfig::validate() const {
  if (patch_size < 100) throw InvalidInput("patch size must be at least 100");
  if (overlap != 0.0 && overlap != 0.25 && overlap != 0.5)
    throw InvalidInput("overlap must be 0, 0.25 or 0.5");
  if (model && (!(model->C > 0.0) || !(model->sigma_b >= 0.0)))
    throw InvalidInput("blur model needs C > 0 and sigma_b >= 0");
  if (poly.coeffs.empty() || poly.coeffs.size() > 4)
    throw InvalidInput("polynomial must have 1 to 4 coefficients");
  if (threads < 0) throw InvalidInput("thread count must be >= 0");
}

AffineBlurModel PipelineConfig::model_for(ColorSpace space) const {
  if (model) return *model;
  return space == ColorSpace::gamma22 ? AffineBlurModel::jpeg() : AffineBlurModel::linear();
}

void set_config_value(PipelineConfig& config, const std::string& key, const std::string& value) {
  if (key == "patch") {
    config.patch_size = static_cast<int>(parse_integer(key, value));
  } else if (key == "overlap") {
    config.overlap = parse_double(key, value);
  } else if (key == "coeffs") {
    if (value == "linear") {
      config.model = AffineBlurModel::linear();
    } else if (value == "jpeg") {
      config.model = AffineBlurModel::jpeg();
    } else {
      const auto comma = value.find(',');
      if (comma == std::string::npos) throw InvalidInput("coeffs: expected C,sigma_b");
      config.model = AffineBlurModel{parse_double(key, trim(value.substr(0, comma))),
                                     parse_double(key, trim(value.substr(comma + 1)))};
    }
  } else if (key == "poly") {
    config.poly = InversePolynomial::parse(value);
  } else if (key == "fringe-method" || key == "fringe_method") {
    config.fringe = parse_fringe_method(value);
  } else if (key == "weights") {
    config.weights = value;
  } else if (key == "threads") {
    config.threads = static_cast<int>(parse_integer(key, value));
  } else if (key == "seed") {
    config.seed = static_cast<std::uint64_t>(parse_integer(key, value));
  } else {
    throw InvalidInput("unknown config key '" + key + "'");
  }
}

PipelineConfig read_config(const std::filesystem::path& path, PipelineConfig base) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string(), "cannot open config file");
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw InvalidInput(path.string() + ":" + std::to_string(number) + ": expected key = value");
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
      value = value.substr(1, value.size() - 2);
    try {
      set_config_value(base, trim(line.substr(0, eq)), value);
    } catch (const InvalidInput& e) {
      throw InvalidInput(path.string() + ":" + std::to_string(number) + ": " + e.what());
    }
  }
  return base;
}

Pipeline::Pipeline(PipelineConfig config) : config_(std::move(config)) {
  config_.validate();
  if (config_.fringe == FringeMethod::cnn) {
    if (config_.weights.empty()) throw InvalidInput("fringe method cnn needs a weights file");
    net_.emplace(FringeNetWeights::load(config_.weights));
  }
}

Pipeline::Pipeline(PipelineConfig config, const FringeNetWeights& weights)
    : config_(std::move(config)) {
  config_.validate();
  if (config_.fringe == FringeMethod::cnn) net_.emplace(weights);
}

PlanarImage Pipeline::process_patch(const PlanarImage& patch, const AffineBlurModel& model,
                                    Stages stages) const {
  PlanarImage z = patch;
  if (stages != Stages::defringe) {
    const BlurEstimate est = estimate(patch, model);
    z = deblur_patch(patch, est, config_.poly);
  }
  if (stages == Stages::deblur) return z;
  try {
    switch (config_.fringe) {
      case FringeMethod::none:
        return z;
      case FringeMethod::cnn:
        return net_->correct(z);
      default:
        return align_channels(z, config_.fringe);
    }
  } catch (const NumericalError&) {
    return z;
  } catch (const InvalidInput&) {
    return z;
  }
}

PlanarImage Pipeline::run(const PlanarImage& image, Stages stages) const {
  if (image.channels() != 3) throw InvalidInput("pipeline: image must have 3 channels");
  if (!all_finite(image.data())) throw InvalidInput("pipeline: image has non-finite samples");
  const bool gamma = image.colorspace() == ColorSpace::gamma22;
  const AffineBlurModel model = config_.model_for(image.colorspace());
  const PlanarImage linear = gamma ? gamma_decode(image) : image;

  const PatchGrid grid = tile(linear, config_.patch_size, config_.overlap);
  const int count = static_cast<int>(grid.origins.size());
  std::vector<PlanarImage> out(count);
  std::vector<std::string> errors(count);
  auto work = [&](int i) {
    try {
      out[i] = process_patch(extract_patch(linear, grid, i), model, stages);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  };
  // Few patches: let the inner kernels use the workers instead.
  if (count >= worker_count()) {
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < count; ++i) work(i);
  } else {
    for (int i = 0; i < count; ++i) work(i);
  }
  for (const auto& e : errors)
    if (!e.empty()) throw NumericalError(e);

  PlanarImage fused = fuse(out, grid);
  clamp_unit(fused.data());
  return gamma ? gamma_encode(fused) : fused;
}

PlanarImage Pipeline::correct(const PlanarImage& image) const { return run(image, Stages::both); }
PlanarImage Pipeline::deblur(const PlanarImage& image) const { return run(image, Stages::deblur); }
PlanarImage Pipeline::defringe(const PlanarImage& image) const {
  return run(image, Stages::defringe);
}

BlurEstimate Pipeline::estimate_patch(const PlanarImage& image, int row, int col) const {
  if (image.channels() != 3) throw InvalidInput("estimate: image must have 3 channels");
  const int h = std::min(config_.patch_size, image.height());
  const int w = std::min(config_.patch_size, image.width());
  if (row < 0 || col < 0 || row >= image.height() || col >= image.width())
    throw InvalidInput("patch origin outside the image");
  row = std::min(row, image.height() - h);
  col = std::min(col, image.width() - w);
  const PlanarImage linear =
      image.colorspace() == ColorSpace::gamma22 ? gamma_decode(image) : image;
  return estimate(crop(linear, row, col, h, w), config_.model_for(image.colorspace()));
}

}  // namespace aberrex
