#include "aberrex/blur_estimation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <string>

#include "aberrex/error.hpp"

namespace aberrex {

BlurEstimate BlurEstimate::dirac() { return BlurEstimate{}; }

AffineBlurModel read_affine_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string(), "cannot open");
  AffineBlurModel model;
  bool have_c = false, have_b = false;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq);
    double value;
    try {
      value = std::stod(line.substr(eq + 1));
    } catch (const std::exception&) {
      throw IoError(path.string(), "bad value in '" + line + "'");
    }
    if (key == "C") {
      model.C = value;
      have_c = true;
    } else if (key == "sigma_b") {
      model.sigma_b = value;
      have_b = true;
    }
  }
  if (!have_c || !have_b) throw IoError(path.string(), "expected C= and sigma_b= lines");
  if (!(model.C > 0.0) || !(model.sigma_b >= 0.0))
    throw IoError(path.string(), "model needs C > 0 and sigma_b >= 0");
  return model;
}

void write_affine_model(const AffineBlurModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out << std::setprecision(9) << "C=" << model.C << "\nsigma_b=" << model.sigma_b << '\n';
  if (!out) throw IoError(path.string(), "write failed");
}

namespace {

// Quantile with linear interpolation between order statistics of `sorted`.
double quantile_of(const std::vector<float>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double t = pos - static_cast<double>(lo);
  return sorted[lo] * (1.0 - t) + sorted[hi] * t;
}

double plane_variance(const Plane& p) {
  double mean = 0.0;
  for (float v : p.data()) mean += v;
  mean /= static_cast<double>(p.size());
  double var = 0.0;
  for (float v : p.data()) var += (v - mean) * (v - mean);
  return var / static_cast<double>(p.size());
}

}  // namespace

NormalizedPlane normalize(const Plane& channel, double quantile) {
  if (channel.empty()) throw InvalidInput("normalize: empty channel");
  std::vector<float> sorted(channel.data().begin(), channel.data().end());
  std::sort(sorted.begin(), sorted.end());
  const double lo = quantile_of(sorted, quantile);
  const double hi = quantile_of(sorted, 1.0 - quantile);
  NormalizedPlane out{Plane(channel.height(), channel.width()), false};
  if (hi - lo < 1e-6) {
    out.flat = true;
    return out;
  }
  const double scale = 1.0 / (hi - lo);
  auto src = channel.data();
  auto dst = out.values.data();
  for (std::size_t i = 0; i < src.size(); ++i)
    dst[i] = static_cast<float>(std::clamp((src[i] - lo) * scale, 0.0, 1.0));
  return out;
}

Gradients gradients(const Plane& plane) {
  const int H = plane.height();
  const int W = plane.width();
  Gradients g{Plane(H, W), Plane(H, W)};
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      g.dx(y, x) = plane.mirrored(y, x + 1) - plane(y, x);
      g.dy(y, x) = plane.mirrored(y + 1, x) - plane(y, x);
    }
  return g;
}

double directional_inf_norm(const Gradients& g, double phi, int border) {
  const double c = std::cos(phi);
  const double s = std::sin(phi);
  const int H = g.dx.height();
  const int W = g.dx.width();
  const int b = (H > 2 * border && W > 2 * border) ? border : 0;
  double best = 0.0;
  for (int y = b; y < H - b; ++y) {
    auto gx = g.dx.row(y);
    auto gy = g.dy.row(y);
    for (int x = b; x < W - b; ++x)
      best = std::max(best, std::abs(c * gx[x] + s * gy[x]));
  }
  return best;
}

double estimate_direction(const Plane& normalized_green, const EstimatorSettings& settings) {
  const Gradients g = gradients(normalized_green);
  // Scores are pi-periodic: node 6 (180 degrees) equals node 0.
  std::array<double, 6> coarse{};
  for (int i = 0; i < 6; ++i)
    coarse[i] = directional_inf_norm(g, i * std::numbers::pi / 6.0, settings.border);
  if (*std::max_element(coarse.begin(), coarse.end()) == 0.0)
    throw NumericalError("estimate_direction: flat patch");
  auto node = [&](int i) { return coarse[((i % 6) + 6) % 6]; };
  auto keys = [](double t) {
    t = std::abs(t);
    if (t < 1.0) return (1.5 * t - 2.5) * t * t + 1.0;
    if (t < 2.0) return ((-0.5 * t + 2.5) * t - 4.0) * t + 2.0;
    return 0.0;
  };
  double best_score = coarse[0];
  int best_step = 0;
  for (int step = 1; step < 30; ++step) {
    const int seg = step / 5;
    const double t = (step % 5) / 5.0;
    double score;
    if (settings.interpolation == AngleInterpolation::linear) {
      score = node(seg) * (1.0 - t) + node(seg + 1) * t;
    } else {
      score = 0.0;
      for (int k = -1; k <= 2; ++k) score += node(seg + k) * keys(t - k);
    }
    if (score < best_score) {
      best_score = score;
      best_step = step;
    }
  }
  return canonical_angle(best_step * std::numbers::pi / 30.0);
}

double std_from_norm(double grad_inf_norm, const AffineBlurModel& model) {
  if (!(grad_inf_norm > 0.0)) return kMinStd;
  const double radicand =
      model.C * model.C / (grad_inf_norm * grad_inf_norm) - model.sigma_b * model.sigma_b;
  if (!(radicand > 0.0)) return kMinStd;
  const double s = std::sqrt(radicand);
  if (s > kMaxStd || s < kMinStd) return kMinStd;
  return s;
}

ChannelBlur estimate_sigmas(const Plane& normalized, double theta,
                            const AffineBlurModel& model,
                            const EstimatorSettings& settings) {
  if (plane_variance(normalized) < settings.variance_threshold) return {};
  const Gradients g = gradients(normalized);
  return {std_from_norm(directional_inf_norm(g, theta, settings.border), model),
          std_from_norm(directional_inf_norm(g, theta + std::numbers::pi / 2.0,
                                             settings.border),
                        model)};
}

BlurEstimate estimate(const PlanarImage& patch, const AffineBlurModel& model,
                      const EstimatorSettings& settings) {
  if (patch.channels() != 3) throw InvalidInput("estimate: patch must have 3 channels");
  std::array<NormalizedPlane, 3> n;
  for (int c = 0; c < 3; ++c) n[c] = normalize(patch.channel(c), settings.quantile);
  BlurEstimate est;
  for (int c = 0; c < 3; ++c) est.flat[c] = n[c].flat;
  if (n[1].flat) return est;
  double theta;
  try {
    theta = estimate_direction(n[1].values, settings);
  } catch (const NumericalError&) {
    return est;
  }
  est.psf.theta = theta;
  for (int c = 0; c < 3; ++c) {
    if (n[c].flat) continue;
    est.psf.channels[c] = estimate_sigmas(n[c].values, theta, model, settings);
  }
  return est;
}

std::vector<CalibrationSample> calibration_samples(const PlanarImage& blurred,
                                                   const GaussianPsf& truth,
                                                   const EstimatorSettings& settings) {
  std::vector<CalibrationSample> out;
  for (int c = 0; c < blurred.channels() && c < 3; ++c) {
    const NormalizedPlane n = normalize(blurred.channel(c), settings.quantile);
    if (n.flat) continue;
    const Gradients g = gradients(n.values);
    out.push_back({directional_inf_norm(g, truth.theta, settings.border),
                   truth.channels[c].sigma});
    out.push_back({directional_inf_norm(g, truth.theta + std::numbers::pi / 2.0,
                                        settings.border),
                   truth.channels[c].rho});
  }
  return out;
}

namespace {

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
};

// Weighted least squares for y = slope * t + intercept (or through the
// origin when fit_intercept is false).
LineFit weighted_fit(const std::vector<double>& t, const std::vector<double>& y,
                     const std::vector<double>& w, bool fit_intercept) {
  double sw = 0, st = 0, sy = 0, stt = 0, sty = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    sw += w[i];
    st += w[i] * t[i];
    sy += w[i] * y[i];
    stt += w[i] * t[i] * t[i];
    sty += w[i] * t[i] * y[i];
  }
  if (!fit_intercept) return {sty / stt, 0.0};
  const double det = sw * stt - st * st;
  return {(sw * sty - st * sy) / det, (stt * sy - st * sty) / det};
}

LineFit lad_fit(const std::vector<double>& t, const std::vector<double>& y,
                bool fit_intercept) {
  std::vector<double> w(t.size(), 1.0);
  LineFit fit = weighted_fit(t, y, w, fit_intercept);
  for (int iter = 0; iter < 200; ++iter) {
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double r = std::abs(y[i] - fit.slope * t[i] - fit.intercept);
      w[i] = 1.0 / std::max(r, 1e-9);
    }
    const LineFit next = weighted_fit(t, y, w, fit_intercept);
    const bool done = std::abs(next.slope - fit.slope) <= 1e-12 * std::abs(fit.slope) &&
                      std::abs(next.intercept - fit.intercept) <= 1e-12;
    fit = next;
    if (done) break;
  }
  return fit;
}

}  // namespace

AffineBlurModel calibrate(std::span<const CalibrationSample> samples) {
  std::vector<double> t, y;
  for (const auto& s : samples) {
    if (!(s.grad_inf_norm > 0.0) || !std::isfinite(s.grad_inf_norm)) continue;
    t.push_back(1.0 / (s.grad_inf_norm * s.grad_inf_norm));
    y.push_back(s.true_std * s.true_std);
  }
  std::vector<double> levels = t;
  std::sort(levels.begin(), levels.end());
  const auto distinct = std::unique(levels.begin(), levels.end(), [](double a, double b) {
    return std::abs(a - b) <= 1e-9 * std::max(std::abs(a), std::abs(b));
  });
  if (std::distance(levels.begin(), distinct) < 2)
    throw NumericalError("calibrate: need at least two distinct gradient levels");

  // std^2 = C^2 t - sigma_b^2: slope C^2, intercept -sigma_b^2.
  LineFit fit = lad_fit(t, y, true);
  if (fit.intercept > 0.0) fit = lad_fit(t, y, false);
  if (!(fit.slope > 0.0)) throw NumericalError("calibrate: non-positive slope");
  return {std::sqrt(fit.slope), std::sqrt(std::max(0.0, -fit.intercept))};
}

}  // namespace aberrex
