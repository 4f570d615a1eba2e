#include "aberrex/degrade.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "aberrex/error.hpp"
#include "aberrex/image_io.hpp"
#include "aberrex/kernels.hpp"

namespace aberrex {

PlanarImage unprocess(const PlanarImage& display) {
  PlanarImage out = display;
  out.set_colorspace(ColorSpace::linear);
  for (float& v : out.data()) {
    const double y = std::clamp(static_cast<double>(v), 0.0, 1.0);
    const double x = 0.5 - std::sin(std::asin(1.0 - 2.0 * y) / 3.0);
    v = static_cast<float>(std::pow(std::clamp(x, 0.0, 1.0), 2.2));
  }
  return out;
}

PlanarImage reprocess(const PlanarImage& linear) {
  PlanarImage out = linear;
  out.set_colorspace(ColorSpace::gamma22);
  for (float& v : out.data()) {
    const double x = std::pow(std::clamp(static_cast<double>(v), 0.0, 1.0), 1.0 / 2.2);
    v = static_cast<float>(3.0 * x * x - 2.0 * x * x * x);
  }
  return out;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return splitmix64(splitmix64(splitmix64(seed) ^ a) ^ (b * 0x9e3779b97f4a7c15ull));
}

inline double to_unit_open(std::uint64_t bits) {
  // 53 random bits mapped into (0, 1).
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace

double hashed_normal(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  const std::uint64_t h = derive_seed(seed, stream, index);
  const double u1 = to_unit_open(h);
  const double u2 = to_unit_open(splitmix64(h));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

PlanarImage apply_psf(const PlanarImage& image, const GaussianPsf& psf) {
  if (image.channels() != 3) throw InvalidInput("apply_psf: image must have 3 channels");
  PlanarImage out = image;
  for (int c = 0; c < 3; ++c) {
    const auto& blur = psf.channels[c];
    if (blur.sigma > kMinStd || blur.rho > kMinStd)
      out.set_channel(c, convolve(image.channel(c), rasterize(psf.theta, blur.sigma, blur.rho)));
  }
  return out;
}

int bayer_channel(int y, int x) noexcept {
  const bool odd_y = y & 1;
  const bool odd_x = x & 1;
  if (!odd_y && !odd_x) return 0;
  if (odd_y && odd_x) return 2;
  return 1;
}

Plane mosaick(const PlanarImage& rgb) {
  if (rgb.channels() != 3) throw InvalidInput("mosaick: image must have 3 channels");
  Plane raw(rgb.height(), rgb.width());
  for (int y = 0; y < rgb.height(); ++y)
    for (int x = 0; x < rgb.width(); ++x) raw(y, x) = rgb.at(bayer_channel(y, x), y, x);
  return raw;
}

Plane simulate_raw(const PlanarImage& clean, const DegradeParams& params, bool clip) {
  if (clean.channels() != 3) throw InvalidInput("simulate_raw: image must have 3 channels");
  std::array<Plane, 3> optical;
  for (int c = 0; c < 3; ++c) {
    Plane p = clean.channel(c);
    const Shift* s = c == 0 ? &params.red_shift : c == 2 ? &params.blue_shift : nullptr;
    if (s && (s->dx != 0.0 || s->dy != 0.0)) p = translate(p, s->dx, s->dy);
    const auto& blur = params.psf.channels[c];
    if (blur.sigma > kMinStd || blur.rho > kMinStd)
      p = convolve(p, rasterize(params.psf.theta, blur.sigma, blur.rho));
    optical[c] = std::move(p);
  }
  const int H = clean.height();
  const int W = clean.width();
  Plane raw(H, W);
  const bool noisy = params.alpha > 0.0 || params.beta > 0.0;
#pragma omp parallel for schedule(static)
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const int c = bayer_channel(y, x);
      double v = optical[c](y, x);
      if (noisy) {
        const double var = params.alpha * std::max(v, 0.0) + params.beta;
        const auto index = static_cast<std::uint64_t>(y) * static_cast<std::uint64_t>(W) + x;
        v += std::sqrt(var) * hashed_normal(params.seed, static_cast<std::uint64_t>(c), index);
      }
      raw(y, x) = static_cast<float>(clip ? std::clamp(v, 0.0, 1.0) : v);
    }
  return raw;
}

PlanarImage demosaick_hamilton_adams(const Plane& raw) {
  const int H = raw.height();
  const int W = raw.width();
  if (H % 2 || W % 2 || H < 2 || W < 2)
    throw InvalidInput("demosaick: dimensions must be even");
  // Reflect-101 keeps the CFA parity, so mirrored samples keep their colour.
  auto r = [&](int y, int x) -> double { return raw.mirrored(y, x); };
  Plane green(H, W);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      if (bayer_channel(y, x) == 1) {
        green(y, x) = raw(y, x);
        continue;
      }
      const double c = r(y, x);
      const double lap_h = 2.0 * c - r(y, x - 2) - r(y, x + 2);
      const double lap_v = 2.0 * c - r(y - 2, x) - r(y + 2, x);
      const double grad_h = std::abs(r(y, x - 1) - r(y, x + 1)) + std::abs(lap_h);
      const double grad_v = std::abs(r(y - 1, x) - r(y + 1, x)) + std::abs(lap_v);
      const double gh = 0.5 * (r(y, x - 1) + r(y, x + 1)) + 0.25 * lap_h;
      const double gv = 0.5 * (r(y - 1, x) + r(y + 1, x)) + 0.25 * lap_v;
      double g;
      if (grad_h < grad_v)
        g = gh;
      else if (grad_v < grad_h)
        g = gv;
      else
        g = 0.5 * (gh + gv);
      green(y, x) = static_cast<float>(g);
    }

  PlanarImage out(H, W, 3);
  out.set_channel(1, green);
  auto gm = [&](int y, int x) -> double { return green.mirrored(y, x); };
  auto diff = [&](int y, int x) { return r(y, x) - gm(y, x); };
#pragma omp parallel for schedule(static)
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const int site = bayer_channel(y, x);
      const double g = green(y, x);
      double red, blue;
      if (site == 1) {
        const double horiz = 0.5 * (diff(y, x - 1) + diff(y, x + 1));
        const double vert = 0.5 * (diff(y - 1, x) + diff(y + 1, x));
        // Even rows alternate R/G, odd rows G/B.
        if ((y & 1) == 0) {
          red = g + horiz;
          blue = g + vert;
        } else {
          red = g + vert;
          blue = g + horiz;
        }
      } else {
        const double diag = 0.25 * (diff(y - 1, x - 1) + diff(y - 1, x + 1) +
                                    diff(y + 1, x - 1) + diff(y + 1, x + 1));
        const double own = raw(y, x);
        if (site == 0) {
          red = own;
          blue = g + diag;
        } else {
          blue = own;
          red = g + diag;
        }
      }
      out.at(0, y, x) = static_cast<float>(red);
      out.at(2, y, x) = static_cast<float>(blue);
    }
  return out;
}

Plane denoise_raw(const Plane& raw, double spatial_sigma, double range_sigma) {
  if (range_sigma <= 0.0) return raw;
  const int H = raw.height();
  const int W = raw.width();
  if (H % 2 || W % 2) throw InvalidInput("denoise_raw: dimensions must be even");
  Plane out(H, W);
  for (int oy = 0; oy < 2; ++oy)
    for (int ox = 0; ox < 2; ++ox) {
      Plane sub(H / 2, W / 2);
      for (int y = 0; y < H / 2; ++y)
        for (int x = 0; x < W / 2; ++x) sub(y, x) = raw(2 * y + oy, 2 * x + ox);
      const Plane f = bilateral(sub, spatial_sigma, range_sigma);
      for (int y = 0; y < H / 2; ++y)
        for (int x = 0; x < W / 2; ++x) out(2 * y + oy, 2 * x + ox) = f(y, x);
    }
  return out;
}

SamplePair apply_forward_model(const PlanarImage& clean, const DegradeParams& params) {
  SamplePair pair;
  pair.clean = clean;
  pair.clean.set_colorspace(ColorSpace::linear);
  pair.params = params;
  pair.raw = simulate_raw(clean, params, true);
  const double range_sigma = 3.0 * std::sqrt(params.alpha * 0.5 + params.beta);
  pair.aberrated_rgb = demosaick_hamilton_adams(denoise_raw(pair.raw, 1.8, range_sigma));
  clamp_unit(pair.aberrated_rgb.data());
  return pair;
}

DegradeParams sample_params(std::uint64_t seed, std::uint64_t index, const DatasetConfig& config) {
  std::mt19937_64 rng(derive_seed(seed, 0x70617261ull, index));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
  auto log_uniform = [&](double lo, double hi) {
    return std::exp(uniform(std::log(lo), std::log(hi)));
  };
  DegradeParams p;
  p.psf.theta = canonical_angle(uniform(0.0, std::numbers::pi));
  for (auto& ch : p.psf.channels) {
    ch.sigma = uniform(kMinStd, kMaxStd);
    ch.rho = uniform(kMinStd, kMaxStd);
  }
  p.red_shift = {uniform(-config.max_shift, config.max_shift),
                 uniform(-config.max_shift, config.max_shift)};
  p.blue_shift = {uniform(-config.max_shift, config.max_shift),
                  uniform(-config.max_shift, config.max_shift)};
  p.alpha = log_uniform(config.alpha_min, config.alpha_max);
  p.beta = log_uniform(config.beta_min, config.beta_max);
  p.seed = derive_seed(seed, 0x6e6f6973ull, index);
  return p;
}

namespace {

struct Source {
  PlanarImage image;
  std::string name;
};

std::vector<Source> load_sources(const std::filesystem::path& source) {
  std::vector<std::filesystem::path> files;
  if (std::filesystem::is_directory(source)) {
    for (const auto& e : std::filesystem::directory_iterator(source)) {
      if (!e.is_regular_file()) continue;
      std::string ext = e.path().extension().string();
      std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
      if (ext == ".png" || ext == ".ppm" || ext == ".pfm") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
  } else if (std::filesystem::exists(source)) {
    files.push_back(source);
  } else {
    throw IoError(source.string(), "source does not exist");
  }
  std::vector<Source> out;
  for (const auto& f : files) {
    PlanarImage img = read_image(f);
    if (img.channels() != 3) continue;
    std::string ext = f.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
    if (ext != ".pfm") img = unprocess(img);
    out.push_back({std::move(img), f.filename().string()});
  }
  if (out.empty()) throw IoError(source.string(), "no usable RGB source images");
  return out;
}

std::string sample_id(int i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%06d", i);
  return buf;
}

}  // namespace

std::filesystem::path generate_dataset(const std::filesystem::path& source, int count,
                                       const std::filesystem::path& out_dir,
                                       const DatasetConfig& config, std::uint64_t seed) {
  if (count < 1) throw InvalidInput("generate_dataset: count must be >= 1");
  if (config.crop < 32 || config.crop % 2) throw InvalidInput("generate_dataset: crop must be even and >= 32");
  const auto sources = load_sources(source);
  for (const auto& s : sources)
    if (s.image.height() < config.crop || s.image.width() < config.crop)
      throw InvalidInput("generate_dataset: source " + s.name + " smaller than the crop");
  for (const char* sub : {"clean", "raw", "aberrated", "deblurred"})
    std::filesystem::create_directories(out_dir / sub);

  std::vector<DegradeParams> params(count);
  std::vector<std::string> origin(count);
  std::vector<std::string> errors(count);
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < count; ++i) {
    try {
      std::mt19937_64 rng(derive_seed(seed, 0x63726f70ull, static_cast<std::uint64_t>(i)));
      const auto& src = sources[rng() % sources.size()];
      const int row = static_cast<int>(rng() % static_cast<std::uint64_t>(src.image.height() - config.crop + 1));
      const int col = static_cast<int>(rng() % static_cast<std::uint64_t>(src.image.width() - config.crop + 1));
      const PlanarImage clean = crop(src.image, row, col, config.crop, config.crop);
      params[i] = sample_params(seed, static_cast<std::uint64_t>(i), config);
      const SamplePair pair = apply_forward_model(clean, params[i]);
      const BlurEstimate est = estimate(pair.aberrated_rgb, config.model);
      const PlanarImage z = deblur_patch(pair.aberrated_rgb, est, config.poly);
      const std::string id = sample_id(i) + ".pfm";
      write_image(pair.clean, out_dir / "clean" / id);
      PlanarImage raw(pair.raw.height(), pair.raw.width(), 1);
      raw.set_channel(0, pair.raw);
      write_image(raw, out_dir / "raw" / id);
      write_image(pair.aberrated_rgb, out_dir / "aberrated" / id);
      write_image(z, out_dir / "deblurred" / id);
      origin[i] = src.name + "@" + std::to_string(row) + "," + std::to_string(col);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }
  for (const auto& e : errors)
    if (!e.empty()) throw IoError(out_dir.string(), e);

  const auto manifest = out_dir / "manifest.tsv";
  std::ofstream out(manifest);
  if (!out) throw IoError(manifest.string(), "cannot open for writing");
  out << "id\ttheta\tsigma_r\trho_r\tsigma_g\trho_g\tsigma_b\trho_b\tred_dx\tred_dy\t"
         "blue_dx\tblue_dy\talpha\tbeta\tseed\tsource\n";
  out.precision(17);
  for (int i = 0; i < count; ++i) {
    const auto& p = params[i];
    out << sample_id(i) << '\t' << p.psf.theta;
    for (const auto& ch : p.psf.channels) out << '\t' << ch.sigma << '\t' << ch.rho;
    out << '\t' << p.red_shift.dx << '\t' << p.red_shift.dy << '\t' << p.blue_shift.dx << '\t'
        << p.blue_shift.dy << '\t' << p.alpha << '\t' << p.beta << '\t' << p.seed << '\t'
        << origin[i] << '\n';
  }
  if (!out) throw IoError(manifest.string(), "write failed");
  return manifest;
}

std::vector<ManifestRow> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string(), "cannot open");
  std::string line;
  std::getline(in, line);  // header
  std::vector<ManifestRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream s(line);
    ManifestRow row;
    auto& p = row.params;
    s >> row.id >> p.psf.theta;
    for (auto& ch : p.psf.channels) s >> ch.sigma >> ch.rho;
    s >> p.red_shift.dx >> p.red_shift.dy >> p.blue_shift.dx >> p.blue_shift.dy >> p.alpha >>
        p.beta >> p.seed;
    if (!s) throw IoError(path.string(), "malformed manifest row '" + line + "'");
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace aberrex
