// aberrex: blind aberration correction from the command line.

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "aberrex/blur_estimation.hpp"
#include "aberrex/deblur.hpp"
#include "aberrex/degrade.hpp"
#include "aberrex/error.hpp"
#include "aberrex/fringe_baselines.hpp"
#include "aberrex/fringe_net.hpp"
#include "aberrex/image_io.hpp"
#include "aberrex/kernels.hpp"
#include "aberrex/metrics.hpp"
#include "aberrex/pipeline.hpp"
#include "aberrex/psf.hpp"

namespace fs = std::filesystem;
using namespace aberrex;

namespace {

#ifndef ABERREX_DEFAULT_WEIGHTS
#define ABERREX_DEFAULT_WEIGHTS "data/fringe_net.ftbw"
#endif

// Options shared by the image-processing subcommands. Strings are kept raw so
// that only flags actually given override the config file.
struct CommonOptions {
  std::string config;
  std::string patch, overlap, coeffs, poly, fringe, weights, threads;
  bool jpeg = false;
  int bit_depth = 8;
};

void add_common(CLI::App* cmd, CommonOptions& o, bool fringe_flags) {
  cmd->add_option("--config", o.config, "key = value configuration file");
  cmd->add_option("--patch", o.patch, "patch size in pixels (default 400)");
  cmd->add_option("--overlap", o.overlap, "patch overlap: 0, 0.25 or 0.5 (default 0.25)");
  cmd->add_option("--coeffs", o.coeffs, "blur model C,sigma_b or linear/jpeg");
  cmd->add_option("--poly", o.poly, "inverse polynomial a0,a1,a2[,a3]");
  if (fringe_flags) {
    cmd->add_option("--fringe-method", o.fringe, "cnn, radial, phasecorr, plk-t, plk-s or none");
    cmd->add_option("--weights", o.weights, "network weights (FTBW)");
  }
  cmd->add_option("--threads", o.threads, "worker threads (default $ABERREX_THREADS)");
  cmd->add_flag("--jpeg", o.jpeg, "input is gamma-encoded: decode, process, re-encode");
  cmd->add_option("--bit-depth", o.bit_depth, "PNG/PPM output depth")->check(CLI::IsMember({8, 16}));
}

PipelineConfig make_config(const CommonOptions& o) {
  PipelineConfig cfg;
  cfg.weights = ABERREX_DEFAULT_WEIGHTS;
  if (const char* env = std::getenv("ABERREX_THREADS"); env && *env)
    set_config_value(cfg, "threads", env);
  if (!o.config.empty()) cfg = read_config(o.config, cfg);
  const std::pair<const char*, const std::string*> flags[] = {
      {"patch", &o.patch},   {"overlap", &o.overlap},         {"coeffs", &o.coeffs},
      {"poly", &o.poly},     {"fringe-method", &o.fringe},    {"weights", &o.weights},
      {"threads", &o.threads}};
  for (const auto& [key, value] : flags)
    if (!value->empty()) set_config_value(cfg, key, *value);
  cfg.validate();
  if (cfg.threads > 0) set_worker_count(cfg.threads);
  return cfg;
}

PlanarImage load_input(const std::string& path, bool jpeg) {
  PlanarImage img = read_image(path);
  if (img.channels() != 3) throw InvalidInput(path + ": expected an RGB image");
  if (jpeg) img.set_colorspace(ColorSpace::gamma22);
  return img;
}

void print_estimate(const BlurEstimate& est) {
  const char* names[] = {"R", "G", "B"};
  std::cout << std::fixed << std::setprecision(4) << "theta\t" << est.psf.theta << "\t("
            << est.psf.theta * 180.0 / std::numbers::pi << " deg)\n";
  for (int c = 0; c < 3; ++c)
    std::cout << names[c] << "\tsigma=" << est.psf.channels[c].sigma
              << "\trho=" << est.psf.channels[c].rho << (est.flat[c] ? "\tflat" : "") << '\n';
}

// Rasterized kernels of all channels embedded on the largest grid.
EmpiricalPsf kernels_of(const BlurEstimate& est) {
  std::vector<Kernel2D> k;
  int side = 1;
  for (int c = 0; c < 3; ++c) {
    const auto& ch = est.psf.channels[c];
    k.push_back(est.is_dirac(c) ? Kernel2D::dirac() : rasterize(est.psf.theta, ch.sigma, ch.rho));
    side = std::max(side, k.back().side);
  }
  EmpiricalPsf out{side, {}};
  for (const auto& kc : k) {
    Kernel2D padded{side, std::vector<double>(static_cast<std::size_t>(side) * side, 0.0)};
    const int off = (side - kc.side) / 2;
    for (int y = 0; y < kc.side; ++y)
      for (int x = 0; x < kc.side; ++x)
        padded.taps[static_cast<std::size_t>(y + off) * side + x + off] =
            kc.taps[static_cast<std::size_t>(y) * kc.side + x];
    out.channels.push_back(std::move(padded));
  }
  return out;
}

GaussianPsf read_sidecar(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string(), "missing sidecar");
  GaussianPsf psf;
  double theta = 0.0;
  for (int c = 0; c < 3; ++c) {
    double t = 0.0, s = 0.0, r = 0.0;
    if (!(in >> t >> s >> r)) throw IoError(path.string(), "expected 'theta sigma rho' per channel");
    if (c == 0) theta = t;
    psf.channels[c] = {s, r};
  }
  psf.theta = canonical_angle(theta);
  return psf;
}

int run_calibrate(const std::string& corpus, const std::string& out_path) {
  std::vector<fs::path> images;
  for (const auto& e : fs::directory_iterator(corpus))
    if (e.is_regular_file() && e.path().extension() == ".pfm") images.push_back(e.path());
  if (images.empty()) throw IoError(corpus, "no .pfm images in corpus");
  std::sort(images.begin(), images.end());
  std::vector<CalibrationSample> samples;
  for (const auto& img_path : images) {
    fs::path side = img_path;
    side.replace_extension(".txt");
    const auto s = calibration_samples(read_image(img_path), read_sidecar(side));
    samples.insert(samples.end(), s.begin(), s.end());
  }
  const AffineBlurModel model = calibrate(samples);
  const fs::path out = out_path.empty() ? fs::path(corpus) / "affine_model.txt" : fs::path(out_path);
  write_affine_model(model, out);
  std::cout << std::setprecision(6) << "C=" << model.C << "\nsigma_b=" << model.sigma_b << '\n'
            << "images=" << images.size() << " samples=" << samples.size() << " written to "
            << out.string() << '\n';
  return 0;
}

int run_eval(const std::string& pairs_dir, const PipelineConfig& cfg, const std::string& out_path,
             int limit) {
  const auto rows = read_manifest(fs::path(pairs_dir) / "manifest.tsv");
  std::optional<FringeNet> net;
  if (cfg.fringe == FringeMethod::cnn) net.emplace(FringeNetWeights::load(cfg.weights));
  const AffineBlurModel model = cfg.model_for(ColorSpace::linear);

  const int n = limit > 0 ? std::min<int>(limit, static_cast<int>(rows.size()))
                          : static_cast<int>(rows.size());
  std::vector<std::string> lines(n);
  std::vector<std::string> errors(n);
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i) {
    try {
      const auto& row = rows[i];
      const std::string file = row.id + ".pfm";
      const PlanarImage u = read_image(fs::path(pairs_dir) / "clean" / file);
      const PlanarImage v = read_image(fs::path(pairs_dir) / "aberrated" / file);
      BlurEstimate truth;
      truth.psf = row.params.psf;
      const BlurEstimate est = estimate(v, model);
      const SsimRatio r = ssim_ratio(v, u, truth, est, cfg.poly);
      const PlanarImage z = deblur_patch(v, est, cfg.poly);
      PlanarImage corrected = z;
      if (cfg.fringe == FringeMethod::cnn) corrected = net->correct(z);
      else if (cfg.fringe != FringeMethod::none) corrected = align_channels(z, cfg.fringe);
      std::ostringstream line;
      line << std::setprecision(6) << row.id << '\t' << r.ratio << '\t' << energy(z) << '\t'
           << energy(corrected) << '\t' << ssim(v, u) << '\t' << ssim(z, u);
      lines[i] = line.str();
    } catch (const std::exception& e) {
      errors[i] = rows[i].id + ": " + e.what();
    }
  }
  for (const auto& e : errors)
    if (!e.empty()) throw NumericalError(e);

  std::ofstream file;
  if (!out_path.empty()) {
    file.open(out_path);
    if (!file) throw IoError(out_path, "cannot open for writing");
  }
  std::ostream& out = out_path.empty() ? std::cout : file;
  out << "id\tR\tE_before\tE_after\tssim_blurry\tssim_deblurred\n";
  for (const auto& l : lines) out << l << '\n';
  return 0;
}

int run_fit_psf(const std::string& path) {
  const auto records = read_empirical_psfs(path);
  std::cout << "record\tchannel\ttheta\tsigma\trho\n" << std::fixed << std::setprecision(4);
  for (std::size_t r = 0; r < records.size(); ++r)
    for (std::size_t c = 0; c < records[r].channels.size(); ++c) {
      const GaussianFit fit = fit_gaussian(records[r].channels[c]);
      std::cout << r << '\t' << c << '\t' << fit.theta << '\t' << fit.sigma << '\t' << fit.rho;
      if (fit.clamped) std::cout << "\tclamped";
      std::cout << '\n';
      if (fit.clamped)
        std::cerr << "warning: record " << r << " channel " << c
                  << " narrower than the 0.2 px floor\n";
    }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Blind optical aberration correction"};
  app.require_subcommand(1);

  std::string in, out, dir;
  CommonOptions opts;

  auto* correct = app.add_subcommand("correct", "deblur and remove color fringes");
  correct->add_option("input", in, "input image")->required();
  correct->add_option("output", out, "output image")->required();
  add_common(correct, opts, true);

  auto* deblur = app.add_subcommand("deblur", "blind deblurring only");
  deblur->add_option("input", in, "input image")->required();
  deblur->add_option("output", out, "output image")->required();
  add_common(deblur, opts, false);

  auto* defringe = app.add_subcommand("defringe", "fringe correction only");
  defringe->add_option("input", in, "input image")->required();
  defringe->add_option("output", out, "output image")->required();
  add_common(defringe, opts, true);

  std::string origin = "0,0", kernels_out;
  auto* est = app.add_subcommand("estimate-kernel", "print the blind PSF estimate of one patch");
  est->add_option("input", in, "input image")->required();
  est->add_option("--patch-origin", origin, "row,col of the patch");
  est->add_option("--kernels", kernels_out, "write the rasterized kernels as an EPSF file");
  add_common(est, opts, false);

  int count = 0, crop_size = 128;
  std::uint64_t seed = 0;
  double max_shift = 4.0;
  auto* degrade = app.add_subcommand("degrade", "generate a synthetic training dataset");
  degrade->add_option("clean", in, "source image or directory")->required();
  degrade->add_option("out-dir", dir, "output directory")->required();
  degrade->add_option("--count", count, "number of pairs")->required();
  degrade->add_option("--seed", seed, "random seed");
  degrade->add_option("--crop", crop_size, "crop size (even)");
  degrade->add_option("--max-shift", max_shift, "red/blue shift bound in pixels");
  degrade->add_option("--coeffs", opts.coeffs, "blur model used to produce the deblurred input");
  degrade->add_option("--poly", opts.poly, "inverse polynomial a0,a1,a2[,a3]");
  degrade->add_option("--threads", opts.threads, "worker threads");

  std::string model_out;
  auto* calib = app.add_subcommand("calibrate", "fit C and sigma_b on a corpus with known PSFs");
  calib->add_option("corpus-dir", dir, "directory of PFM images with .txt sidecars")->required();
  calib->add_option("--out", model_out, "model file (default <corpus-dir>/affine_model.txt)");

  std::string tsv_out;
  int limit = 0;
  auto* eval = app.add_subcommand("eval", "metrics on a generated pairs directory");
  eval->add_option("pairs-dir", dir, "dataset directory with manifest.tsv")->required();
  eval->add_option("--out", tsv_out, "TSV file (default stdout)");
  eval->add_option("--limit", limit, "evaluate the first N pairs only");
  add_common(eval, opts, true);

  auto* fit = app.add_subcommand("fit-psf", "Gaussian fits of measured PSFs");
  fit->add_option("epsf-file", in, "EPSF file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (correct->parsed() || deblur->parsed() || defringe->parsed()) {
      const PipelineConfig cfg = make_config(opts);
      const bool needs_net = !deblur->parsed();
      const Pipeline pipeline = needs_net ? Pipeline(cfg)
                                          : Pipeline([&] {
                                              PipelineConfig c = cfg;
                                              c.fringe = FringeMethod::none;
                                              return c;
                                            }());
      const PlanarImage img = load_input(in, opts.jpeg);
      const PlanarImage result = correct->parsed()  ? pipeline.correct(img)
                                 : deblur->parsed() ? pipeline.deblur(img)
                                                    : pipeline.defringe(img);
      write_image(result, out, {opts.bit_depth});
      return 0;
    }
    if (est->parsed()) {
      PipelineConfig cfg = make_config(opts);
      cfg.fringe = FringeMethod::none;
      int row = 0, col = 0;
      char comma = 0;
      std::istringstream ss(origin);
      if (!(ss >> row >> comma >> col) || comma != ',' || !ss.eof())
        throw InvalidInput("--patch-origin: expected r,c");
      const BlurEstimate e = Pipeline(cfg).estimate_patch(load_input(in, opts.jpeg), row, col);
      print_estimate(e);
      if (!kernels_out.empty()) write_empirical_psfs(kernels_out, {kernels_of(e)});
      return 0;
    }
    if (degrade->parsed()) {
      PipelineConfig cfg;
      if (!opts.coeffs.empty()) set_config_value(cfg, "coeffs", opts.coeffs);
      if (!opts.poly.empty()) set_config_value(cfg, "poly", opts.poly);
      if (!opts.threads.empty()) set_config_value(cfg, "threads", opts.threads);
      if (cfg.threads > 0) set_worker_count(cfg.threads);
      DatasetConfig dc;
      dc.crop = crop_size;
      dc.max_shift = max_shift;
      dc.model = cfg.model_for(ColorSpace::linear);
      dc.poly = cfg.poly;
      std::cout << generate_dataset(in, count, dir, dc, seed).string() << '\n';
      return 0;
    }
    if (calib->parsed()) return run_calibrate(dir, model_out);
    if (eval->parsed()) return run_eval(dir, make_config(opts), tsv_out, limit);
    if (fit->parsed()) return run_fit_psf(in);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 1;
}
