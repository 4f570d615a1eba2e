// Writes synthetic linear test charts as PFM files, e.g. as degrade sources.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>

#include "aberrex/charts.hpp"
#include "aberrex/error.hpp"
#include "aberrex/image_io.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Synthetic chart generator"};
  std::string out_dir;
  int count = 16, height = 512, width = 512;
  std::uint64_t seed = 1;
  bool siemens = false;
  app.add_option("out-dir", out_dir, "output directory")->required();
  app.add_option("--count", count, "number of charts");
  app.add_option("--height", height, "chart height");
  app.add_option("--width", width, "chart width");
  app.add_option("--seed", seed, "first seed; chart i uses seed + i");
  app.add_flag("--siemens", siemens, "Siemens stars instead of random shapes");
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }
  try {
    std::filesystem::create_directories(out_dir);
    for (int i = 0; i < count; ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "chart_%04d.pfm", i);
      const auto kind = siemens ? aberrex::ChartKind::siemens : aberrex::ChartKind::shapes;
      aberrex::write_image(aberrex::make_chart(height, width, seed + i, kind),
                           std::filesystem::path(out_dir) / name);
    }
  } catch (const aberrex::IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
