// Serial reference vs OpenMP kernels. Thread count follows OMP_NUM_THREADS.

#include <benchmark/benchmark.h>

#include <random>

#include "aberrex/fringe_net.hpp"
#include "aberrex/kernels.hpp"
#include "aberrex/psf.hpp"
#include "aberrex/tiling.hpp"

using namespace aberrex;

namespace {

Plane noise_plane(int n, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  Plane p(n, n);
  for (float& v : p.data()) v = u(rng);
  return p;
}

FeatureMap noise_features(int c, int n) {
  std::mt19937 rng(c);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  FeatureMap f(c, n, n);
  for (float& v : f.data) v = u(rng);
  return f;
}

void BM_Convolve(benchmark::State& state) {
  const Plane img = noise_plane(static_cast<int>(state.range(0)), 1);
  const Kernel2D k = rasterize(0.5, 2.0, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(convolve(img, k));
  state.SetItemsProcessed(state.iterations() * img.size());
}

void BM_ConvolveSerial(benchmark::State& state) {
  const Plane img = noise_plane(static_cast<int>(state.range(0)), 1);
  const Kernel2D k = rasterize(0.5, 2.0, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(convolve_serial(img, k));
  state.SetItemsProcessed(state.iterations() * img.size());
}

template <bool Reference>
void BM_Conv3x3(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const FeatureMap in = noise_features(64, n);
  std::vector<float> w(64 * 64 * 9, 0.01f), scale(64, 1.0f), shift(64, 0.0f);
  const Conv3x3Params p{64, 64, w, scale, shift, true};
  for (auto _ : state)
    benchmark::DoNotOptimize(Reference ? conv3x3_reference(in, p) : conv3x3(in, p));
  state.SetItemsProcessed(state.iterations() * in.plane_size());
}

template <bool Reference>
void BM_Bilateral(benchmark::State& state) {
  const Plane img = noise_plane(static_cast<int>(state.range(0)), 2);
  for (auto _ : state)
    benchmark::DoNotOptimize(Reference ? bilateral_serial(img, 1.8, 0.1) : bilateral(img, 1.8, 0.1));
  state.SetItemsProcessed(state.iterations() * img.size());
}

template <bool Reference>
void BM_FringeNet(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const FringeNet net(zero_fringe_weights());
  const Plane zc = noise_plane(n, 3), zg = noise_plane(n, 4);
  for (auto _ : state)
    benchmark::DoNotOptimize(Reference ? net.forward_reference(zc, zg) : net.forward(zc, zg));
  state.SetItemsProcessed(state.iterations() * zc.size());
}

void BM_Fuse(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  PlanarImage img(n, n, 3);
  const PatchGrid grid = tile(img, 400, 0.25);
  std::vector<PlanarImage> patches;
  for (std::size_t i = 0; i < grid.origins.size(); ++i) patches.push_back(extract_patch(img, grid, i));
  for (auto _ : state) benchmark::DoNotOptimize(fuse(patches, grid));
  state.SetItemsProcessed(state.iterations() * img.plane_size());
}

}  // namespace

BENCHMARK(BM_Convolve)->Arg(512)->Arg(1024)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvolveSerial)->Arg(512)->Arg(1024)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Conv3x3<false>)->Name("BM_Conv3x3")->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Conv3x3<true>)->Name("BM_Conv3x3Reference")->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Bilateral<false>)->Name("BM_Bilateral")->Arg(512)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Bilateral<true>)->Name("BM_BilateralSerial")->Arg(512)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_FringeNet<false>)->Name("BM_FringeNet")->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_FringeNet<true>)->Name("BM_FringeNetReference")->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Fuse)->Arg(1000)->Arg(2000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
