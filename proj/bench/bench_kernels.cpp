// Raster kernels: OpenMP versions against their serial references on one
// synthetic scene. Thread count follows OMP_NUM_THREADS.

#include <benchmark/benchmark.h>

#include "kiln/rs/kernels.hpp"
#include "kiln/synth.hpp"

using namespace kiln;

namespace {

struct Fixture {
  std::vector<raster::RasterGrid> index;
  raster::RasterGrid composite;
  raster::BinaryMask mask;

  Fixture() {
    synth::SceneSpec spec;
    spec.width = spec.height = 1024;
    spec.kiln_count = 40;
    spec.frames = 9;
    const auto scene = synth::gen_raster_scene(spec);
    for (const auto &f : scene.frames) index.push_back(rs::ndbki(f));
    composite = rs::percentile_composite(index, 80.0);
    mask = rs::above_threshold(composite, 0.0);
  }
};

const Fixture &fixture() {
  static const Fixture f;
  return f;
}

const raster::RasterGrid &frame() {
  static const auto scene = [] {
    synth::SceneSpec spec;
    spec.width = spec.height = 1024;
    spec.kiln_count = 40;
    spec.frames = 1;
    return synth::gen_raster_scene(spec);
  }();
  return scene.frames[0];
}

template <bool Parallel> void BM_ndbki(benchmark::State &state) {
  const auto &rgb = frame();
  for (auto _ : state) benchmark::DoNotOptimize(Parallel ? rs::ndbki(rgb) : rs::reference::ndbki(rgb));
}

template <bool Parallel> void BM_percentile(benchmark::State &state) {
  const auto &stack = fixture().index;
  for (auto _ : state)
    benchmark::DoNotOptimize(Parallel ? rs::percentile_composite(stack, 80.0)
                                      : rs::reference::percentile_composite(stack, 80.0));
}

template <bool Parallel> void BM_otsu(benchmark::State &state) {
  const auto &g = fixture().composite;
  for (auto _ : state)
    benchmark::DoNotOptimize(Parallel ? rs::otsu_threshold(g, 256) : rs::reference::otsu_threshold(g, 256));
}

template <bool Parallel> void BM_local_maxima(benchmark::State &state) {
  const auto &g = fixture().composite;
  for (auto _ : state)
    benchmark::DoNotOptimize(Parallel ? rs::local_maxima(g, 9) : rs::reference::local_maxima(g, 9));
}

template <bool Parallel> void BM_closing(benchmark::State &state) {
  const auto &m = fixture().mask;
  for (auto _ : state)
    benchmark::DoNotOptimize(Parallel ? rs::morphological_closing(m, 4)
                                      : rs::reference::morphological_closing(m, 4));
}

} // namespace

BENCHMARK(BM_ndbki<false>)->Name("ndbki/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ndbki<true>)->Name("ndbki/omp")->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_percentile<false>)->Name("percentile/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_percentile<true>)->Name("percentile/omp")->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_otsu<false>)->Name("otsu/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_otsu<true>)->Name("otsu/omp")->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_local_maxima<false>)->Name("local_maxima/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_local_maxima<true>)->Name("local_maxima/omp")->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_closing<false>)->Name("closing/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_closing<true>)->Name("closing/omp")->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
