#include <benchmark/benchmark.h>

#include "defocus/blurmap.hpp"
#include "defocus/dataset.hpp"
#include "defocus/parallel.hpp"
#include "defocus/predictor.hpp"
#include "defocus/refine.hpp"

using namespace defocus;

namespace {

void BM_EstimateMap(benchmark::State& state) {
  const int step = static_cast<int>(state.range(0));
  const Image img = desk_texture(5, 256);
  const ModelPredictor backend(ClassifierModel::zero());
  for (auto _ : state) benchmark::DoNotOptimize(estimate_map(img, backend, step));
  state.counters["patches_per_s"] = benchmark::Counter(
      static_cast<double>(state.iterations()) * (((256 - 32) / step + 1) * ((256 - 32) / step + 1)),
      benchmark::Counter::kIsRate);
}
BENCHMARK(BM_EstimateMap)->Arg(32)->Arg(16)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_RefineMap(benchmark::State& state) {
  const Image img = desk_texture(5, 256);
  const Image map(256, 256, 1, 4.0);
  for (auto _ : state) benchmark::DoNotOptimize(refine_map(map, img));
}
BENCHMARK(BM_RefineMap)->Unit(benchmark::kMillisecond);

}  // namespace
