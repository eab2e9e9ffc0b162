#include <benchmark/benchmark.h>

#include "defocus/dataset.hpp"
#include "defocus/filters.hpp"
#include "defocus/refine.hpp"

using namespace defocus;

namespace {

const Image& texture512() {
  static const Image img = desk_texture(3, 512);
  return img;
}

// Integral-image box mean: time should not grow with the radius.
void BM_BoxMean(benchmark::State& state) {
  const int r = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(box_mean(texture512(), r));
  state.SetItemsProcessed(state.iterations() * 512 * 512);
}
BENCHMARK(BM_BoxMean)->Arg(1)->Arg(4)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_GuidedFilter(benchmark::State& state) {
  const int r = static_cast<int>(state.range(0));
  const Image& img = texture512();
  for (auto _ : state) benchmark::DoNotOptimize(guided_filter(img, img, r, 0.005));
  state.SetItemsProcessed(state.iterations() * 512 * 512);
}
BENCHMARK(BM_GuidedFilter)->Arg(2)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_WeightedGuidedFilter(benchmark::State& state) {
  const Image& img = texture512();
  for (auto _ : state) benchmark::DoNotOptimize(weighted_guided_filter(img, img, 16, 0.005));
}
BENCHMARK(BM_WeightedGuidedFilter)->Unit(benchmark::kMillisecond);

void BM_BlurImage(benchmark::State& state) {
  const double sigma = static_cast<double>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(blur_image(texture512(), sigma));
}
BENCHMARK(BM_BlurImage)->Arg(1)->Arg(10)->Unit(benchmark::kMillisecond);

}  // namespace
