#include <benchmark/benchmark.h>

#include "maculab/imageops.hpp"
#include "maculab/synthgen.hpp"

namespace {

maculab::ImageTensor test_image(int size) {
  maculab::SynthConfig cfg;
  cfg.image_size = size;
  cfg.seed = 1;
  const maculab::SynthLatents lat = maculab::sample_latents(cfg, 0);
  return maculab::render_fundus(lat, cfg);
}

void BM_Augment(benchmark::State& state) {
  const maculab::ImageTensor img = test_image(static_cast<int>(state.range(0)));
  const maculab::AugmentConfig cfg;
  uint64_t seed = 0;
  for (auto _ : state) {
    maculab::Rng rng(seed++);
    benchmark::DoNotOptimize(maculab::augment(img, cfg, rng));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Augment)->Arg(64)->Arg(128)->Arg(256);

void BM_ResizeBilinear(benchmark::State& state) {
  const maculab::ImageTensor img = test_image(static_cast<int>(state.range(0)));
  for (auto _ : state)
    benchmark::DoNotOptimize(maculab::resize_bilinear(img, 64, 64));
}
BENCHMARK(BM_ResizeBilinear)->Arg(128)->Arg(256)->Arg(587);

void BM_CircularMask(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  const maculab::ImageTensor img = test_image(size);
  const maculab::Landmarks lm{size / 2.0, size / 2.0, size / 1.5, size / 2.0, size / 6.0};
  const maculab::CropSpec spec{maculab::CropCenter::fovea, 1.0};
  for (auto _ : state) benchmark::DoNotOptimize(maculab::circular_mask(img, lm, spec));
}
BENCHMARK(BM_CircularMask)->Arg(64)->Arg(256);

void BM_RenderFundus(benchmark::State& state) {
  maculab::SynthConfig cfg;
  cfg.image_size = static_cast<int>(state.range(0));
  cfg.seed = 2;
  const maculab::SynthLatents lat = maculab::sample_latents(cfg, 3);
  for (auto _ : state) benchmark::DoNotOptimize(maculab::render_fundus(lat, cfg));
}
BENCHMARK(BM_RenderFundus)->Arg(64)->Arg(128);

}  // namespace
