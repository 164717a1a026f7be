#include <benchmark/benchmark.h>

#include "maculab/model.hpp"

namespace {

using namespace maculab;

ImageTensor random_image(int size, uint64_t seed) {
  ImageTensor img(size, size);
  Rng rng(seed);
  for (auto& v : img.values) v = static_cast<float>(rng.uniform());
  return img;
}

void BM_ForwardEval(benchmark::State& state) {
  NetworkConfig cfg;
  cfg.input_size = static_cast<int>(state.range(0));
  const NetParams<float> params = init_params<float>(cfg, 1);
  const ImageTensor img = random_image(cfg.input_size, 2);
  for (auto _ : state) benchmark::DoNotOptimize(predict(cfg, params, img));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_ForwardEval)->Arg(64)->Arg(128);

void BM_TrainStep(benchmark::State& state) {
  NetworkConfig cfg;
  cfg.input_size = 64;
  NetParams<float> params = init_params<float>(cfg, 1);
  AdamState<float> adam = make_adam_state(params);
  TrainConfig tc;

  const int batch = static_cast<int>(state.range(0));
  std::vector<ImageTensor> images;
  std::vector<HeadLabels> labels(static_cast<size_t>(batch));
  for (int i = 0; i < batch; ++i) {
    images.push_back(random_image(64, static_cast<uint64_t>(i)));
    labels[static_cast<size_t>(i)].cidme = static_cast<float>(i % 2);
  }
  std::vector<const ImageTensor*> ptrs;
  for (const auto& img : images) ptrs.push_back(&img);

  long step = 0;
  for (auto _ : state) {
    const LossAndGrads<float> lg =
        loss_and_gradients(cfg, params, ptrs, labels, tc.weight_decay, 7, /*n_threads=*/0);
    adam_step(params, lg.grads, adam, tc, ++step);
    benchmark::DoNotOptimize(params.head_b.data());
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_TrainStep)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond);

}  // namespace
