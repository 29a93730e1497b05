#include <benchmark/benchmark.h>

#include <random>

#include "uwie/metrics.hpp"
#include "uwie/network.hpp"
#include "uwie/training.hpp"

namespace {

using namespace uwie;

Image random_image(int h, int w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  Image img(h, w, 3);
  for (auto& v : img.data()) v = u(rng);
  return img;
}

void BM_Forward(benchmark::State& state) {
  const auto side = static_cast<int>(state.range(0));
  const auto img = random_image(side, side, 1);
  const auto params = init_params(1);
  for (auto _ : state) benchmark::DoNotOptimize(forward(img, params).enhanced);
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Forward)->Arg(64)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_TrainingStep(benchmark::State& state) {
  const auto side = static_cast<int>(state.range(0));
  const auto input = random_image(side, side, 2);
  const auto target = random_image(side, side, 3);
  auto params = init_params(2);
  AdamState<float> adam;
  TrainConfig cfg;
  for (auto _ : state) {
    const auto fwd = forward(input, params);
    const auto loss = mse_loss(fwd.enhanced, target);
    adam_step(params, backward(fwd.cache, loss.grad, params), adam, cfg);
  }
}
BENCHMARK(BM_TrainingStep)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_Conv3x3(benchmark::State& state) {
  const auto dilation = static_cast<int>(state.range(0));
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  Tensor<float> in(128, 128, 8);
  for (auto& v : in.data()) v = u(rng);
  ConvKernel<float> k(3, 8, 8, dilation);
  for (auto& w : k.weights) w = u(rng);
  for (auto _ : state) benchmark::DoNotOptimize(conv2d(in, k));
}
BENCHMARK(BM_Conv3x3)->Arg(1)->Arg(2)->Arg(5)->Unit(benchmark::kMicrosecond);

void BM_Ssim(benchmark::State& state) {
  const auto a = random_image(256, 256, 5);
  const auto b = random_image(256, 256, 6);
  for (auto _ : state) benchmark::DoNotOptimize(ssim(a, b));
}
BENCHMARK(BM_Ssim)->Unit(benchmark::kMillisecond);

void BM_Uciqe(benchmark::State& state) {
  const auto a = random_image(256, 256, 7);
  for (auto _ : state) benchmark::DoNotOptimize(uciqe(a));
}
BENCHMARK(BM_Uciqe)->Unit(benchmark::kMillisecond);

void BM_Uiqm(benchmark::State& state) {
  const auto a = random_image(256, 256, 8);
  for (auto _ : state) benchmark::DoNotOptimize(uiqm(a));
}
BENCHMARK(BM_Uiqm)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
