#include <benchmark/benchmark.h>

#include "dndx/nn.hpp"
#include "dndx/rng.hpp"

using namespace dndx;

namespace {

Tensor random_tensor(Dims d, std::uint64_t seed) {
  Rng rng(seed);
  Tensor t(d);
  for (auto& v : t.values()) v = static_cast<float>(rng.normal());
  return t;
}

// args: spatial size, in channels, filters, kernel
void BM_ConvForward(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  const int in_c = static_cast<int>(state.range(1));
  const int filters = static_cast<int>(state.range(2));
  const int k = static_cast<int>(state.range(3));
  const Tensor x = random_tensor({32, in_c, size, size}, 1);
  const Tensor w = random_tensor({filters, in_c, k, k}, 2);
  const Tensor b = random_tensor({filters, 1, 1, 1}, 3);
  for (auto _ : state) benchmark::DoNotOptimize(nn::conv2d_forward(x, w, b, {k, 1, k / 2}));
  state.SetItemsProcessed(state.iterations() * 32);
}
BENCHMARK(BM_ConvForward)->Args({32, 1, 8, 3})->Args({32, 8, 16, 5})->Args({64, 16, 32, 3});

void BM_ConvBackward(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  const int in_c = static_cast<int>(state.range(1));
  const int filters = static_cast<int>(state.range(2));
  const int k = static_cast<int>(state.range(3));
  const Tensor x = random_tensor({32, in_c, size, size}, 1);
  const Tensor w = random_tensor({filters, in_c, k, k}, 2);
  const Tensor b = random_tensor({filters, 1, 1, 1}, 3);
  const Tensor y = nn::conv2d_forward(x, w, b, {k, 1, k / 2});
  const Tensor dy = random_tensor(y.dims(), 4);
  for (auto _ : state) benchmark::DoNotOptimize(nn::conv2d_backward(x, w, dy, {k, 1, k / 2}));
  state.SetItemsProcessed(state.iterations() * 32);
}
BENCHMARK(BM_ConvBackward)->Args({32, 1, 8, 3})->Args({32, 8, 16, 5})->Args({64, 16, 32, 3});

void BM_MaxPool(benchmark::State& state) {
  const Tensor x = random_tensor({32, 16, 64, 64}, 5);
  for (auto _ : state) benchmark::DoNotOptimize(nn::maxpool_forward(x, {2, 2}));
}
BENCHMARK(BM_MaxPool);

void BM_FullyConnected(benchmark::State& state) {
  const int inputs = static_cast<int>(state.range(0));
  const Tensor x = random_tensor({32, inputs, 1, 1}, 6);
  const Tensor w = random_tensor({64, inputs, 1, 1}, 7);
  const Tensor b = random_tensor({64, 1, 1, 1}, 8);
  for (auto _ : state) benchmark::DoNotOptimize(nn::fc_forward(x, w, b));
}
BENCHMARK(BM_FullyConnected)->Arg(1024)->Arg(16384);

}  // namespace
