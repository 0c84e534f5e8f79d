#include <benchmark/benchmark.h>

#include "dndx/genome.hpp"
#include "dndx/mutation.hpp"
#include "dndx/network.hpp"
#include "dndx/synthetic.hpp"

using namespace dndx;

namespace {

void BM_Validate(benchmark::State& state) {
  Genome g = minimal_genome({256, 256, 1}, 2);
  Rng rng(1);
  for (int i = 0; i < state.range(0); ++i) g = mutate(g, {}, {}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(check(g));
  state.counters["genes"] = static_cast<double>(g.genes.size());
}
BENCHMARK(BM_Validate)->Arg(0)->Arg(10)->Arg(40);

// One mutate call on a genome grown by `range(0)` prior mutations, at the
// given input side.
void BM_Mutate(benchmark::State& state) {
  const int side = static_cast<int>(state.range(1));
  Genome g = minimal_genome({side, side, 1}, 2);
  Rng grow(2);
  for (int i = 0; i < state.range(0); ++i) g = mutate(g, {}, {}, grow);
  Rng rng(3);
  for (auto _ : state) benchmark::DoNotOptimize(mutate(g, {}, {}, rng));
}
BENCHMARK(BM_Mutate)->Args({0, 256})->Args({10, 256})->Args({10, 8})->Args({20, 32});

// Full fitness evaluation (compile, train 5 epochs, score) of a small
// convolutional genome on the desk-scale synthetic task.
void BM_EvaluateFitness(benchmark::State& state) {
  const DatasetSplit data = synthetic_dataset({});
  Genome g;
  g.genes = {{0, layer::Input{32, 32, 1}},
             {1, layer::Conv{8, 5, 1, 2}},
             {2, layer::Relu{}},
             {3, layer::Pool{2, 2}},
             {4, layer::FullyConnected{2}},
             {5, layer::SoftmaxOutput{2}}};
  g.connections = {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}};
  SolverConfig cfg;
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_fitness(g, data, cfg, seed++));
}
BENCHMARK(BM_EvaluateFitness)->Unit(benchmark::kMillisecond)->Iterations(3);

}  // namespace
