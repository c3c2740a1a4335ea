// Parallel kernels against their serial references.

#include "obsel/experiments.hpp"
#include "obsel/gramian.hpp"
#include "obsel/selection.hpp"
#include "support.hpp"

#include <benchmark/benchmark.h>

using namespace obsel;

namespace {

struct Setup {
  ModelSpec model = kinetics::to_model(testing::bundled_network());
  std::vector<Vector> guesses;
  IrkConfig cfg;
};

Setup make_setup(std::size_t q) {
  Setup s;
  s.guesses = sample_perturbed_guesses(testing::bundled_state(), 1.5, q, 7);
  return s;
}

void BM_AtomsParallel(benchmark::State& state) {
  const auto s = make_setup(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(averaged_gramian_collection(s.model, s.model.measurement(), s.guesses, 200, s.cfg));
  }
}

void BM_AtomsSerial(benchmark::State& state) {
  const auto s = make_setup(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        reference::averaged_gramian_collection_serial(s.model, s.model.measurement(), s.guesses, 200, s.cfg));
  }
}

void BM_GreedyParallel(benchmark::State& state) {
  const auto n_y = static_cast<std::size_t>(state.range(0));
  const auto atoms = testing::random_atoms(3, 10, n_y, 12, 3);
  for (auto _ : state) benchmark::DoNotOptimize(greedy_select(atoms, n_y / 2, Metric::logdet()));
}

void BM_GreedySerial(benchmark::State& state) {
  const auto n_y = static_cast<std::size_t>(state.range(0));
  const auto atoms = testing::random_atoms(3, 10, n_y, 12, 3);
  for (auto _ : state) benchmark::DoNotOptimize(reference::greedy_select_serial(atoms, n_y / 2, Metric::logdet()));
}

}  // namespace

BENCHMARK(BM_AtomsParallel)->Arg(10)->Arg(40)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_AtomsSerial)->Arg(10)->Arg(40)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_GreedyParallel)->Arg(16)->Arg(48)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_GreedySerial)->Arg(16)->Arg(48)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
