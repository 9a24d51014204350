// Serial vs OpenMP bit-parallel simulation on the larger ISCAS-85 netlists.
// Run with OMP_NUM_THREADS set to compare thread counts.
#include <benchmark/benchmark.h>

#include <random>
#include <string>
#include <vector>

#include "htrl/circuit.hpp"
#include "htrl/simulate.hpp"

namespace {

const htrl::Circuit& circuit_for(int index) {
  static const std::vector<htrl::Circuit> circuits = [] {
    std::vector<htrl::Circuit> v;
    for (const char* name : {"c880", "c3540", "c6288"}) {
      v.push_back(htrl::load_circuit(std::string(HTRL_DATA_DIR) + "/iscas85/" + name + ".bench"));
    }
    return v;
  }();
  return circuits.at(static_cast<std::size_t>(index));
}

template <bool Parallel>
void BM_simulate(benchmark::State& state) {
  const htrl::Circuit& c = circuit_for(static_cast<int>(state.range(0)));
  const auto words = static_cast<std::size_t>(state.range(1));
  std::mt19937_64 rng(7);
  const htrl::PatternBlock block = htrl::PatternBlock::random(c.primary_inputs().size(), words, rng);
  std::vector<std::uint64_t> out(c.net_count() * words);
  for (auto _ : state) {
    if constexpr (Parallel) {
      htrl::kernels::simulate_words_parallel(c, block, out);
    } else {
      htrl::kernels::simulate_words_serial(c, block, out);
    }
    benchmark::DoNotOptimize(out.data());
    benchmark::ClobberMemory();
  }
  state.SetLabel(c.name());
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * block.patterns()));
}

void args(benchmark::internal::Benchmark* b) {
  for (int circuit : {0, 1, 2}) {
    for (int words : {64, 1024}) b->Args({circuit, words});
  }
}

BENCHMARK(BM_simulate<false>)->Name("simulate_serial")->Apply(args)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_simulate<true>)->Name("simulate_openmp")->Apply(args)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
