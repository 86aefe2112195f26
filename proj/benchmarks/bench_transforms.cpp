// Microbenchmarks for the spectral multiplier operators: one Beurling
// application is two FFTs plus a pointwise multiply, so these numbers bound
// the per-iteration cost of the contraction solver.

#include <benchmark/benchmark.h>

#include "qclab/grid.hpp"
#include "qclab/rng.hpp"
#include "qclab/transforms.hpp"

namespace {

qclab::ComplexField random_field(const qclab::GridSpec& spec, std::uint64_t seed) {
  qclab::Rng rng(seed);
  qclab::ComplexField f(spec);
  for (auto& v : f) v = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
  return f;
}

void BM_Beurling(benchmark::State& state) {
  const qclab::GridSpec spec{static_cast<int>(state.range(0)), qclab::kTwoPi};
  const auto plan = qclab::plan_for(spec);
  const qclab::ComplexField f = random_field(spec, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(plan->beurling(f));
  }
  state.SetItemsProcessed(state.iterations() * spec.size());
}

void BM_Cauchy(benchmark::State& state) {
  const qclab::GridSpec spec{static_cast<int>(state.range(0)), qclab::kTwoPi};
  const auto plan = qclab::plan_for(spec);
  const qclab::ComplexField f = random_field(spec, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(plan->cauchy(f));
  }
  state.SetItemsProcessed(state.iterations() * spec.size());
}

void BM_DZbar(benchmark::State& state) {
  const qclab::GridSpec spec{static_cast<int>(state.range(0)), qclab::kTwoPi};
  const auto plan = qclab::plan_for(spec);
  const qclab::ComplexField f = random_field(spec, 3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(plan->d_zbar(f));
  }
  state.SetItemsProcessed(state.iterations() * spec.size());
}

}  // namespace

BENCHMARK(BM_Beurling)->Arg(128)->Arg(256)->Arg(512);
BENCHMARK(BM_Cauchy)->Arg(128)->Arg(256)->Arg(512);
BENCHMARK(BM_DZbar)->Arg(128)->Arg(256)->Arg(512);
