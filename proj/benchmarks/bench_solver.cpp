// End-to-end solver benchmarks: contraction iterations until the relative
// fixed-point step drops below tol, across grid sizes and distortion levels.

#include <benchmark/benchmark.h>

#include <complex>

#include "qclab/beltrami.hpp"
#include "qclab/family.hpp"
#include "qclab/grid.hpp"

namespace {

qclab::ReducedCoefficient constant_lambda(const qclab::GridSpec& spec,
                                          std::complex<double> value) {
  qclab::ComplexField lambda(spec);
  for (auto& v : lambda) v = value;
  return qclab::ReducedCoefficient::make(std::move(lambda));
}

void BM_SolveReduced(benchmark::State& state) {
  const qclab::GridSpec spec{static_cast<int>(state.range(0)), qclab::kTwoPi};
  const double k = static_cast<double>(state.range(1)) / 100.0;
  const auto lambda = constant_lambda(spec, {k, 0.0});
  qclab::SolveOptions opts;
  opts.tol = 1e-10;
  opts.seed = {0.0, 1.0};
  for (auto _ : state) {
    benchmark::DoNotOptimize(qclab::solve_reduced(lambda, opts));
  }
}

void BM_Pairing(benchmark::State& state) {
  const qclab::GridSpec spec{static_cast<int>(state.range(0)), qclab::kTwoPi};
  const auto lambda = constant_lambda(spec, {0.5, 0.0});
  qclab::SolveOptions opts;
  opts.tol = 1e-10;
  opts.seed = {0.0, 1.0};
  const qclab::QCSolution psi = qclab::solve_reduced(lambda, opts);
  const qclab::QCSolution phi =
      qclab::QCSolution::affine(spec, {1.0, 0.0}, {0.0, 0.0});
  for (auto _ : state) {
    benchmark::DoNotOptimize(qclab::jacobian_pairing(phi, psi));
  }
  state.SetItemsProcessed(state.iterations() * spec.size());
}

}  // namespace

BENCHMARK(BM_SolveReduced)
    ->Args({128, 50})
    ->Args({256, 50})
    ->Args({256, 80})
    ->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Pairing)->Arg(256);
