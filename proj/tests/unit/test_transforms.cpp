#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <vector>

#include "qclab/grid.hpp"
#include "qclab/parallel.hpp"
#include "qclab/transforms.hpp"
#include "test_support.hpp"

using namespace qclab;
using qclab::testing::random_field;

namespace {

constexpr std::complex<double> kI{0.0, 1.0};

/// Plane wave exp(i(kx x + ky y)) for integer frequencies (mx, my).
ComplexField wave(const GridSpec& spec, int mx, int my) {
  const double kx = kTwoPi / spec.side * mx;
  const double ky = kTwoPi / spec.side * my;
  ComplexField f(spec);
  for (int iy = 0; iy < spec.n; ++iy) {
    for (int ix = 0; ix < spec.n; ++ix) {
      f(ix, iy) = std::exp(kI * (kx * spec.x(ix) + ky * spec.y(iy)));
    }
  }
  return f;
}

ComplexField scaled(const ComplexField& f, std::complex<double> s) {
  ComplexField out = f;
  for (auto& v : out) v *= s;
  return out;
}

ComplexField subtract_mean(const ComplexField& f) {
  const std::complex<double> m = mean(f);
  ComplexField out = f;
  for (auto& v : out) v -= m;
  return out;
}

}  // namespace

TEST_CASE("Wirtinger derivatives act as multipliers on plane waves") {
  const GridSpec spec{64, kTwoPi};
  const auto plan = plan_for(spec);
  const struct {
    int mx, my;
  } cases[] = {{3, -5}, {0, 7}, {-16, 9}, {1, 0}};
  for (const auto& c : cases) {
    const ComplexField f = wave(spec, c.mx, c.my);
    const double kx = kTwoPi / spec.side * c.mx;
    const double ky = kTwoPi / spec.side * c.my;
    const std::complex<double> xi{kx, ky};
    // d_z multiplies by (i/2) conj(xi), d_zbar by (i/2) xi.
    CHECK(max_abs_diff(plan->d_z(f), scaled(f, 0.5 * kI * std::conj(xi))) <=
          1e-11);
    CHECK(max_abs_diff(plan->d_zbar(f), scaled(f, 0.5 * kI * xi)) <= 1e-11);
    // cauchy multiplies by -2i/xi, beurling by conj(xi)/xi.
    CHECK(max_abs_diff(plan->cauchy(f), scaled(f, -2.0 * kI / xi)) <= 1e-11);
    CHECK(max_abs_diff(plan->beurling(f), scaled(f, std::conj(xi) / xi)) <=
          1e-12);
  }
}

TEST_CASE("constant fields sit in the kernel of every operator") {
  const GridSpec spec{32, kTwoPi};
  const auto plan = plan_for(spec);
  ComplexField c(spec);
  for (auto& v : c) v = {2.5, -1.0};
  CHECK(sup_norm(plan->d_z(c)) <= 1e-14);
  CHECK(sup_norm(plan->d_zbar(c)) <= 1e-14);
  CHECK(sup_norm(plan->cauchy(c)) <= 1e-14);
  CHECK(sup_norm(plan->beurling(c)) <= 1e-14);
}

TEST_CASE("cauchy inverts d_zbar up to the mean on random data") {
  const GridSpec spec{128, kTwoPi};
  const auto plan = plan_for(spec);
  for (const std::uint64_t seed : {11ull, 12ull, 13ull}) {
    const ComplexField f = random_field(spec, seed);
    const ComplexField f0 = subtract_mean(f);
    const ComplexField g = plan->cauchy(f);
    CHECK(std::abs(mean(g)) <= 1e-12);  // mean-zero convention
    CHECK(qclab::testing::rel_l2_diff(plan->d_zbar(g), f0) <= 1e-12);
    // And the other composition order: cauchy(d_zbar(f)) = f - mean(f).
    CHECK(qclab::testing::rel_l2_diff(plan->cauchy(plan->d_zbar(f)), f0) <=
          1e-12);
  }
}

TEST_CASE("the Beurling operator is an L2 isometry off the mean mode") {
  const GridSpec spec{128, kTwoPi};
  const auto plan = plan_for(spec);
  for (const std::uint64_t seed : {21ull, 22ull, 23ull}) {
    const ComplexField f0 = subtract_mean(random_field(spec, seed));
    const ComplexField s = plan->beurling(f0);
    CHECK(std::abs(l2_norm(s) - l2_norm(f0)) / l2_norm(f0) <= 1e-12);
    // beurling = d_z o cauchy as operators, not only as symbols.
    CHECK(qclab::testing::rel_l2_diff(s, plan->d_z(plan->cauchy(f0))) <=
          1e-13);
  }
}

TEST_CASE("two-thirds truncation keeps low modes and kills high ones") {
  const GridSpec spec{128, kTwoPi};
  const auto plan = plan_for(spec);
  // 42 <= 128/3 < 43: the mode at 43 must vanish, the one at 42 must stay.
  ComplexField f = wave(spec, 3, -2);
  const ComplexField high = wave(spec, 43, 0);
  for (std::size_t i = 0; i < f.size(); ++i) f.data()[i] += high.data()[i];
  const ComplexField low = plan->lowpass_two_thirds(f);
  CHECK(max_abs_diff(low, wave(spec, 3, -2)) <= 1e-12);
  const ComplexField keep = wave(spec, 42, 17);
  CHECK(max_abs_diff(plan->lowpass_two_thirds(keep), keep) <= 1e-12);
}

TEST_CASE("conjugation symmetry holds on dealiased fields") {
  // d_z(conj f) = conj(d_zbar f) for every mode except the Nyquist pair,
  // which the lowpass removes.
  const GridSpec spec{64, kTwoPi};
  const auto plan = plan_for(spec);
  const ComplexField f = plan->lowpass_two_thirds(random_field(spec, 31));
  ComplexField conj_f = f;
  for (auto& v : conj_f) v = std::conj(v);
  const ComplexField lhs = plan->d_z(conj_f);
  ComplexField rhs = plan->d_zbar(f);
  for (auto& v : rhs) v = std::conj(v);
  CHECK(max_abs_diff(lhs, rhs) <= 1e-11);
}

TEST_CASE("plans are cached per grid and shared") {
  const GridSpec a{64, kTwoPi};
  const GridSpec b{64, 1.0};
  CHECK(plan_for(a).get() == plan_for(a).get());
  CHECK(plan_for(a).get() != plan_for(b).get());
}

TEST_CASE("a shared plan is safe to use from several threads") {
  const GridSpec spec{64, kTwoPi};
  const auto plan = plan_for(spec);
  const ComplexField f = random_field(spec, 77);
  const ComplexField serial = plan->beurling(f);
  std::vector<ComplexField> results(8);
  parallel_for(0, 8, 8, [&](int i) { results[i] = plan->beurling(f); });
  for (const auto& r : results) {
    CHECK(max_abs_diff(r, serial) == 0.0);  // bitwise: same plan, same data
  }
}
