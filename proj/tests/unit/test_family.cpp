#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <optional>

#include "qclab/beltrami.hpp"
#include "qclab/errors.hpp"
#include "qclab/family.hpp"
#include "qclab/grid.hpp"
#include "test_support.hpp"

using namespace qclab;

namespace {

constexpr std::complex<double> kI{0.0, 1.0};

ComplexField constant(const GridSpec& spec, std::complex<double> value) {
  ComplexField f(spec);
  for (auto& v : f) v = value;
  return f;
}

BeltramiCoefficients trivial_coeffs(const GridSpec& spec) {
  return BeltramiCoefficients::make(constant(spec, {0.0, 0.0}),
                                    constant(spec, {0.0, 0.0}));
}

/// Psi = z^2 wrapped with its exact derivatives; solves mu = nu = 0.
QCSolution square_map(const GridSpec& spec) {
  const ComplexField z = coordinate_field(spec);
  ComplexField values(spec), fz(spec), fzbar(spec);
  for (std::size_t i = 0; i < z.size(); ++i) {
    values.data()[i] = z.data()[i] * z.data()[i];
    fz.data()[i] = 2.0 * z.data()[i];
  }
  return QCSolution::from_fields(std::move(values), std::move(fz),
                                 std::move(fzbar));
}

}  // namespace

TEST_CASE("the pairing is exactly real-antisymmetric") {
  const GridSpec spec{32, kTwoPi};
  const QCSolution phi = QCSolution::affine(spec, {1.0, 0.2}, {0.1, -0.3});
  const QCSolution psi = QCSolution::affine(spec, {0.4, 1.0}, {-0.2, 0.1});
  const RealField ab = jacobian_pairing(phi, psi);
  const RealField ba = jacobian_pairing(psi, phi);
  for (std::size_t i = 0; i < ab.size(); ++i) {
    CHECK(ab.data()[i] == -ba.data()[i]);  // bitwise, not approximate
  }
}

TEST_CASE("the canonical pair (z, iz) has pairing identically -1") {
  const GridSpec spec{32, kTwoPi};
  const QCSolution phi = QCSolution::affine(spec, {1.0, 0.0}, {0.0, 0.0});
  const QCSolution psi = QCSolution::affine(spec, {0.0, 1.0}, {0.0, 0.0});
  const RealField j = jacobian_pairing(phi, psi);
  for (std::size_t i = 0; i < j.size(); ++i) CHECK(j.data()[i] == -1.0);
}

TEST_CASE("the pairing is bilinear over the reals") {
  const GridSpec spec{32, kTwoPi};
  const QCSolution phi = QCSolution::affine(spec, {1.0, 0.0}, {0.2, 0.0});
  const QCSolution p1 = QCSolution::affine(spec, {0.0, 1.0}, {0.0, 0.3});
  const QCSolution p2 = QCSolution::affine(spec, {0.5, -0.2}, {0.1, 0.0});
  const double r = 1.7, s = -0.6;
  const RealField lhs = jacobian_pairing(phi, p1.combine(r, p2, s));
  const RealField j1 = jacobian_pairing(phi, p1);
  const RealField j2 = jacobian_pairing(phi, p2);
  for (std::size_t i = 0; i < lhs.size(); ++i) {
    CHECK(lhs.data()[i] ==
          doctest::Approx(r * j1.data()[i] + s * j2.data()[i])
              .epsilon(1e-12));
  }
}

TEST_CASE("dependence detection finds the minimizing direction") {
  const GridSpec spec{32, kTwoPi};
  const QCSolution phi = QCSolution::affine(spec, {1.0, 0.0}, {0.25, 0.0});
  // Psi = -3 Phi: the unit minimizer of ||a phi + b psi|| is (3, 1)/sqrt(10).
  const QCSolution psi = phi.combine(-3.0, phi, 0.0);
  const auto dep = degenerate_pair_detect(phi, psi);
  REQUIRE(dep.has_value());
  CHECK((*dep)[0] == doctest::Approx(3.0 / std::sqrt(10.0)).epsilon(1e-9));
  CHECK((*dep)[1] == doctest::Approx(1.0 / std::sqrt(10.0)).epsilon(1e-9));

  const QCSolution indep = QCSolution::affine(spec, {0.0, 1.0}, {0.0, 0.0});
  CHECK(!degenerate_pair_detect(phi, indep).has_value());
}

TEST_CASE("dependence detection honors its threshold") {
  const GridSpec spec{32, kTwoPi};
  const QCSolution phi = QCSolution::affine(spec, {1.0, 0.0}, {0.0, 0.0});
  const QCSolution nudge = QCSolution::affine(spec, {0.0, 1e-6}, {0.0, 0.0});
  const QCSolution nearly = phi.combine(2.0, nudge, 1.0);  // 2 phi + tiny
  CHECK(!degenerate_pair_detect(phi, nearly, 1e-9).has_value());
  CHECK(degenerate_pair_detect(phi, nearly, 1e-3).has_value());
}

TEST_CASE("Lambda sampling classifies the canonical verdicts") {
  const GridSpec spec{32, kTwoPi};
  const QCSolution z_map = QCSolution::affine(spec, {1.0, 0.0}, {0.0, 0.0});
  const std::size_t samples = 20000;
  const std::uint64_t seed = 99;

  SUBCASE("(z, iz) is all-negative with Lambda = -1") {
    const QCSolution psi = QCSolution::affine(spec, {0.0, 1.0}, {0.0, 0.0});
    const LambdaSignReport rep = lambda_sign_field(z_map, psi, samples, seed);
    CHECK(rep.verdict == SignVerdict::AllNegative);
    CHECK(rep.min == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(rep.max == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(rep.samples == samples);
  }

  SUBCASE("(z, -iz) is all-positive") {
    const QCSolution psi = QCSolution::affine(spec, {0.0, -1.0}, {0.0, 0.0});
    const LambdaSignReport rep = lambda_sign_field(z_map, psi, samples, seed);
    CHECK(rep.verdict == SignVerdict::AllPositive);
  }

  SUBCASE("(z, z^2) is mixed on a cell straddling the imaginary axis") {
    const LambdaSignReport rep =
        lambda_sign_field(z_map, square_map(spec), samples, seed);
    CHECK(rep.verdict == SignVerdict::Mixed);
    CHECK(rep.min < 0.0);
    CHECK(rep.max > 0.0);
  }

  SUBCASE("(z, 2z) is degenerate, not a round-off verdict") {
    // Lambda is identically zero up to quotient round-off; the band must
    // sit above that noise or the verdict would flicker.
    const QCSolution psi = z_map.combine(2.0, z_map, 0.0);
    const LambdaSignReport rep = lambda_sign_field(z_map, psi, samples, seed);
    CHECK(rep.verdict == SignVerdict::Degenerate);
    CHECK(std::abs(rep.min) <= rep.band);
    CHECK(std::abs(rep.max) <= rep.band);
    CHECK(rep.band > 0.0);
  }

  SUBCASE("the scan is deterministic in the seed") {
    const QCSolution psi = QCSolution::affine(spec, {0.0, 1.0}, {0.0, 0.0});
    const LambdaSignReport a = lambda_sign_field(z_map, psi, samples, seed);
    const LambdaSignReport b = lambda_sign_field(z_map, psi, samples, seed);
    CHECK(a.min == b.min);
    CHECK(a.max == b.max);
    CHECK(a.resamples == b.resamples);
  }
}

TEST_CASE("coincident map values exhaust the resample budget") {
  const GridSpec spec{16, kTwoPi};
  const QCSolution phi = QCSolution::affine(spec, {1.0, 0.0}, {0.0, 0.0});
  const QCSolution flat = QCSolution::from_fields(
      constant(spec, {5.0, 0.0}), constant(spec, {0.0, 0.0}),
      constant(spec, {0.0, 0.0}));
  CHECK_THROWS_AS(lambda_sign_field(phi, flat, 100, 1), SamplingError);
}

TEST_CASE("family construction re-verifies both members") {
  const GridSpec spec{32, kTwoPi};
  const BeltramiCoefficients coeffs = trivial_coeffs(spec);
  const QCSolution phi = QCSolution::affine(spec, {1.0, 0.0}, {0.0, 0.0});
  const QCSolution psi = QCSolution::affine(spec, {0.0, 1.0}, {0.0, 0.0});
  CHECK_NOTHROW(LinearFamilyPair::make(phi, psi, coeffs, 1e-12));

  // conj(z) has f_zbar = 1 and f_z = 0: no orientation-preserving equation
  // with these coefficients admits it, and the residual gate must say so.
  const QCSolution mirror = QCSolution::affine(spec, {0.0, 0.0}, {1.0, 0.0});
  CHECK_THROWS_AS(LinearFamilyPair::make(phi, mirror, coeffs, 1e-12),
                  ConfigError);
}

TEST_CASE("factorization of a constant-coefficient family is exact") {
  // mu = 0, nu = 0.4i: lambda_w = -2i nu / (1 + |nu|^2 - |mu|^2) = 0.8/1.16,
  // which also saturates the bound 2k/(1 + k^2).
  const GridSpec spec{32, kTwoPi};
  const std::complex<double> nu{0.0, 0.4};
  const BeltramiCoefficients coeffs =
      BeltramiCoefficients::make(constant(spec, {0.0, 0.0}),
                                 constant(spec, nu));
  SolveOptions opts;
  opts.tol = 1e-13;
  opts.seed = {1.0, 0.0};
  const QCSolution phi = solve_principal(coeffs, opts);
  opts.seed = {0.0, 1.0};
  const QCSolution psi = solve_principal(coeffs, opts);
  const LinearFamilyPair pair =
      LinearFamilyPair::make(phi, psi, coeffs, 1e-12);

  const Factorization fact = factorize(pair);
  const double expected = 0.8 / 1.16;
  CHECK(fact.masked_fraction == 0.0);
  CHECK(fact.lambda_sup == doctest::Approx(expected).epsilon(1e-12));
  CHECK(fact.k_prime_bound == doctest::Approx(expected).epsilon(1e-12));
  CHECK(fact.lambda_sup <= fact.k_prime_bound + 1e-9);
  for (std::size_t i = 0; i < fact.lambda_w.size(); ++i) {
    CHECK(std::abs(fact.lambda_w.data()[i] -
                   std::complex<double>{expected, 0.0}) <= 1e-12);
  }
  // J(z, phi) = 1 - |nu|^2 for the affine-exact member.
  CHECK(fact.jacobian(3, 3) == doctest::Approx(0.84).epsilon(1e-12));

  const ChainRuleReport chain = chain_rule_identity_residual(pair, fact);
  CHECK(chain.residual <= 1e-12);
  // Pairing orientation (z, iz) is all-negative, so Im(f_w o phi) >= 0.
  CHECK(chain.im_fw_signs.negative_fraction == 0.0);

  // The overload that computes its own factorization agrees.
  const ChainRuleReport again = chain_rule_identity_residual(pair);
  CHECK(again.residual == doctest::Approx(chain.residual).epsilon(1e-12));
}

TEST_CASE("near-degenerate Jacobians are masked or rejected") {
  // Build a pair whose phi has |phi_z| = 0 on 25% of the nodes (wrapped
  // fields with f_zbar = 0 pass the trivial-equation residual gate for any
  // phi_z). With the default 1% mask budget factorize must refuse; with a
  // generous budget it must mask exactly those nodes and report the
  // fraction.
  const GridSpec spec{32, kTwoPi};
  const BeltramiCoefficients coeffs = trivial_coeffs(spec);
  ComplexField fz(spec);
  std::size_t dead = 0;
  for (std::size_t i = 0; i < fz.size(); ++i) {
    if (i % 4 == 0) {
      fz.data()[i] = {0.0, 0.0};
      ++dead;
    } else {
      fz.data()[i] = {1.0, 0.0};
    }
  }
  const QCSolution phi = QCSolution::from_fields(
      coordinate_field(spec), std::move(fz), constant(spec, {0.0, 0.0}));
  const QCSolution psi = QCSolution::affine(spec, {0.0, 1.0}, {0.0, 0.0});
  const LinearFamilyPair pair =
      LinearFamilyPair::make(phi, psi, coeffs, 1e-12);

  CHECK_THROWS_AS(factorize(pair), DegeneracyError);

  const Factorization fact = factorize(pair, 1e-12, 0.5);
  CHECK(fact.masked_fraction ==
        doctest::Approx(static_cast<double>(dead) / spec.size()));
  for (std::size_t i = 0; i < fact.valid.size(); ++i) {
    CHECK(fact.valid[i] == (i % 4 == 0 ? 0 : 1));
  }
}

TEST_CASE("verdict names render for reports") {
  CHECK(std::string(to_string(SignVerdict::AllNegative)) == "all-negative");
  CHECK(std::string(to_string(SignVerdict::AllPositive)) == "all-positive");
  CHECK(std::string(to_string(SignVerdict::Mixed)) == "mixed");
  CHECK(std::string(to_string(SignVerdict::Degenerate)) == "degenerate");
}
