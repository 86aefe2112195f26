#include "qclab/family.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "qclab/errors.hpp"
#include "qclab/rng.hpp"

namespace qclab {

RealField jacobian_pairing(const QCSolution& phi, const QCSolution& psi) {
  if (!(phi.spec() == psi.spec())) {
    throw ConfigError("jacobian_pairing: grid mismatch");
  }
  RealField out(phi.spec());
  const auto* p = phi.fz().data();
  const auto* q = psi.fz().data();
  for (std::size_t i = 0; i < phi.fz().size(); ++i) {
    out.data()[i] = p[i].imag() * q[i].real() - p[i].real() * q[i].imag();
  }
  return out;
}

const char* to_string(SignVerdict v) {
  switch (v) {
    case SignVerdict::AllNegative:
      return "all-negative";
    case SignVerdict::AllPositive:
      return "all-positive";
    case SignVerdict::Mixed:
      return "mixed";
    case SignVerdict::Degenerate:
      return "degenerate";
  }
  return "unknown";
}

LambdaSignReport lambda_sign_field(const QCSolution& phi,
                                   const QCSolution& psi, std::size_t samples,
                                   std::uint64_t seed) {
  if (!(phi.spec() == psi.spec())) {
    throw ConfigError("lambda_sign_field: grid mismatch");
  }
  if (samples == 0) throw ConfigError("lambda_sign_field: samples must be > 0");
  const ComplexField phi_vals = phi.values();
  const ComplexField psi_vals = psi.values();
  const std::size_t node_count = phi_vals.size();
  const double psi_scale = sup_norm(psi_vals);
  const double coincide = 1e-13 * std::max(psi_scale, 1e-300);

  Rng rng(seed);
  LambdaSignReport report;
  report.samples = samples;
  std::vector<double> values;
  values.reserve(samples);
  double quotient_scale = 0.0;
  for (std::size_t s = 0; s < samples; ++s) {
    std::complex<double> dpsi;
    std::complex<double> dphi;
    bool found = false;
    for (int attempt = 0; attempt < 1000; ++attempt) {
      const std::size_t i = rng.index(node_count);
      const std::size_t j = rng.index(node_count);
      if (i == j) continue;
      dphi = phi_vals.data()[i] - phi_vals.data()[j];
      dpsi = psi_vals.data()[i] - psi_vals.data()[j];
      if (std::abs(dpsi) <= coincide) {
        ++report.resamples;
        continue;
      }
      found = true;
      break;
    }
    if (!found) {
      throw SamplingError(
          "lambda_sign_field: psi takes coincident values on nearly all "
          "sampled pairs");
    }
    quotient_scale = std::max(quotient_scale, std::abs(dphi / dpsi));
    values.push_back((dphi / dpsi).imag());
  }

  double lo = values[0], hi = values[0];
  for (double v : values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  report.min = lo;
  report.max = hi;
  // The zero band is relative to the size of the full quotient, not only its
  // imaginary part: for a dependent pair Lambda is exactly zero up to
  // round-off of a quotient of magnitude |dphi/dpsi|, and a band taken from
  // sup|Lambda| alone would sit below that noise.
  report.band = 1e-12 * quotient_scale;
  const bool has_pos = hi > report.band;
  const bool has_neg = lo < -report.band;
  if (has_pos && has_neg) {
    report.verdict = SignVerdict::Mixed;
  } else if (has_pos) {
    report.verdict = SignVerdict::AllPositive;
  } else if (has_neg) {
    report.verdict = SignVerdict::AllNegative;
  } else {
    report.verdict = SignVerdict::Degenerate;
  }
  return report;
}

std::optional<std::array<double, 2>> degenerate_pair_detect(
    const QCSolution& phi, const QCSolution& psi, double eps_dep) {
  if (!(phi.spec() == psi.spec())) {
    throw ConfigError("degenerate_pair_detect: grid mismatch");
  }
  const ComplexField pv = phi.values();
  const ComplexField qv = psi.values();
  // Real Gram matrix of the two value fields (cell measure included).
  double g11 = 0.0, g12 = 0.0, g22 = 0.0;
  for (std::size_t i = 0; i < pv.size(); ++i) {
    const auto a = pv.data()[i];
    const auto b = qv.data()[i];
    g11 += std::norm(a);
    g22 += std::norm(b);
    g12 += a.real() * b.real() + a.imag() * b.imag();
  }
  const double area = pv.spec().cell_area();
  g11 *= area;
  g12 *= area;
  g22 *= area;

  const double tr = g11 + g22;
  const double gap = std::sqrt((g11 - g22) * (g11 - g22) + 4.0 * g12 * g12);
  const double lam_min = 0.5 * (tr - gap);

  // Eigenvector of the smaller eigenvalue; pick the formula with the larger
  // magnitude to avoid cancellation.
  std::array<double, 2> v1{g12, lam_min - g11};
  std::array<double, 2> v2{lam_min - g22, g12};
  const double n1 = v1[0] * v1[0] + v1[1] * v1[1];
  const double n2 = v2[0] * v2[0] + v2[1] * v2[1];
  std::array<double, 2> v = n1 >= n2 ? v1 : v2;
  double norm = std::sqrt(v[0] * v[0] + v[1] * v[1]);
  if (norm == 0.0) {
    // Both fields are identically zero; any direction annihilates them.
    v = {1.0, 0.0};
    norm = 1.0;
  }
  v[0] /= norm;
  v[1] /= norm;

  // The Gram route squares the samples, so sqrt(lam_min) bottoms out near
  // sqrt(machine-eps) * ||f|| even for an exactly dependent pair. The
  // direction is well-conditioned regardless (the eigenvalue gap is of
  // order tr), so measure the achieved minimum directly in sample space,
  // where a dependent combination cancels to round-off.
  double resid2 = 0.0;
  for (std::size_t i = 0; i < pv.size(); ++i) {
    resid2 += std::norm(v[0] * pv.data()[i] + v[1] * qv.data()[i]);
  }
  const double min_norm = std::sqrt(resid2 * area);
  const double threshold = eps_dep * (std::sqrt(g11) + std::sqrt(g22));
  if (min_norm >= threshold) return std::nullopt;

  // Deterministic sign: first component nonnegative, tie-broken by second.
  if (v[0] < 0.0 || (v[0] == 0.0 && v[1] < 0.0)) {
    v[0] = -v[0];
    v[1] = -v[1];
  }
  return v;
}

LinearFamilyPair LinearFamilyPair::make(QCSolution phi, QCSolution psi,
                                        BeltramiCoefficients coeffs,
                                        double residual_tol) {
  if (!(phi.spec() == coeffs.spec()) || !(psi.spec() == coeffs.spec())) {
    throw ConfigError("LinearFamilyPair: grid mismatch");
  }
  const double r_phi = residual_general(phi, coeffs);
  const double r_psi = residual_general(psi, coeffs);
  if (r_phi > residual_tol || r_psi > residual_tol) {
    throw ConfigError(
        "LinearFamilyPair: member residuals " + std::to_string(r_phi) + ", " +
        std::to_string(r_psi) + " exceed " + std::to_string(residual_tol) +
        "; the pair does not solve the supplied equation");
  }
  RealField pairing = jacobian_pairing(phi, psi);
  return LinearFamilyPair{std::move(phi), std::move(psi), std::move(coeffs),
                          std::move(pairing)};
}

Factorization factorize(const LinearFamilyPair& pair, double floor_rel,
                        double mask_limit) {
  const GridSpec& spec = pair.phi.spec();
  Factorization out;
  out.jacobian = pair.phi.jacobian();
  out.f_w = ComplexField(spec);
  out.f_wbar = ComplexField(spec);
  out.lambda_w = ComplexField(spec);
  out.valid.assign(spec.size(), 0);
  out.k_prime_bound =
      2.0 * pair.coeffs.k() / (1.0 + pair.coeffs.k() * pair.coeffs.k());

  std::vector<double> j_sorted(out.jacobian.begin(), out.jacobian.end());
  auto mid = j_sorted.begin() + j_sorted.size() / 2;
  std::nth_element(j_sorted.begin(), mid, j_sorted.end());
  const double j_median = *mid;
  if (!(j_median > 0.0)) {
    throw DegeneracyError(
        "factorize: median Jacobian of phi is not positive; phi does not "
        "look orientation-preserving on this grid");
  }
  out.j_floor = floor_rel * j_median;

  const auto* phi_z = pair.phi.fz().data();
  const auto* phi_zb = pair.phi.fzbar().data();
  const auto* psi_z = pair.psi.fz().data();
  const auto* psi_zb = pair.psi.fzbar().data();
  const auto* mu = pair.coeffs.mu().data();
  const auto* nu = pair.coeffs.nu().data();
  std::size_t masked = 0;
  double lambda_sup = 0.0;
  for (std::size_t i = 0; i < spec.size(); ++i) {
    const std::complex<double> two_i_nu{2.0 * nu[i].imag(),
                                        -2.0 * nu[i].real()};  // -2i*nu
    const double denom = 1.0 + std::norm(nu[i]) - std::norm(mu[i]);
    out.lambda_w.data()[i] = two_i_nu / denom;
    lambda_sup = std::max(lambda_sup, std::abs(out.lambda_w.data()[i]));

    const double jac = out.jacobian.data()[i];
    if (jac <= out.j_floor) {
      ++masked;
      continue;
    }
    out.valid[i] = 1;
    // Cramer's rule; the determinant of the chain-rule system is exactly jac.
    out.f_w.data()[i] = (psi_z[i] * std::conj(phi_z[i]) -
                         std::conj(phi_zb[i]) * psi_zb[i]) /
                        jac;
    out.f_wbar.data()[i] = (phi_z[i] * psi_zb[i] - phi_zb[i] * psi_z[i]) / jac;
  }
  out.lambda_sup = lambda_sup;
  out.masked_fraction = static_cast<double>(masked) / spec.size();
  if (out.masked_fraction > mask_limit) {
    throw DegeneracyError("factorize: " +
                          std::to_string(100.0 * out.masked_fraction) +
                          "% of samples fall under the Jacobian floor");
  }
  return out;
}

ChainRuleReport chain_rule_identity_residual(const LinearFamilyPair& pair,
                                             const Factorization& fact) {
  const GridSpec& spec = pair.phi.spec();
  const auto* mu = pair.coeffs.mu().data();
  const auto* nu = pair.coeffs.nu().data();
  RealField im_fw(spec);
  double diff_sq = 0.0, lhs_sq = 0.0, rhs_sq = 0.0;
  for (std::size_t i = 0; i < spec.size(); ++i) {
    if (!fact.valid[i]) continue;
    const double lhs = fact.jacobian.data()[i] * fact.f_w.data()[i].imag();
    const double rhs = (-1.0 + std::norm(mu[i]) - std::norm(nu[i])) *
                       pair.pairing.data()[i];
    const double d = lhs - rhs;
    diff_sq += d * d;
    lhs_sq += lhs * lhs;
    rhs_sq += rhs * rhs;
    im_fw.data()[i] = fact.f_w.data()[i].imag();
  }
  ChainRuleReport report;
  const double denom = std::sqrt(std::max(lhs_sq, rhs_sq));
  report.residual =
      denom > 0.0 ? std::sqrt(diff_sq) / denom : std::sqrt(diff_sq);
  report.im_fw_signs = sign_statistics(im_fw, 1e-12);
  return report;
}

ChainRuleReport chain_rule_identity_residual(const LinearFamilyPair& pair) {
  return chain_rule_identity_residual(pair, factorize(pair));
}

}  // namespace qclab
