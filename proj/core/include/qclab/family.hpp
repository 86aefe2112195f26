#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "qclab/beltrami.hpp"
#include "qclab/grid.hpp"

namespace qclab {

/// Pointwise pairing J(phi, psi) = Im(phi_z * conj(psi_z)).
///
/// Computed as Im(p)Re(q) - Re(p)Im(q), so the result is exactly real and
/// exactly antisymmetric under swapping the arguments. For an R-linearly
/// independent pair of solutions of one equation this field is expected to
/// be nonzero almost everywhere; for a dependent pair it vanishes
/// identically.
RealField jacobian_pairing(const QCSolution& phi, const QCSolution& psi);

enum class SignVerdict { AllNegative, AllPositive, Mixed, Degenerate };

const char* to_string(SignVerdict v);

/// Monte Carlo scan of Lambda(z, w) = Im((phi(z)-phi(w))/(psi(z)-psi(w)))
/// over random off-diagonal node pairs. A genuine two-generator family has
/// single-signed Lambda; a mixed verdict exposes a pair whose combinations
/// cannot all be injective.
struct LambdaSignReport {
  double min = 0.0;
  double max = 0.0;
  SignVerdict verdict = SignVerdict::Degenerate;
  std::size_t samples = 0;
  std::size_t resamples = 0;  // redraws due to coincident psi values
  double band = 0.0;          // |Lambda| <= band counts as zero
};
LambdaSignReport lambda_sign_field(const QCSolution& phi,
                                   const QCSolution& psi, std::size_t samples,
                                   std::uint64_t seed);

/// Least-squares detection of real-linear dependence: minimizes
/// ||a*phi + b*psi||_2 over a^2 + b^2 = 1. The direction comes from the 2x2
/// Gram matrix of the value fields; the attained minimum is then measured
/// directly in sample space (the Gram eigenvalue alone cannot resolve below
/// sqrt(machine-eps) times the field norm). Returns the minimizing (a, b)
/// when that minimum is below eps_dep * (||phi||_2 + ||psi||_2).
std::optional<std::array<double, 2>> degenerate_pair_detect(
    const QCSolution& phi, const QCSolution& psi, double eps_dep = 1e-9);

/// Two solutions of one equation, with their pairing field.
///
/// make() re-verifies that both members actually satisfy the equation
/// (residual_general <= residual_tol) before accepting the pair.
struct LinearFamilyPair {
  QCSolution phi;
  QCSolution psi;
  BeltramiCoefficients coeffs;
  RealField pairing;

  static LinearFamilyPair make(QCSolution phi, QCSolution psi,
                               BeltramiCoefficients coeffs,
                               double residual_tol);
};

/// Stoilow-type factorization psi = f o phi computed without inverting phi:
/// at each node the chain rule gives the 2x2 system
///     psi_z    = p * phi_z    + q * conj(phi_zbar)
///     psi_zbar = p * phi_zbar + q * conj(phi_z)
/// with determinant J(z, phi), solved per sample for p = f_w o phi and
/// q = f_wbar o phi. Samples with J below floor_rel * median(J) are masked
/// (reported, never extrapolated). The factor f solves a reduced equation
/// whose coefficient pulls back to
///     lambda_w o phi = -2i*nu / (1 + |nu|^2 - |mu|^2),
/// with sup|lambda_w| <= 2k/(1+k^2) < 1.
struct Factorization {
  ComplexField f_w;       // p, zero on masked samples
  ComplexField f_wbar;    // q, zero on masked samples
  ComplexField lambda_w;  // coefficient pullback (defined on all samples)
  RealField jacobian;     // J(z, phi)
  std::vector<std::uint8_t> valid;  // 1 where unmasked
  double masked_fraction = 0.0;
  double j_floor = 0.0;
  double lambda_sup = 0.0;     // sup |lambda_w|
  double k_prime_bound = 0.0;  // 2k/(1+k^2)
};

/// Throws DegeneracyError if more than mask_limit of the samples fall under
/// the Jacobian floor (floor_rel relative to the median of J).
Factorization factorize(const LinearFamilyPair& pair,
                        double floor_rel = 1e-12, double mask_limit = 0.01);

/// Residual of the pullback identity
///     J(z,phi) * Im(f_w o phi) = (-1 + |mu|^2 - |nu|^2) * J(phi,psi)
/// over unmasked samples (relative L2, normalized by the larger side), plus
/// sign statistics of Im(f_w o phi), expected nonnegative for a family
/// oriented with all-negative Lambda.
struct ChainRuleReport {
  double residual = 0.0;
  SignStatistics im_fw_signs;
};
ChainRuleReport chain_rule_identity_residual(const LinearFamilyPair& pair,
                                             const Factorization& fact);
ChainRuleReport chain_rule_identity_residual(const LinearFamilyPair& pair);

}  // namespace qclab
