#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <vector>

#include "qclab/beltrami.hpp"
#include "qclab/grid.hpp"

namespace qclab {

/// Coefficients of the divergence-form equation div(A grad u) = 0 satisfied
/// by u = Re(f) when f solves the reduced equation with lambda = alpha +
/// i*beta:
///     a12 = 2*alpha / (1 - beta),   a22 = (1 + beta) / (1 - beta),
/// A = [[1, a12], [0, a22]]. The quadratic form is carried by the symmetric
/// matrix sigma = [[1, a12/2], [a12/2, a22]]; symmetry is structural (only
/// the three distinct entries exist, and sigma11 is identically 1).
/// K_ell bounds the form: 1/K_ell <= <sigma xi, xi> <= K_ell for unit xi.
struct EllipticCoefficients {
  RealField a12;
  RealField a22;
  double K_ell = 1.0;

  double sigma11() const { return 1.0; }
  double sigma12(int ix, int iy) const { return 0.5 * a12(ix, iy); }
  double sigma22(int ix, int iy) const { return a22(ix, iy); }
  const GridSpec& spec() const { return a12.spec(); }
};

/// Pointwise evaluation of the coefficient formulas, plus the eigenvalue
/// scan that produces K_ell. det(sigma) = (1 - |lambda|^2)/(1 - beta)^2 > 0
/// under the ellipticity precondition, so the form is uniformly positive.
EllipticCoefficients coefficients_from_lambda(const ReducedCoefficient& red);

/// Compactly supported smooth test function: polynomial times the cutoff
///     c(s) = exp(1 - 1/(1 - s)),  s = |z - center|^2 / radius^2  (< 1),
/// extended by zero outside. All first and second derivatives are evaluated
/// analytically (never by finite differences), so weak-form quadratures put
/// the entire discretization burden on the solution factor.
struct TestBump {
  std::complex<double> center{0.0, 0.0};
  double radius = 1.0;
  // P(X, Y) = p[0] + p[1] X + p[2] Y + p[3] X^2 + p[4] XY + p[5] Y^2 with
  // X = (x - cx)/radius, Y = (y - cy)/radius.
  std::array<double, 6> poly{1.0, 0.0, 0.0, 0.0, 0.0, 0.0};

  struct Jet {
    double value = 0.0;
    double dx = 0.0, dy = 0.0;
    double dxx = 0.0, dxy = 0.0, dyy = 0.0;
  };
  Jet eval(double x, double y) const;

  /// Throws DomainError if the support leaves the cell.
  void validate(const GridSpec& spec) const;

  /// Five canonical bumps plus `randomized` seeded ones, all with support
  /// strictly inside the cell.
  static std::vector<TestBump> battery(const GridSpec& spec, int randomized,
                                       std::uint64_t seed);
};

/// max over bumps of |integral| / (scale of the two factors); per-bump
/// values retained for reporting. All integrals are plain cell sums, which
/// are spectrally accurate for these compactly supported smooth integrands.
struct WeakFormReport {
  double max_residual = 0.0;
  std::vector<double> per_bump;
};

/// Divergence-form identity, Eq-level: integral of
///     phi_x (u_x + a12 u_y) + phi_y a22 u_y
/// normalized by ||grad phi||_2 ||grad u||_2 per bump.
WeakFormReport weak_divergence_residual(const Gradient& grad_u,
                                        const EllipticCoefficients& coeffs,
                                        const std::vector<TestBump>& bumps,
                                        int threads = 1);

/// Adjoint (non-divergence) identity: integral of w * L(phi) with
/// L(phi) = phi_xx + a12 phi_xy + a22 phi_yy, normalized by
/// ||w||_2 ||L phi||_2 per bump.
WeakFormReport adjoint_residual(const RealField& w,
                                const EllipticCoefficients& coeffs,
                                const std::vector<TestBump>& bumps,
                                int threads = 1);

/// The replace-phi-by-phi_y derivation, checked as stated: for each bump,
///     integral grad(phi_y) . A grad(u)  ==  integral u_y * L(phi)
/// up to quadrature error, for arbitrary u (not only solutions). Returns
/// max over bumps of |LHS - RHS| / (||grad phi_y||_2 ||grad u||_2).
WeakFormReport bridging_residual(const Gradient& grad_u,
                                 const EllipticCoefficients& coeffs,
                                 const std::vector<TestBump>& bumps,
                                 int threads = 1);

/// A disk of the reverse-Hoelder battery; rung_h is the radius in units of
/// the lattice spacing. Centers sit on lattice nodes: for radii that are
/// integer multiples of h this makes the sample count deterministic and
/// slightly *under* pi r^2/h^2 (Gauss circle deficit), which keeps the
/// discrete Cauchy-Schwarz floor 1/sqrt(pi) intact for every field.
struct Disk {
  std::complex<double> center{0.0, 0.0};
  double r = 0.0;
  int rung_h = 0;
};

/// Seeded battery: for each ladder rung, `centers` lattice-snapped centers
/// with D(center, 2r) inside the cell. Rungs whose doubled disk cannot fit
/// anywhere collapse to the single centered disk when that one fits, and
/// are dropped otherwise.
std::vector<Disk> disk_battery(const GridSpec& spec,
                               const std::vector<int>& ladder_h, int centers,
                               std::uint64_t seed);

/// Reverse-Hoelder scan of a nonnegative field w over a disk battery:
/// ratio = disk_l2(w) / disk_mean(w) per disk, c0_empirical = max ratio.
/// Negative excursions of w are clipped to zero for the scan and reported;
/// disks whose mean falls below a floor are skipped, never divided.
struct ReverseHolderReport {
  struct Entry {
    Disk disk;
    double mean = 0.0;
    double l2 = 0.0;
    double ratio = 0.0;
    bool skipped = false;
  };
  std::vector<Entry> entries;
  double c0_empirical = 0.0;
  double clipped_negative_fraction = 0.0;
  double max_negative_excursion_rel = 0.0;  // |most negative| / sup|w|
  std::size_t skipped_count = 0;
  double mean_floor = 0.0;
};
ReverseHolderReport reverse_holder_scan(const RealField& w,
                                        const std::vector<Disk>& disks,
                                        int threads = 1);

/// For each threshold tau, the fraction of samples with |field| < tau.
std::vector<double> zero_measure_estimate(const RealField& field,
                                          const std::vector<double>& taus);

}  // namespace qclab
