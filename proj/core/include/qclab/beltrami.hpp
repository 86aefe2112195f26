#pragma once

#include <complex>
#include <vector>

#include "qclab/grid.hpp"
#include "qclab/transforms.hpp"

namespace qclab {

/// Coefficients of the general equation f_zbar = mu*f_z + nu*conj(f_z).
///
/// Ellipticity demands sup(|mu| + |nu|) = k < 1; the associated distortion
/// bound is K = (1+k)/(1-k). Construction validates the bound once, so a
/// live instance always satisfies it.
class BeltramiCoefficients {
 public:
  /// Validates and computes k. Throws EllipticityError if k >= 1 or any
  /// entry is non-finite, ConfigError on grid mismatch.
  static BeltramiCoefficients make(ComplexField mu, ComplexField nu);

  const ComplexField& mu() const { return mu_; }
  const ComplexField& nu() const { return nu_; }
  const GridSpec& spec() const { return mu_.spec(); }
  double k() const { return k_; }
  double distortion() const { return (1.0 + k_) / (1.0 - k_); }

 private:
  BeltramiCoefficients(ComplexField mu, ComplexField nu, double k)
      : mu_(std::move(mu)), nu_(std::move(nu)), k_(k) {}
  ComplexField mu_;
  ComplexField nu_;
  double k_ = 0.0;
};

/// Coefficient of the reduced equation f_zbar = lambda * Im(f_z), split as
/// lambda = alpha + i*beta with sup|lambda| = k_prime < 1.
class ReducedCoefficient {
 public:
  /// Throws EllipticityError if sup|lambda| >= 1 or non-finite.
  static ReducedCoefficient make(ComplexField lambda);

  const ComplexField& lambda() const { return lambda_; }
  const GridSpec& spec() const { return lambda_.spec(); }
  double k_prime() const { return k_prime_; }

  RealField alpha() const;  // pointwise real part
  RealField beta() const;   // pointwise imaginary part

 private:
  ReducedCoefficient(ComplexField lambda, double k_prime)
      : lambda_(std::move(lambda)), k_prime_(k_prime) {}
  ComplexField lambda_;
  double k_prime_ = 0.0;
};

/// Rewrites the reduced equation in general form using
/// Im(f_z) = (f_z - conj(f_z))/(2i): mu = -i*lambda/2, nu = +i*lambda/2,
/// so |mu| + |nu| = |lambda| pointwise and k = k_prime.
BeltramiCoefficients reduced_to_general(const ReducedCoefficient& lambda);

/// A grid mapping f(z) = a*z + b*conj(z) + g(z) with periodic displacement g.
///
/// The affine part carries what a periodic field cannot: the mean values of
/// f_z and f_zbar. Solver outputs have a = seed and b = mean(f_zbar); exact
/// affine maps have g = 0. Derivative fields are cached at construction
/// (f_z = a + d_z g, f_zbar = b + d_zbar g), so downstream consumers never
/// re-differentiate.
class QCSolution {
 public:
  QCSolution() = default;

  /// f(z) = a*z + b*conj(z); g = 0, f_z = a, f_zbar = b.
  static QCSolution affine(const GridSpec& spec, std::complex<double> a,
                           std::complex<double> b);

  /// Wraps explicitly supplied samples (values and Wirtinger derivatives).
  /// No periodicity is assumed: the values are stored verbatim (a = b = 0),
  /// so spectral re-differentiation of such an object is not meaningful.
  static QCSolution from_fields(ComplexField values, ComplexField fz,
                                ComplexField fzbar);

  const GridSpec& spec() const { return fz_.spec(); }
  std::complex<double> a() const { return a_; }
  std::complex<double> b() const { return b_; }
  const ComplexField& displacement() const { return displacement_; }
  const ComplexField& fz() const { return fz_; }
  const ComplexField& fzbar() const { return fzbar_; }

  /// Samples of f itself: a*z + b*conj(z) + g at the grid nodes.
  ComplexField values() const;

  /// Jacobian J(z, f) = |f_z|^2 - |f_zbar|^2 pointwise.
  RealField jacobian() const;

  /// Real-linear combination r*this + s*other (family arithmetic).
  QCSolution combine(double r, const QCSolution& other, double s) const;

  /// Solver diagnostics (empty/zero for affine and wrapped instances).
  int iterations() const { return iterations_; }
  double residual() const { return residual_; }
  const std::vector<double>& step_norms() const { return step_norms_; }

 private:
  friend QCSolution solve_principal(const BeltramiCoefficients&,
                                    const struct SolveOptions&);
  std::complex<double> a_{0.0, 0.0};
  std::complex<double> b_{0.0, 0.0};
  ComplexField displacement_;
  ComplexField fz_;
  ComplexField fzbar_;
  int iterations_ = 0;
  double residual_ = 0.0;
  std::vector<double> step_norms_;
};

struct SolveOptions {
  double tol = 1e-12;  // relative L2 residual target
  int max_iter = 400;
  std::complex<double> seed{1.0, 0.0};  // affine z-coefficient of the ansatz
  bool dealias = false;                 // 2/3-rule truncation of the product
};

/// Principal-type solution of f_zbar = mu*f_z + nu*conf(f_z) by contraction.
///
/// Ansatz: f = seed*z + b*conj(z) + g with g periodic and mean-zero. Writing
/// w = f_zbar, the equation becomes the fixed point
///     w  <-  mu*(seed + S w) + nu*conj(seed + S w),
/// which contracts in L2 with ratio k because the Beurling operator S is an
/// isometry off the mean mode. On convergence b = mean(w) and g = cauchy(w).
/// Throws ConvergenceError when max_iter is exhausted.
QCSolution solve_principal(const BeltramiCoefficients& coeffs,
                           const SolveOptions& opts = {});

/// reduced_to_general + solve_principal. The postcondition additionally
/// bounds the reduced-form residual (same fixed point, rewritten).
QCSolution solve_reduced(const ReducedCoefficient& lambda,
                         const SolveOptions& opts = {});

/// Relative L2 residuals ||f_zbar - rhs||_2 / ||f_z||_2 of the two equation
/// forms. Throw ConfigError if f and the coefficients disagree on the grid.
double residual_general(const QCSolution& f, const BeltramiCoefficients& c);
double residual_reduced(const QCSolution& f, const ReducedCoefficient& c);

/// Pointwise gradient components of Re(f) or Im(f), assembled from the
/// cached Wirtinger derivatives: f_x = f_z + f_zbar, f_y = i*(f_z - f_zbar).
struct Gradient {
  RealField x;
  RealField y;
};
Gradient real_gradient(const QCSolution& f);  // (u_x, u_y), u = Re f
Gradient imag_gradient(const QCSolution& f);  // (v_x, v_y), v = Im f

/// Fractions of samples on which a field is positive/negative/negligible,
/// with "negligible" meaning |value| <= band = band_rel * sup|field|.
struct SignStatistics {
  double positive_fraction = 0.0;
  double negative_fraction = 0.0;
  double zero_fraction = 0.0;
  double band = 0.0;
};
SignStatistics sign_statistics(const RealField& field, double band_rel);

/// Component relations tying the reduced equation to its real PDE: writing
/// lambda = alpha + i*beta and f = u + iv,
///     2*Im(f_z) = (2/(beta+1)) * v_x = (2/(beta-1)) * u_y
/// pointwise. Residuals are relative to ||f_z||_2, so for a solve at
/// tolerance tol both stay below 2*tol/(1 - k_prime).
struct ComponentRelations {
  double vx_residual = 0.0;  // ||2 Im(f_z) - 2 v_x/(beta+1)|| / ||f_z||
  double uy_residual = 0.0;  // ||2 Im(f_z) - 2 u_y/(beta-1)|| / ||f_z||
  SignStatistics uy_signs;
  RealField u_y;
  RealField v_x;
};
ComponentRelations component_relations(const QCSolution& f,
                                       const ReducedCoefficient& lambda);

}  // namespace qclab
