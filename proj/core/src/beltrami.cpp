#include "qclab/beltrami.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "qclab/errors.hpp"

namespace qclab {

namespace {

constexpr double kNormFloor = 1e-300;

double sup_mu_plus_nu(const ComplexField& mu, const ComplexField& nu) {
  double worst = 0.0;
  const auto* pm = mu.data();
  const auto* pn = nu.data();
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const double s = std::abs(pm[i]) + std::abs(pn[i]);
    if (!std::isfinite(s)) return s;
    worst = std::max(worst, s);
  }
  return worst;
}

}  // namespace

BeltramiCoefficients BeltramiCoefficients::make(ComplexField mu,
                                                ComplexField nu) {
  if (!(mu.spec() == nu.spec())) {
    throw ConfigError("mu and nu live on different grids");
  }
  const double k = sup_mu_plus_nu(mu, nu);
  if (!std::isfinite(k)) {
    throw EllipticityError("coefficients contain non-finite entries");
  }
  if (k >= 1.0) {
    throw EllipticityError("sup(|mu|+|nu|) = " + std::to_string(k) +
                           " violates ellipticity (must be < 1)");
  }
  return BeltramiCoefficients(std::move(mu), std::move(nu), k);
}

ReducedCoefficient ReducedCoefficient::make(ComplexField lambda) {
  double k_prime = 0.0;
  for (const auto& v : lambda) {
    const double m = std::abs(v);
    if (!std::isfinite(m)) {
      throw EllipticityError("lambda contains non-finite entries");
    }
    k_prime = std::max(k_prime, m);
  }
  if (k_prime >= 1.0) {
    throw EllipticityError("sup|lambda| = " + std::to_string(k_prime) +
                           " violates ellipticity (must be < 1)");
  }
  return ReducedCoefficient(std::move(lambda), k_prime);
}

RealField ReducedCoefficient::alpha() const {
  RealField out(spec());
  const auto* src = lambda_.data();
  for (std::size_t i = 0; i < lambda_.size(); ++i) out.data()[i] = src[i].real();
  return out;
}

RealField ReducedCoefficient::beta() const {
  RealField out(spec());
  const auto* src = lambda_.data();
  for (std::size_t i = 0; i < lambda_.size(); ++i) out.data()[i] = src[i].imag();
  return out;
}

BeltramiCoefficients reduced_to_general(const ReducedCoefficient& reduced) {
  const ComplexField& lambda = reduced.lambda();
  ComplexField mu(lambda.spec());
  ComplexField nu(lambda.spec());
  const std::complex<double> half_i{0.0, 0.5};
  for (std::size_t i = 0; i < lambda.size(); ++i) {
    mu.data()[i] = -half_i * lambda.data()[i];
    nu.data()[i] = half_i * lambda.data()[i];
  }
  return BeltramiCoefficients::make(std::move(mu), std::move(nu));
}

QCSolution QCSolution::affine(const GridSpec& spec, std::complex<double> a,
                              std::complex<double> b) {
  QCSolution out;
  out.a_ = a;
  out.b_ = b;
  out.displacement_ = ComplexField(spec);
  out.fz_ = ComplexField(spec);
  out.fzbar_ = ComplexField(spec);
  std::fill(out.fz_.begin(), out.fz_.end(), a);
  std::fill(out.fzbar_.begin(), out.fzbar_.end(), b);
  return out;
}

QCSolution QCSolution::from_fields(ComplexField values, ComplexField fz,
                                   ComplexField fzbar) {
  if (!(values.spec() == fz.spec()) || !(values.spec() == fzbar.spec())) {
    throw ConfigError("from_fields: fields live on different grids");
  }
  QCSolution out;
  out.displacement_ = std::move(values);
  out.fz_ = std::move(fz);
  out.fzbar_ = std::move(fzbar);
  return out;
}

ComplexField QCSolution::values() const {
  ComplexField out = displacement_;
  const GridSpec& g = out.spec();
  if (a_ == std::complex<double>{0.0, 0.0} &&
      b_ == std::complex<double>{0.0, 0.0}) {
    return out;
  }
  for (int iy = 0; iy < g.n; ++iy) {
    for (int ix = 0; ix < g.n; ++ix) {
      const std::complex<double> z = g.z(ix, iy);
      out(ix, iy) += a_ * z + b_ * std::conj(z);
    }
  }
  return out;
}

RealField QCSolution::jacobian() const {
  RealField out(spec());
  const auto* pz = fz_.data();
  const auto* pb = fzbar_.data();
  for (std::size_t i = 0; i < fz_.size(); ++i) {
    out.data()[i] = std::norm(pz[i]) - std::norm(pb[i]);
  }
  return out;
}

QCSolution QCSolution::combine(double r, const QCSolution& other,
                               double s) const {
  if (!(spec() == other.spec())) {
    throw ConfigError("combine: members live on different grids");
  }
  QCSolution out;
  out.a_ = r * a_ + s * other.a_;
  out.b_ = r * b_ + s * other.b_;
  out.displacement_ = ComplexField(spec());
  out.fz_ = ComplexField(spec());
  out.fzbar_ = ComplexField(spec());
  for (std::size_t i = 0; i < fz_.size(); ++i) {
    out.displacement_.data()[i] =
        r * displacement_.data()[i] + s * other.displacement_.data()[i];
    out.fz_.data()[i] = r * fz_.data()[i] + s * other.fz_.data()[i];
    out.fzbar_.data()[i] = r * fzbar_.data()[i] + s * other.fzbar_.data()[i];
  }
  return out;
}

QCSolution solve_principal(const BeltramiCoefficients& coeffs,
                           const SolveOptions& opts) {
  if (!(opts.tol > 0.0)) throw ConfigError("solver tol must be positive");
  if (opts.max_iter < 1) throw ConfigError("solver max_iter must be >= 1");
  const GridSpec& spec = coeffs.spec();
  auto plan = plan_for(spec);
  const ComplexField& mu = coeffs.mu();
  const ComplexField& nu = coeffs.nu();
  const std::complex<double> seed = opts.seed;

  ComplexField omega(spec);  // current f_zbar iterate, starts at 0
  ComplexField fz(spec);     // seed + beurling(omega)
  std::fill(fz.begin(), fz.end(), seed);

  QCSolution out;
  out.step_norms_.reserve(32);
  double rel_step = 0.0;
  bool converged = false;
  for (int iter = 1; iter <= opts.max_iter; ++iter) {
    ComplexField next(spec);
    for (std::size_t i = 0; i < next.size(); ++i) {
      next.data()[i] = mu.data()[i] * fz.data()[i] +
                       nu.data()[i] * std::conj(fz.data()[i]);
    }
    if (opts.dealias) next = plan->lowpass_two_thirds(next);

    double step_sq = 0.0;
    for (std::size_t i = 0; i < next.size(); ++i) {
      step_sq += std::norm(next.data()[i] - omega.data()[i]);
    }
    const double step = spec.spacing() * std::sqrt(step_sq);
    out.step_norms_.push_back(step);
    out.iterations_ = iter;

    omega = std::move(next);
    ComplexField s_omega = plan->beurling(omega);
    for (std::size_t i = 0; i < fz.size(); ++i) {
      fz.data()[i] = seed + s_omega.data()[i];
    }
    rel_step = step / std::max(l2_norm(fz), kNormFloor);
    if (rel_step <= opts.tol) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    throw ConvergenceError(
        "fixed point did not reach tol within " +
            std::to_string(opts.max_iter) + " iterations",
        rel_step);
  }

  // Direct residual of the accepted iterate: omega - T(omega).
  double res_sq = 0.0;
  for (std::size_t i = 0; i < omega.size(); ++i) {
    const std::complex<double> t = mu.data()[i] * fz.data()[i] +
                                   nu.data()[i] * std::conj(fz.data()[i]);
    res_sq += std::norm(omega.data()[i] - t);
  }
  out.residual_ = spec.spacing() * std::sqrt(res_sq) /
                  std::max(l2_norm(fz), kNormFloor);

  out.a_ = seed;
  out.b_ = mean(omega);
  out.displacement_ = plan->cauchy(omega);
  out.fz_ = std::move(fz);
  out.fzbar_ = std::move(omega);
  return out;
}

QCSolution solve_reduced(const ReducedCoefficient& lambda,
                         const SolveOptions& opts) {
  return solve_principal(reduced_to_general(lambda), opts);
}

double residual_general(const QCSolution& f, const BeltramiCoefficients& c) {
  if (!(f.spec() == c.spec())) {
    throw ConfigError("residual_general: grid mismatch");
  }
  const auto* fz = f.fz().data();
  const auto* fzbar = f.fzbar().data();
  const auto* mu = c.mu().data();
  const auto* nu = c.nu().data();
  double res_sq = 0.0;
  for (std::size_t i = 0; i < f.fz().size(); ++i) {
    res_sq += std::norm(fzbar[i] - mu[i] * fz[i] - nu[i] * std::conj(fz[i]));
  }
  return f.spec().spacing() * std::sqrt(res_sq) /
         std::max(l2_norm(f.fz()), kNormFloor);
}

double residual_reduced(const QCSolution& f, const ReducedCoefficient& c) {
  if (!(f.spec() == c.spec())) {
    throw ConfigError("residual_reduced: grid mismatch");
  }
  const auto* fz = f.fz().data();
  const auto* fzbar = f.fzbar().data();
  const auto* lam = c.lambda().data();
  double res_sq = 0.0;
  for (std::size_t i = 0; i < f.fz().size(); ++i) {
    res_sq += std::norm(fzbar[i] - lam[i] * fz[i].imag());
  }
  return f.spec().spacing() * std::sqrt(res_sq) /
         std::max(l2_norm(f.fz()), kNormFloor);
}

Gradient real_gradient(const QCSolution& f) {
  Gradient out{RealField(f.spec()), RealField(f.spec())};
  const auto* fz = f.fz().data();
  const auto* fzbar = f.fzbar().data();
  for (std::size_t i = 0; i < f.fz().size(); ++i) {
    out.x.data()[i] = fz[i].real() + fzbar[i].real();   // Re(f_x)
    out.y.data()[i] = fzbar[i].imag() - fz[i].imag();   // Re(i(fz - fzbar))
  }
  return out;
}

Gradient imag_gradient(const QCSolution& f) {
  Gradient out{RealField(f.spec()), RealField(f.spec())};
  const auto* fz = f.fz().data();
  const auto* fzbar = f.fzbar().data();
  for (std::size_t i = 0; i < f.fz().size(); ++i) {
    out.x.data()[i] = fz[i].imag() + fzbar[i].imag();   // Im(f_x)
    out.y.data()[i] = fz[i].real() - fzbar[i].real();   // Im(i(fz - fzbar))
  }
  return out;
}

SignStatistics sign_statistics(const RealField& field, double band_rel) {
  SignStatistics stats;
  stats.band = band_rel * sup_norm(field);
  std::size_t pos = 0, neg = 0, zero = 0;
  for (double v : field) {
    if (v > stats.band) {
      ++pos;
    } else if (v < -stats.band) {
      ++neg;
    } else {
      ++zero;
    }
  }
  const double total = static_cast<double>(field.size());
  stats.positive_fraction = pos / total;
  stats.negative_fraction = neg / total;
  stats.zero_fraction = zero / total;
  return stats;
}

ComponentRelations component_relations(const QCSolution& f,
                                       const ReducedCoefficient& lambda) {
  if (!(f.spec() == lambda.spec())) {
    throw ConfigError("component_relations: grid mismatch");
  }
  ComponentRelations out;
  out.u_y = RealField(f.spec());
  out.v_x = RealField(f.spec());
  const auto* fz = f.fz().data();
  const auto* fzbar = f.fzbar().data();
  const auto* lam = lambda.lambda().data();
  double r1_sq = 0.0;
  double r2_sq = 0.0;
  for (std::size_t i = 0; i < f.fz().size(); ++i) {
    const double two_im_fz = 2.0 * fz[i].imag();
    const double v_x = fz[i].imag() + fzbar[i].imag();
    const double u_y = fzbar[i].imag() - fz[i].imag();
    const double beta = lam[i].imag();
    out.v_x.data()[i] = v_x;
    out.u_y.data()[i] = u_y;
    const double r1 = two_im_fz - 2.0 * v_x / (beta + 1.0);
    const double r2 = two_im_fz - 2.0 * u_y / (beta - 1.0);
    r1_sq += r1 * r1;
    r2_sq += r2 * r2;
  }
  const double denom = std::max(l2_norm(f.fz()), kNormFloor);
  const double h = f.spec().spacing();
  out.vx_residual = h * std::sqrt(r1_sq) / denom;
  out.uy_residual = h * std::sqrt(r2_sq) / denom;
  out.uy_signs = sign_statistics(out.u_y, 1e-12);
  return out;
}

}  // namespace qclab
