#include "qclab/elliptic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "qclab/errors.hpp"
#include "qclab/parallel.hpp"
#include "qclab/rng.hpp"

namespace qclab {

EllipticCoefficients coefficients_from_lambda(const ReducedCoefficient& red) {
  const ComplexField& lambda = red.lambda();
  const GridSpec& spec = red.spec();
  EllipticCoefficients out{RealField(spec), RealField(spec), 1.0};
  double eig_hi = 0.0;
  double eig_lo = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < lambda.size(); ++i) {
    const double alpha = lambda.data()[i].real();
    const double beta = lambda.data()[i].imag();
    const double denom = 1.0 - beta;
    if (!(denom > 0.0)) {
      throw EllipticityError("coefficients_from_lambda: beta reaches 1");
    }
    const double a12 = 2.0 * alpha / denom;
    const double a22 = (1.0 + beta) / denom;
    out.a12.data()[i] = a12;
    out.a22.data()[i] = a22;
    // Eigenvalues of sigma = [[1, a12/2], [a12/2, a22]].
    const double tr = 1.0 + a22;
    const double gap =
        std::sqrt((1.0 - a22) * (1.0 - a22) + a12 * a12);  // 2*sqrt(disc)
    eig_hi = std::max(eig_hi, 0.5 * (tr + gap));
    eig_lo = std::min(eig_lo, 0.5 * (tr - gap));
  }
  if (!(eig_lo > 0.0)) {
    throw EllipticityError(
        "coefficients_from_lambda: quadratic form lost positivity");
  }
  out.K_ell = std::max(eig_hi, 1.0 / eig_lo);
  return out;
}

TestBump::Jet TestBump::eval(double x, double y) const {
  Jet jet;
  const double X = (x - center.real()) / radius;
  const double Y = (y - center.imag()) / radius;
  const double s = X * X + Y * Y;
  // The cutoff underflows to exact zero well before s reaches 1; clamping
  // here avoids overflow of 1/(1-s) powers at the support edge.
  if (s >= 1.0 - 1e-8) return jet;
  const double t = 1.0 / (1.0 - s);
  const double c = std::exp(1.0 - t);
  const double cp = -c * t * t;            // dc/ds
  const double cpp = c * t * t * t * (t - 2.0);  // d2c/ds2

  const auto& p = poly;
  const double P = p[0] + p[1] * X + p[2] * Y + p[3] * X * X + p[4] * X * Y +
                   p[5] * Y * Y;
  const double PX = p[1] + 2.0 * p[3] * X + p[4] * Y;
  const double PY = p[2] + p[4] * X + 2.0 * p[5] * Y;
  const double PXX = 2.0 * p[3];
  const double PXY = p[4];
  const double PYY = 2.0 * p[5];

  const double vX = PX * c + 2.0 * X * P * cp;
  const double vY = PY * c + 2.0 * Y * P * cp;
  const double vXX =
      PXX * c + 4.0 * X * PX * cp + 2.0 * P * cp + 4.0 * X * X * P * cpp;
  const double vXY = PXY * c + 2.0 * Y * PX * cp + 2.0 * X * PY * cp +
                     4.0 * X * Y * P * cpp;
  const double vYY =
      PYY * c + 4.0 * Y * PY * cp + 2.0 * P * cp + 4.0 * Y * Y * P * cpp;

  jet.value = P * c;
  jet.dx = vX / radius;
  jet.dy = vY / radius;
  const double r2 = radius * radius;
  jet.dxx = vXX / r2;
  jet.dxy = vXY / r2;
  jet.dyy = vYY / r2;
  return jet;
}

void TestBump::validate(const GridSpec& spec) const {
  if (!(radius > 0.0)) throw DomainError("bump radius must be positive");
  const double half = 0.5 * spec.side;
  if (std::abs(center.real()) + radius >= half ||
      std::abs(center.imag()) + radius >= half) {
    throw DomainError("bump support leaves the periodic cell");
  }
}

std::vector<TestBump> TestBump::battery(const GridSpec& spec, int randomized,
                                        std::uint64_t seed) {
  const double L = spec.side;
  std::vector<TestBump> bumps;
  bumps.push_back({{0.0, 0.0}, 0.30 * L, {1, 0, 0, 0, 0, 0}});
  bumps.push_back({{0.0, 0.0}, 0.28 * L, {0, 1, 0, 0, 0, 0}});
  bumps.push_back({{0.0, 0.0}, 0.26 * L, {0, 0, 1, 0, 0, 0}});
  bumps.push_back({{-0.08 * L, 0.06 * L}, 0.22 * L, {0.5, 0, 0, 0, 1, 0}});
  bumps.push_back({{0.10 * L, -0.12 * L}, 0.20 * L, {1, 0, 0, 1, 0, -1}});

  Rng rng(seed);
  const double margin = 2.0 * spec.spacing();
  for (int i = 0; i < randomized; ++i) {
    TestBump bump;
    bump.radius = rng.uniform(0.10 * L, 0.25 * L);
    const double box = 0.5 * L - bump.radius - margin;
    bump.center = {rng.uniform(-box, box), rng.uniform(-box, box)};
    bump.poly[0] = rng.uniform(0.5, 1.5);  // keep the bump away from zero
    for (int j = 1; j < 6; ++j) bump.poly[j] = rng.uniform(-1.0, 1.0);
    bumps.push_back(bump);
  }
  for (const auto& bump : bumps) bump.validate(spec);
  return bumps;
}

namespace {

// Walks the grid nodes inside a bump's support box.
template <typename Visit>
void for_each_support_node(const GridSpec& spec, const TestBump& bump,
                           Visit&& visit) {
  const double half = 0.5 * spec.side;
  const double h = spec.spacing();
  const auto clamp_idx = [&](double coord) {
    return std::clamp(static_cast<int>(std::floor((coord + half) / h)), 0,
                      spec.n - 1);
  };
  const int ix_lo = clamp_idx(bump.center.real() - bump.radius);
  const int ix_hi = clamp_idx(bump.center.real() + bump.radius);
  const int iy_lo = clamp_idx(bump.center.imag() - bump.radius);
  const int iy_hi = clamp_idx(bump.center.imag() + bump.radius);
  for (int iy = iy_lo; iy <= iy_hi; ++iy) {
    for (int ix = ix_lo; ix <= ix_hi; ++ix) {
      visit(ix, iy, spec.x(ix), spec.y(iy));
    }
  }
}

double grad_l2(const Gradient& g) {
  double acc = 0.0;
  for (std::size_t i = 0; i < g.x.size(); ++i) {
    acc += g.x.data()[i] * g.x.data()[i] + g.y.data()[i] * g.y.data()[i];
  }
  return g.x.spec().spacing() * std::sqrt(acc);
}

constexpr double kDenomFloor = 1e-300;

}  // namespace

WeakFormReport weak_divergence_residual(const Gradient& grad_u,
                                        const EllipticCoefficients& coeffs,
                                        const std::vector<TestBump>& bumps,
                                        int threads) {
  const GridSpec& spec = coeffs.spec();
  if (!(grad_u.x.spec() == spec)) {
    throw ConfigError("weak_divergence_residual: grid mismatch");
  }
  const double grad_u_norm = grad_l2(grad_u);
  WeakFormReport report;
  report.per_bump.assign(bumps.size(), 0.0);
  for (const auto& bump : bumps) bump.validate(spec);
  parallel_for(0, static_cast<int>(bumps.size()), threads, [&](int b) {
    double integral = 0.0;
    double grad_phi_sq = 0.0;
    for_each_support_node(
        spec, bumps[b], [&](int ix, int iy, double x, double y) {
          const TestBump::Jet jet = bumps[b].eval(x, y);
          const double ux = grad_u.x(ix, iy);
          const double uy = grad_u.y(ix, iy);
          integral += jet.dx * (ux + coeffs.a12(ix, iy) * uy) +
                      jet.dy * coeffs.a22(ix, iy) * uy;
          grad_phi_sq += jet.dx * jet.dx + jet.dy * jet.dy;
        });
    const double area = spec.cell_area();
    const double denom =
        std::sqrt(grad_phi_sq * area) * grad_u_norm;  // ||grad phi|| ||grad u||
    report.per_bump[b] = std::abs(integral * area) / std::max(denom, kDenomFloor);
  });
  report.max_residual =
      *std::max_element(report.per_bump.begin(), report.per_bump.end());
  return report;
}

WeakFormReport adjoint_residual(const RealField& w,
                                const EllipticCoefficients& coeffs,
                                const std::vector<TestBump>& bumps,
                                int threads) {
  const GridSpec& spec = coeffs.spec();
  if (!(w.spec() == spec)) {
    throw ConfigError("adjoint_residual: grid mismatch");
  }
  const double w_norm = l2_norm(w);
  WeakFormReport report;
  report.per_bump.assign(bumps.size(), 0.0);
  for (const auto& bump : bumps) bump.validate(spec);
  parallel_for(0, static_cast<int>(bumps.size()), threads, [&](int b) {
    double integral = 0.0;
    double lphi_sq = 0.0;
    for_each_support_node(
        spec, bumps[b], [&](int ix, int iy, double x, double y) {
          const TestBump::Jet jet = bumps[b].eval(x, y);
          const double lphi = jet.dxx + coeffs.a12(ix, iy) * jet.dxy +
                              coeffs.a22(ix, iy) * jet.dyy;
          integral += w(ix, iy) * lphi;
          lphi_sq += lphi * lphi;
        });
    const double area = spec.cell_area();
    const double denom = w_norm * std::sqrt(lphi_sq * area);
    report.per_bump[b] = std::abs(integral * area) / std::max(denom, kDenomFloor);
  });
  report.max_residual =
      *std::max_element(report.per_bump.begin(), report.per_bump.end());
  return report;
}

WeakFormReport bridging_residual(const Gradient& grad_u,
                                 const EllipticCoefficients& coeffs,
                                 const std::vector<TestBump>& bumps,
                                 int threads) {
  const GridSpec& spec = coeffs.spec();
  if (!(grad_u.x.spec() == spec)) {
    throw ConfigError("bridging_residual: grid mismatch");
  }
  const double grad_u_norm = grad_l2(grad_u);
  WeakFormReport report;
  report.per_bump.assign(bumps.size(), 0.0);
  for (const auto& bump : bumps) bump.validate(spec);
  parallel_for(0, static_cast<int>(bumps.size()), threads, [&](int b) {
    double lhs = 0.0;   // grad(phi_y) . A grad(u)
    double rhs = 0.0;   // u_y * L(phi)
    double grad_phiy_sq = 0.0;
    for_each_support_node(
        spec, bumps[b], [&](int ix, int iy, double x, double y) {
          const TestBump::Jet jet = bumps[b].eval(x, y);
          const double ux = grad_u.x(ix, iy);
          const double uy = grad_u.y(ix, iy);
          const double a12 = coeffs.a12(ix, iy);
          const double a22 = coeffs.a22(ix, iy);
          lhs += jet.dxy * (ux + a12 * uy) + jet.dyy * a22 * uy;
          rhs += uy * (jet.dxx + a12 * jet.dxy + a22 * jet.dyy);
          grad_phiy_sq += jet.dxy * jet.dxy + jet.dyy * jet.dyy;
        });
    const double area = spec.cell_area();
    const double denom = std::sqrt(grad_phiy_sq * area) * grad_u_norm;
    report.per_bump[b] =
        std::abs((lhs - rhs) * area) / std::max(denom, kDenomFloor);
  });
  report.max_residual =
      *std::max_element(report.per_bump.begin(), report.per_bump.end());
  return report;
}

std::vector<Disk> disk_battery(const GridSpec& spec,
                               const std::vector<int>& ladder_h, int centers,
                               std::uint64_t seed) {
  spec.validate();
  if (centers < 1) throw ConfigError("disk_battery: centers must be >= 1");
  const double h = spec.spacing();
  const double half = 0.5 * spec.side;
  Rng rng(seed);
  std::vector<Disk> disks;
  for (int rung : ladder_h) {
    if (rung < 1) throw ConfigError("disk_battery: ladder entries must be >= 1");
    const double r = rung * h;
    const double bound = half - 2.0 * r - h;
    const auto snap = [&](double coord) {
      const int idx = static_cast<int>(std::lround((coord + half) / h));
      return -half + idx * h;
    };
    if (bound < 0.0) {
      // Only the centered disk can satisfy D(c, 2r) inside the cell.
      if (2.0 * r <= half) {
        disks.push_back({{0.0, 0.0}, r, rung});
      }
      continue;
    }
    for (int c = 0; c < centers; ++c) {
      const double cx = snap(rng.uniform(-bound, bound));
      const double cy = snap(rng.uniform(-bound, bound));
      disks.push_back({{cx, cy}, r, rung});
    }
  }
  if (disks.empty()) {
    throw ConfigError("disk_battery: no rung fits inside the cell");
  }
  return disks;
}

ReverseHolderReport reverse_holder_scan(const RealField& w,
                                        const std::vector<Disk>& disks,
                                        int threads) {
  if (disks.empty()) throw ConfigError("reverse_holder_scan: empty battery");
  const GridSpec& spec = w.spec();
  const double half = 0.5 * spec.side;

  RealField clipped(spec);
  std::size_t negatives = 0;
  double most_negative = 0.0;
  double sup_abs = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double v = w.data()[i];
    sup_abs = std::max(sup_abs, std::abs(v));
    if (v < 0.0) {
      ++negatives;
      most_negative = std::min(most_negative, v);
      clipped.data()[i] = 0.0;
    } else {
      clipped.data()[i] = v;
    }
  }

  ReverseHolderReport report;
  report.clipped_negative_fraction = static_cast<double>(negatives) / w.size();
  report.max_negative_excursion_rel =
      sup_abs > 0.0 ? -most_negative / sup_abs : 0.0;
  const double sup_clipped = sup_norm(clipped);
  if (sup_clipped == 0.0) {
    throw DegeneracyError("reverse_holder_scan: field is nonpositive");
  }
  report.mean_floor = 1e-9 * std::numbers::pi * sup_clipped;

  // Validate the doubled-disk containment up front; workers must not throw.
  for (const Disk& disk : disks) {
    if (std::abs(disk.center.real()) + 2.0 * disk.r > half + 1e-12 * half ||
        std::abs(disk.center.imag()) + 2.0 * disk.r > half + 1e-12 * half) {
      throw DomainError("reverse_holder_scan: doubled disk leaves the cell");
    }
  }

  report.entries.assign(disks.size(), {});
  parallel_for(0, static_cast<int>(disks.size()), threads, [&](int d) {
    const Disk& disk = disks[d];
    ReverseHolderReport::Entry entry;
    entry.disk = disk;
    entry.mean = disk_mean(clipped, disk.center, disk.r);
    entry.l2 = disk_l2(clipped, disk.center, disk.r);
    if (entry.mean <= report.mean_floor) {
      entry.skipped = true;
    } else {
      entry.ratio = entry.l2 / entry.mean;
    }
    report.entries[d] = entry;
  });

  double c0 = 0.0;
  std::size_t skipped = 0;
  for (const auto& entry : report.entries) {
    if (entry.skipped) {
      ++skipped;
    } else {
      c0 = std::max(c0, entry.ratio);
    }
  }
  report.skipped_count = skipped;
  report.c0_empirical = c0;
  if (skipped == report.entries.size()) {
    throw DegeneracyError("reverse_holder_scan: every disk was skipped");
  }
  return report;
}

std::vector<double> zero_measure_estimate(const RealField& field,
                                          const std::vector<double>& taus) {
  std::vector<double> fractions;
  fractions.reserve(taus.size());
  for (double tau : taus) {
    std::size_t count = 0;
    for (double v : field) {
      if (std::abs(v) < tau) ++count;
    }
    fractions.push_back(static_cast<double>(count) / field.size());
  }
  return fractions;
}

}  // namespace qclab
