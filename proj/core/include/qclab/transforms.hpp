#pragma once

#include <complex>
#include <memory>
#include <vector>

#include "qclab/grid.hpp"

namespace qclab {

/// Fourier-multiplier machinery for one grid size.
///
/// All four operators act diagonally on the discrete Fourier basis
/// exp(i(kx*x + ky*y)) with kx = (2*pi/side)*mx, ky = (2*pi/side)*my and
/// integer frequencies folded to [-n/2, n/2); the Nyquist index maps to
/// -n/2 on both axes rather than being zeroed, which keeps d_zbar(cauchy(w))
/// equal to w - mean(w) to rounding on arbitrary grid data. Writing
/// xi = kx + i*ky, the symbols are
///
///   d_z      : (i/2) * conj(xi)
///   d_zbar   : (i/2) * xi
///   cauchy   : -2i / xi          (0 at xi = 0: mean-zero convention)
///   beurling : conj(xi) / xi     (0 at xi = 0; unit modulus elsewhere)
///
/// so cauchy inverts d_zbar on mean-zero fields and beurling = d_z o cauchy
/// is an L2 isometry there. Instances are immutable after construction and
/// safe to share across threads.
class TransformPlan {
 public:
  explicit TransformPlan(const GridSpec& spec);
  ~TransformPlan();
  TransformPlan(const TransformPlan&) = delete;
  TransformPlan& operator=(const TransformPlan&) = delete;

  const GridSpec& spec() const { return spec_; }

  /// Wirtinger derivatives of a periodic field.
  ComplexField d_z(const ComplexField& f) const;
  ComplexField d_zbar(const ComplexField& f) const;

  /// Mean-zero solution g of d_zbar(g) = f - mean(f).
  ComplexField cauchy(const ComplexField& f) const;

  /// d_z(cauchy(f)); kills the mean mode, isometric on the rest.
  ComplexField beurling(const ComplexField& f) const;

  /// 2/3-rule spectral truncation: zeroes every mode with a folded
  /// frequency index beyond n/3 on either axis. Optional dealiasing knob
  /// for pointwise-product iterations; off by default everywhere.
  ComplexField lowpass_two_thirds(const ComplexField& f) const;

 private:
  ComplexField apply(const ComplexField& f,
                     const std::vector<std::complex<double>>& table) const;

  GridSpec spec_;
  void* forward_ = nullptr;   // fftw_plan, kept opaque here
  void* backward_ = nullptr;  // fftw_plan
  std::vector<std::complex<double>> dz_table_;
  std::vector<std::complex<double>> dzbar_table_;
  std::vector<std::complex<double>> cauchy_table_;
  std::vector<std::complex<double>> beurling_table_;
  std::vector<std::complex<double>> lowpass_table_;
};

/// Process-wide plan cache keyed by (n, side). Planning is serialized
/// internally; the returned plan is shared and immutable.
std::shared_ptr<const TransformPlan> plan_for(const GridSpec& spec);

}  // namespace qclab
