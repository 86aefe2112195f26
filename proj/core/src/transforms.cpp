#include "qclab/transforms.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <utility>

#include "qclab/errors.hpp"

namespace qclab {

namespace {

// FFTW plan creation/destruction is not thread-safe; execution through the
// new-array interface is. One process-wide mutex guards the planner.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

int folded(int m, int n) { return m < n / 2 ? m : m - n; }

}  // namespace

TransformPlan::TransformPlan(const GridSpec& spec) : spec_(spec) {
  spec.validate();
  const int n = spec.n;
  const std::size_t count = spec.size();

  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_complex* probe_in = fftw_alloc_complex(count);
    fftw_complex* probe_out = fftw_alloc_complex(count);
    // FFTW_UNALIGNED lets the plan run later on plain std::vector storage
    // through fftw_execute_dft; FFTW_ESTIMATE keeps planning deterministic
    // and leaves the probe buffers untouched.
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    forward_ = fftw_plan_dft_2d(n, n, probe_in, probe_out, FFTW_FORWARD, flags);
    backward_ =
        fftw_plan_dft_2d(n, n, probe_in, probe_out, FFTW_BACKWARD, flags);
    fftw_free(probe_in);
    fftw_free(probe_out);
  }
  if (forward_ == nullptr || backward_ == nullptr) {
    throw ConfigError("FFT planning failed for n = " + std::to_string(n));
  }

  dz_table_.resize(count);
  dzbar_table_.resize(count);
  cauchy_table_.resize(count);
  beurling_table_.resize(count);
  lowpass_table_.resize(count);
  const double base = kTwoPi / spec.side;
  const double scale = 1.0 / static_cast<double>(count);  // inverse-FFT norm
  for (int my = 0; my < n; ++my) {
    const int fy = folded(my, n);
    const double ky = base * fy;
    for (int mx = 0; mx < n; ++mx) {
      const int fx = folded(mx, n);
      const double kx = base * fx;
      const std::size_t idx = static_cast<std::size_t>(my) * n + mx;
      const std::complex<double> xi{kx, ky};
      dz_table_[idx] = std::complex<double>{0.5 * ky, 0.5 * kx} * scale;
      dzbar_table_[idx] = std::complex<double>{-0.5 * ky, 0.5 * kx} * scale;
      if (mx == 0 && my == 0) {
        cauchy_table_[idx] = 0.0;
        beurling_table_[idx] = 0.0;
      } else {
        cauchy_table_[idx] = std::complex<double>{0.0, -2.0} / xi * scale;
        beurling_table_[idx] = std::conj(xi) / xi * scale;
      }
      const bool keep = std::abs(fx) <= n / 3 && std::abs(fy) <= n / 3;
      lowpass_table_[idx] = keep ? scale : 0.0;
    }
  }
}

TransformPlan::~TransformPlan() {
  std::lock_guard<std::mutex> lock(planner_mutex());
  if (forward_ != nullptr) fftw_destroy_plan(static_cast<fftw_plan>(forward_));
  if (backward_ != nullptr)
    fftw_destroy_plan(static_cast<fftw_plan>(backward_));
}

ComplexField TransformPlan::apply(
    const ComplexField& f,
    const std::vector<std::complex<double>>& table) const {
  if (!(f.spec() == spec_)) {
    throw ConfigError("transform applied to a field from a different grid");
  }
  // Per-thread scratch: reused across calls, never shared between threads.
  thread_local std::vector<std::complex<double>> spectrum;
  spectrum.resize(f.size());

  ComplexField out(spec_);
  auto* in_raw = reinterpret_cast<fftw_complex*>(
      const_cast<std::complex<double>*>(f.data()));
  auto* spec_raw = reinterpret_cast<fftw_complex*>(spectrum.data());
  auto* out_raw = reinterpret_cast<fftw_complex*>(out.data());

  fftw_execute_dft(static_cast<fftw_plan>(forward_), in_raw, spec_raw);
  for (std::size_t i = 0; i < spectrum.size(); ++i) spectrum[i] *= table[i];
  fftw_execute_dft(static_cast<fftw_plan>(backward_), spec_raw, out_raw);
  return out;
}

ComplexField TransformPlan::d_z(const ComplexField& f) const {
  return apply(f, dz_table_);
}

ComplexField TransformPlan::d_zbar(const ComplexField& f) const {
  return apply(f, dzbar_table_);
}

ComplexField TransformPlan::cauchy(const ComplexField& f) const {
  return apply(f, cauchy_table_);
}

ComplexField TransformPlan::beurling(const ComplexField& f) const {
  return apply(f, beurling_table_);
}

ComplexField TransformPlan::lowpass_two_thirds(const ComplexField& f) const {
  return apply(f, lowpass_table_);
}

std::shared_ptr<const TransformPlan> plan_for(const GridSpec& spec) {
  static std::mutex cache_mutex;
  static std::map<std::pair<int, double>, std::shared_ptr<const TransformPlan>>
      cache;
  std::lock_guard<std::mutex> lock(cache_mutex);
  auto key = std::make_pair(spec.n, spec.side);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  auto plan = std::make_shared<const TransformPlan>(spec);
  cache.emplace(key, plan);
  return plan;
}

}  // namespace qclab
