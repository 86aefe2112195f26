#pragma once

#include <complex>
#include <cstdint>
#include <filesystem>
#include <string>

#include "qclab/grid.hpp"
#include "qclab/rng.hpp"

namespace qclab::testing {

/// Seeded complex Gaussian field (independent real and imaginary parts).
inline ComplexField random_field(const GridSpec& spec, std::uint64_t seed) {
  Rng rng(seed);
  ComplexField f(spec);
  for (auto& v : f) v = {rng.normal(), rng.normal()};
  return f;
}

/// ||a - b||_2 / ||b||_2.
inline double rel_l2_diff(const ComplexField& a, const ComplexField& b) {
  ComplexField diff = a;
  for (std::size_t i = 0; i < b.size(); ++i) diff.data()[i] -= b.data()[i];
  return l2_norm(diff) / l2_norm(b);
}

/// Fresh per-test scratch directory under the system temp root. Recreated on
/// entry so reruns never see stale artifacts; left in place afterwards for
/// post-mortems.
inline std::filesystem::path scratch_dir(const std::string& tag) {
  const std::filesystem::path dir =
      std::filesystem::temp_directory_path() / ("qclab_test_" + tag);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace qclab::testing
