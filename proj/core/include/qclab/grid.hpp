#pragma once

#include <complex>
#include <cstddef>
#include <filesystem>
#include <numbers>
#include <vector>

namespace qclab {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Uniform n-by-n sampling of the periodic cell [-side/2, side/2)^2.
///
/// Nodes sit at x = -side/2 + ix*h, y = -side/2 + iy*h with h = side/n, so
/// the origin is a node and the cell is symmetric about it. n must be a
/// power of two (>= 16): transforms, disk ladders and refinement studies all
/// halve or double it.
struct GridSpec {
  int n = 0;
  double side = kTwoPi;

  /// Throws ConfigError if n or side is out of contract.
  void validate() const;

  double spacing() const { return side / n; }
  double cell_area() const { return spacing() * spacing(); }
  std::size_t size() const { return static_cast<std::size_t>(n) * n; }

  double x(int ix) const { return -0.5 * side + ix * spacing(); }
  double y(int iy) const { return -0.5 * side + iy * spacing(); }
  std::complex<double> z(int ix, int iy) const { return {x(ix), y(iy)}; }

  bool operator==(const GridSpec& other) const {
    return n == other.n && side == other.side;
  }
};

/// Row-major complex samples over a GridSpec; (ix, iy) indexes x fastest.
class ComplexField {
 public:
  ComplexField() = default;
  explicit ComplexField(const GridSpec& spec)
      : spec_(spec), data_(spec.size(), std::complex<double>{0.0, 0.0}) {
    spec.validate();
  }

  const GridSpec& spec() const { return spec_; }
  int n() const { return spec_.n; }

  std::complex<double>& operator()(int ix, int iy) {
    return data_[static_cast<std::size_t>(iy) * spec_.n + ix];
  }
  const std::complex<double>& operator()(int ix, int iy) const {
    return data_[static_cast<std::size_t>(iy) * spec_.n + ix];
  }

  std::complex<double>* data() { return data_.data(); }
  const std::complex<double>* data() const { return data_.data(); }
  std::size_t size() const { return data_.size(); }

  auto begin() { return data_.begin(); }
  auto end() { return data_.end(); }
  auto begin() const { return data_.begin(); }
  auto end() const { return data_.end(); }

 private:
  GridSpec spec_;
  std::vector<std::complex<double>> data_;
};

/// Row-major real samples over a GridSpec; same layout as ComplexField.
class RealField {
 public:
  RealField() = default;
  explicit RealField(const GridSpec& spec)
      : spec_(spec), data_(spec.size(), 0.0) {
    spec.validate();
  }

  const GridSpec& spec() const { return spec_; }
  int n() const { return spec_.n; }

  double& operator()(int ix, int iy) {
    return data_[static_cast<std::size_t>(iy) * spec_.n + ix];
  }
  const double& operator()(int ix, int iy) const {
    return data_[static_cast<std::size_t>(iy) * spec_.n + ix];
  }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::size_t size() const { return data_.size(); }

  auto begin() { return data_.begin(); }
  auto end() { return data_.end(); }
  auto begin() const { return data_.begin(); }
  auto end() const { return data_.end(); }

 private:
  GridSpec spec_;
  std::vector<double> data_;
};

/// Field of node coordinates z = x + iy.
ComplexField coordinate_field(const GridSpec& spec);

/// Pointwise magnitudes and norms. l2_norm carries the cell measure
/// (h * sqrt(sum |f|^2)), so it approximates the continuum L2 norm.
double sup_norm(const ComplexField& f);
double sup_norm(const RealField& f);
double l2_norm(const ComplexField& f);
double l2_norm(const RealField& f);
double max_abs_diff(const ComplexField& a, const ComplexField& b);

/// Cell-measure mean over the full grid (integral / side^2 equals the plain
/// sample average on a uniform grid).
std::complex<double> mean(const ComplexField& f);
double mean(const RealField& f);

/// Disk statistics used by the averaging scans. Membership is
/// |z - center|^2 <= r^2 (with an epsilon of slack so exact-boundary nodes
/// do not flip on rounding); the normalization by r^2 instead of the disk
/// area keeps ratios dimensionless without baking pi into both sides.
/// Throws DomainError if the disk does not fit inside the cell.
double disk_mean(const RealField& w, std::complex<double> center, double r);
double disk_l2(const RealField& w, std::complex<double> center, double r);
std::size_t disk_count(const GridSpec& spec, std::complex<double> center,
                       double r);

/// CSV emission: header "ix,iy,x,y,re,im", rows in iy-major order, numbers
/// with 17 significant digits so a reader recovers the exact doubles.
void write_field_csv(const std::filesystem::path& path, const ComplexField& f);

/// Strict reader for the writer's format (tests round-trip through it).
ComplexField read_field_csv(const std::filesystem::path& path);

}  // namespace qclab
