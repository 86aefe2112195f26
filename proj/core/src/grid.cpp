#include "qclab/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "qclab/errors.hpp"

namespace qclab {

void GridSpec::validate() const {
  if (n < 16) {
    throw ConfigError("grid n must be at least 16, got " + std::to_string(n));
  }
  if ((n & (n - 1)) != 0) {
    throw ConfigError("grid n must be a power of two, got " +
                      std::to_string(n));
  }
  if (!(side > 0.0) || !std::isfinite(side)) {
    throw ConfigError("grid side must be positive and finite");
  }
}

ComplexField coordinate_field(const GridSpec& spec) {
  ComplexField out(spec);
  for (int iy = 0; iy < spec.n; ++iy) {
    for (int ix = 0; ix < spec.n; ++ix) {
      out(ix, iy) = spec.z(ix, iy);
    }
  }
  return out;
}

double sup_norm(const ComplexField& f) {
  double best = 0.0;
  for (const auto& v : f) best = std::max(best, std::abs(v));
  return best;
}

double sup_norm(const RealField& f) {
  double best = 0.0;
  for (double v : f) best = std::max(best, std::abs(v));
  return best;
}

double l2_norm(const ComplexField& f) {
  double acc = 0.0;
  for (const auto& v : f) acc += std::norm(v);
  return f.spec().spacing() * std::sqrt(acc);
}

double l2_norm(const RealField& f) {
  double acc = 0.0;
  for (double v : f) acc += v * v;
  return f.spec().spacing() * std::sqrt(acc);
}

double max_abs_diff(const ComplexField& a, const ComplexField& b) {
  if (!(a.spec() == b.spec())) {
    throw ConfigError("max_abs_diff: fields live on different grids");
  }
  double best = 0.0;
  const auto* pa = a.data();
  const auto* pb = b.data();
  for (std::size_t i = 0; i < a.size(); ++i) {
    best = std::max(best, std::abs(pa[i] - pb[i]));
  }
  return best;
}

std::complex<double> mean(const ComplexField& f) {
  std::complex<double> acc{0.0, 0.0};
  for (const auto& v : f) acc += v;
  return acc / static_cast<double>(f.size());
}

double mean(const RealField& f) {
  double acc = 0.0;
  for (double v : f) acc += v;
  return acc / static_cast<double>(f.size());
}

namespace {

// Shared walk over disk samples. Boundary slack: a node at distance exactly
// r must not drop out because the coordinate subtraction rounded up.
template <typename Visit>
void for_each_disk_node(const GridSpec& spec, std::complex<double> center,
                        double r, Visit&& visit) {
  spec.validate();
  if (!(r > 0.0)) throw DomainError("disk radius must be positive");
  const double half = 0.5 * spec.side;
  if (center.real() - r < -half || center.real() + r > half ||
      center.imag() - r < -half || center.imag() + r > half) {
    throw DomainError("disk leaves the periodic cell");
  }
  const double h = spec.spacing();
  const double r2 = r * r * (1.0 + 1e-12);
  const int ix_lo = std::max(0, static_cast<int>(
                                    std::floor((center.real() - r + half) / h)));
  const int ix_hi = std::min(spec.n - 1, static_cast<int>(std::ceil(
                                             (center.real() + r + half) / h)));
  const int iy_lo = std::max(0, static_cast<int>(
                                    std::floor((center.imag() - r + half) / h)));
  const int iy_hi = std::min(spec.n - 1, static_cast<int>(std::ceil(
                                             (center.imag() + r + half) / h)));
  for (int iy = iy_lo; iy <= iy_hi; ++iy) {
    const double dy = spec.y(iy) - center.imag();
    for (int ix = ix_lo; ix <= ix_hi; ++ix) {
      const double dx = spec.x(ix) - center.real();
      if (dx * dx + dy * dy <= r2) visit(ix, iy);
    }
  }
}

}  // namespace

double disk_mean(const RealField& w, std::complex<double> center, double r) {
  double acc = 0.0;
  for_each_disk_node(w.spec(), center, r,
                     [&](int ix, int iy) { acc += w(ix, iy); });
  return acc * w.spec().cell_area() / (r * r);
}

double disk_l2(const RealField& w, std::complex<double> center, double r) {
  double acc = 0.0;
  for_each_disk_node(w.spec(), center, r,
                     [&](int ix, int iy) { acc += w(ix, iy) * w(ix, iy); });
  return std::sqrt(acc * w.spec().cell_area() / (r * r));
}

std::size_t disk_count(const GridSpec& spec, std::complex<double> center,
                       double r) {
  std::size_t count = 0;
  for_each_disk_node(spec, center, r, [&](int, int) { ++count; });
  return count;
}

void write_field_csv(const std::filesystem::path& path,
                     const ComplexField& f) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "ix,iy,x,y,re,im\n";
  char buf[512];
  const GridSpec& spec = f.spec();
  for (int iy = 0; iy < spec.n; ++iy) {
    for (int ix = 0; ix < spec.n; ++ix) {
      const auto v = f(ix, iy);
      std::snprintf(buf, sizeof(buf), "%d,%d,%.17g,%.17g,%.17g,%.17g\n", ix,
                    iy, spec.x(ix), spec.y(iy), v.real(), v.imag());
      out << buf;
    }
  }
  if (!out) throw IoError("write failed for " + path.string());
}

ComplexField read_field_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "ix,iy,x,y,re,im") {
    throw IoError("bad field CSV header in " + path.string());
  }
  struct Row {
    int ix, iy;
    std::complex<double> v;
  };
  std::vector<Row> rows;
  bool have_left_edge = false;
  double left_edge = 0.0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    Row row;
    double x, y, re, im;
    if (std::sscanf(line.c_str(), "%d,%d,%lf,%lf,%lf,%lf", &row.ix, &row.iy,
                    &x, &y, &re, &im) != 6) {
      throw IoError("bad field CSV row in " + path.string() + ": " + line);
    }
    if (row.ix == 0 && !have_left_edge) {
      have_left_edge = true;
      left_edge = x;
    }
    row.v = {re, im};
    rows.push_back(row);
  }
  const auto count = rows.size();
  int n = static_cast<int>(std::lround(std::sqrt(static_cast<double>(count))));
  if (static_cast<std::size_t>(n) * n != count || n < 16) {
    throw IoError("field CSV row count is not a valid grid: " + path.string());
  }
  if (!have_left_edge) {
    throw IoError("field CSV has no ix = 0 column: " + path.string());
  }
  // The ix = 0 column sits at exactly -side/2, and doubling is exact in
  // binary floating point, so the side (and with it the whole GridSpec)
  // round-trips bitwise. Recovering it from x-spacing instead would pick up
  // one-ulp drift and fail strict grid-equality checks downstream.
  GridSpec spec{n, -2.0 * left_edge};
  spec.validate();
  ComplexField out(spec);
  for (const auto& row : rows) {
    if (row.ix < 0 || row.ix >= n || row.iy < 0 || row.iy >= n) {
      throw IoError("field CSV index out of range in " + path.string());
    }
    out(row.ix, row.iy) = row.v;
  }
  return out;
}

}  // namespace qclab
