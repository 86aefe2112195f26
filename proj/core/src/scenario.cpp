#include "qclab/scenario.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <utility>

#include <json.hpp>

#include "qclab/elliptic.hpp"
#include "qclab/errors.hpp"
#include "qclab/family.hpp"
#include "qclab/parallel.hpp"
#include "qclab/toml.hpp"

namespace qclab {
namespace {

using njson = nlohmann::json;

constexpr double kTiny = 1e-300;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt_g17(double v) {
  if (std::isnan(v)) return "";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

njson to_json(std::complex<double> z) { return njson::array({z.real(), z.imag()}); }

/// Stage stopwatch; accumulates per-stage wall time for the report.
class StageTimer {
 public:
  void record(const std::string& stage, double seconds) { seconds_[stage] += seconds; }
  njson to_json() const {
    njson out = njson::object();
    for (const auto& [k, v] : seconds_) out[k] = v;
    return out;
  }

 private:
  std::map<std::string, double> seconds_;
};

class ScopedStage {
 public:
  ScopedStage(StageTimer& timer, std::string name)
      : timer_(timer), name_(std::move(name)), start_(std::chrono::steady_clock::now()) {}
  ~ScopedStage() {
    const auto stop = std::chrono::steady_clock::now();
    timer_.record(name_, std::chrono::duration<double>(stop - start_).count());
  }

 private:
  StageTimer& timer_;
  std::string name_;
  std::chrono::steady_clock::time_point start_;
};

// ---------------------------------------------------------------------------
// Scenario loading
// ---------------------------------------------------------------------------

void require_keys_subset(const TomlDocument& doc, const std::string& table,
                         const std::set<std::string>& allowed,
                         const std::string& origin) {
  for (const auto& key : doc.keys(table)) {
    if (!allowed.count(key)) {
      throw ConfigError(origin + ": unknown key '" + key + "' in [" + table + "]");
    }
  }
}

std::complex<double> get_complex(const TomlDocument& doc, const std::string& table,
                                 const std::string& base, std::complex<double> fallback) {
  return {doc.get_double_or(table, base + "_re", fallback.real()),
          doc.get_double_or(table, base + "_im", fallback.imag())};
}

std::complex<double> get_complex_array(const TomlDocument& doc, const std::string& table,
                                       const std::string& key, std::complex<double> fallback,
                                       const std::string& origin) {
  if (!doc.has(table, key)) return fallback;
  const auto v = doc.get_double_array(table, key);
  if (v.size() != 2) {
    throw ConfigError(origin + ": '" + key + "' must be a [re, im] pair");
  }
  return {v[0], v[1]};
}

enum class ExpectKind { Number, Text, Flag };

const std::map<std::string, ExpectKind>& expect_vocabulary() {
  static const std::map<std::string, ExpectKind> vocab = {
      {"phi_residual_max", ExpectKind::Number},
      {"psi_residual_max", ExpectKind::Number},
      {"reduced_residual_max", ExpectKind::Number},
      {"oracle", ExpectKind::Text},
      {"oracle_rel_l2_max", ExpectKind::Number},
      {"pairing_const", ExpectKind::Number},
      {"pairing_tol", ExpectKind::Number},
      {"pairing_sup_max", ExpectKind::Number},
      {"zero_fraction_max", ExpectKind::Number},
      {"zero_fraction_min", ExpectKind::Number},
      {"zero_fraction_tau_rel", ExpectKind::Number},
      {"lambda_verdict", ExpectKind::Text},
      {"degenerate", ExpectKind::Flag},
      {"chain_rule_residual_max", ExpectKind::Number},
      {"lambda_w_const_re", ExpectKind::Number},
      {"lambda_w_const_im", ExpectKind::Number},
      {"lambda_w_tol", ExpectKind::Number},
      {"im_fw_negative_fraction_max", ExpectKind::Number},
      {"vx_residual_max", ExpectKind::Number},
      {"uy_residual_max", ExpectKind::Number},
      {"uy_mixed_fraction_max", ExpectKind::Number},
      {"weak_residual_max", ExpectKind::Number},
      {"adjoint_residual_max", ExpectKind::Number},
      {"bridging_residual_max", ExpectKind::Number},
      {"c0_max", ExpectKind::Number},
      {"c0_rung_spread_max", ExpectKind::Number},
      {"iterations_max_phi", ExpectKind::Number},
      {"iterations_max_psi", ExpectKind::Number},
  };
  return vocab;
}

bool has_expect(const ScenarioConfig& config, const std::string& key) {
  for (const auto& e : config.expectations) {
    if (e.key == key) return true;
  }
  return false;
}

const ScenarioConfig::Expectation* find_expect(const ScenarioConfig& config,
                                               const std::string& key) {
  for (const auto& e : config.expectations) {
    if (e.key == key) return &e;
  }
  return nullptr;
}

double expect_number_or(const ScenarioConfig& config, const std::string& key,
                        double fallback) {
  const auto* e = find_expect(config, key);
  return e ? e->number : fallback;
}

// ---------------------------------------------------------------------------
// Coefficient generators
// ---------------------------------------------------------------------------

/// Cutoff shared with TestBump: exp(1 - 1/(1 - s)) for s < 1, else 0.
double cutoff(double s) {
  if (s >= 1.0 - 1e-8) return 0.0;
  return std::exp(1.0 - 1.0 / (1.0 - s));
}

ComplexField generated_lambda(const ScenarioConfig& config) {
  const GridSpec& spec = config.grid;
  if (config.generator == "constant") {
    ComplexField lambda(spec);
    std::fill(lambda.begin(), lambda.end(), config.lambda_const);
    return lambda;
  }
  if (config.generator == "smooth_bump") {
    ComplexField lambda(spec);
    const double w2 = config.bump_width * config.bump_width;
    for (int iy = 0; iy < spec.n; ++iy) {
      for (int ix = 0; ix < spec.n; ++ix) {
        const std::complex<double> d = spec.z(ix, iy) - config.bump_center;
        lambda(ix, iy) = config.bump_amp * cutoff(std::norm(d) / w2);
      }
    }
    return lambda;
  }
  if (config.generator == "csv") {
    ComplexField lambda = read_field_csv(config.csv_lambda);
    if (!(lambda.spec() == spec)) {
      throw ConfigError("coefficient CSV grid does not match [grid]: " +
                        config.csv_lambda.string());
    }
    return lambda;
  }
  throw ConfigError("generator '" + config.generator + "' does not produce a reduced coefficient");
}

std::pair<ComplexField, ComplexField> generated_mu_nu(const ScenarioConfig& config) {
  const GridSpec& spec = config.grid;
  if (config.generator == "constant") {
    ComplexField mu(spec), nu(spec);
    std::fill(mu.begin(), mu.end(), config.mu_const);
    std::fill(nu.begin(), nu.end(), config.nu_const);
    return {std::move(mu), std::move(nu)};
  }
  if (config.generator == "radial_stretch") {
    ComplexField mu(spec), nu(spec);
    const double r2 = config.support_radius * config.support_radius;
    for (int iy = 0; iy < spec.n; ++iy) {
      for (int ix = 0; ix < spec.n; ++ix) {
        const std::complex<double> z = spec.z(ix, iy);
        const double n2 = std::norm(z);
        // mu = k * z / conj(z) = k * z^2 / |z|^2 on the punctured support.
        mu(ix, iy) = (n2 > 0.0 && n2 <= r2) ? config.stretch_k * z * z / n2
                                            : std::complex<double>{0.0, 0.0};
      }
    }
    return {std::move(mu), std::move(nu)};
  }
  if (config.generator == "csv") {
    ComplexField mu = read_field_csv(config.csv_mu);
    ComplexField nu = read_field_csv(config.csv_nu);
    if (!(mu.spec() == spec) || !(nu.spec() == spec)) {
      throw ConfigError("coefficient CSV grid does not match [grid]");
    }
    return {std::move(mu), std::move(nu)};
  }
  throw ConfigError("generator '" + config.generator + "' does not produce general coefficients");
}

/// Exact plane solution of the radial-stretch equation with seed 1:
/// z * (|z|/r0)^a inside the support disk (a = 2k/(1-k)), z outside. The
/// displacement is supported on the disk, so the map is exactly of the
/// periodic-principal form and doubles as a solver oracle.
ComplexField radial_stretch_oracle(const GridSpec& spec, double k, double r0,
                                   std::complex<double> seed) {
  const double a = 2.0 * k / (1.0 - k);
  ComplexField values(spec);
  for (int iy = 0; iy < spec.n; ++iy) {
    for (int ix = 0; ix < spec.n; ++ix) {
      const std::complex<double> z = spec.z(ix, iy);
      const double r = std::abs(z);
      values(ix, iy) = seed * ((r > 0.0 && r <= r0) ? z * std::pow(r / r0, a) : z);
    }
  }
  return values;
}

ComplexField real_as_complex(const RealField& f) {
  ComplexField out(f.spec());
  for (int iy = 0; iy < f.spec().n; ++iy) {
    for (int ix = 0; ix < f.spec().n; ++ix) out(ix, iy) = {f(ix, iy), 0.0};
  }
  return out;
}

// ---------------------------------------------------------------------------
// Check bookkeeping
// ---------------------------------------------------------------------------

struct Metrics {
  std::map<std::string, double> num;
  std::map<std::string, std::string> text;
  std::map<std::string, bool> flag;

  bool has_num(const std::string& k) const { return num.count(k) != 0; }
};

struct CheckResult {
  std::string name;
  std::string relation;  // "<=", ">=", "=="
  njson value;
  njson bound;
  bool passed = false;
};

void push_check(std::vector<CheckResult>& out, const Metrics& m,
                const std::string& name, const std::string& metric,
                const std::string& relation, double bound) {
  CheckResult c;
  c.name = name;
  c.relation = relation;
  c.bound = bound;
  if (!m.has_num(metric)) {
    c.value = "unavailable (stage skipped)";
    c.passed = false;
  } else {
    const double v = m.num.at(metric);
    c.value = v;
    c.passed = relation == ">=" ? v >= bound : v <= bound;
  }
  out.push_back(std::move(c));
}

std::vector<CheckResult> evaluate_checks(const ScenarioConfig& config, const Metrics& m) {
  std::vector<CheckResult> out;
  static const std::map<std::string, std::pair<std::string, std::string>> simple = {
      // expectation key -> {metric, relation}
      {"phi_residual_max", {"phi_residual", "<="}},
      {"psi_residual_max", {"psi_residual", "<="}},
      {"reduced_residual_max", {"reduced_residual", "<="}},
      {"oracle_rel_l2_max", {"oracle_rel_l2", "<="}},
      {"pairing_sup_max", {"pairing_sup", "<="}},
      {"zero_fraction_max", {"zero_fraction", "<="}},
      {"zero_fraction_min", {"zero_fraction", ">="}},
      {"chain_rule_residual_max", {"chain_rule_residual", "<="}},
      {"im_fw_negative_fraction_max", {"im_fw_negative_fraction", "<="}},
      {"vx_residual_max", {"vx_residual", "<="}},
      {"uy_residual_max", {"uy_residual", "<="}},
      {"uy_mixed_fraction_max", {"uy_mixed_fraction", "<="}},
      {"weak_residual_max", {"weak_residual", "<="}},
      {"adjoint_residual_max", {"adjoint_residual", "<="}},
      {"bridging_residual_max", {"bridging_residual", "<="}},
      {"c0_max", {"c0_empirical", "<="}},
      {"c0_rung_spread_max", {"c0_rung_spread", "<="}},
      {"iterations_max_phi", {"iterations_phi", "<="}},
      {"iterations_max_psi", {"iterations_psi", "<="}},
  };
  for (const auto& e : config.expectations) {
    if (auto it = simple.find(e.key); it != simple.end()) {
      push_check(out, m, e.key, it->second.first, it->second.second, e.number);
      continue;
    }
    if (e.key == "pairing_const") {
      push_check(out, m, "pairing_const", "pairing_dev", "<=",
                 expect_number_or(config, "pairing_tol", 1e-12));
    } else if (e.key == "lambda_w_const_re") {
      push_check(out, m, "lambda_w_const", "lambda_w_dev", "<=",
                 expect_number_or(config, "lambda_w_tol", 1e-12));
    } else if (e.key == "lambda_verdict") {
      CheckResult c;
      c.name = "lambda_verdict";
      c.relation = "==";
      c.bound = e.text;
      if (auto it = m.text.find("lambda_verdict"); it != m.text.end()) {
        c.value = it->second;
        c.passed = it->second == e.text;
      } else {
        c.value = "unavailable (stage skipped)";
      }
      out.push_back(std::move(c));
    } else if (e.key == "degenerate") {
      CheckResult c;
      c.name = "degenerate";
      c.relation = "==";
      c.bound = e.flag;
      if (auto it = m.flag.find("degenerate"); it != m.flag.end()) {
        c.value = it->second;
        c.passed = it->second == e.flag;
      } else {
        c.value = "unavailable (stage skipped)";
      }
      out.push_back(std::move(c));
    }
    // pairing_tol / lambda_w_tol / lambda_w_const_im / zero_fraction_tau_rel /
    // oracle are parameters of other checks, not checks themselves.
  }
  // Implicit invariants, active whenever their stage produced numbers.
  if (m.has_num("lambda_sup")) {
    push_check(out, m, "lambda_w_within_bound", "lambda_sup", "<=",
               m.num.at("k_prime_bound") + 1e-9);
  }
  if (m.has_num("ratio_min")) {
    push_check(out, m, "ratio_floor", "ratio_min", ">=",
               1.0 / std::sqrt(kTwoPi / 2.0) - 1e-3);
  }
  return out;
}

njson checks_to_json(const std::vector<CheckResult>& checks) {
  njson arr = njson::array();
  for (const auto& c : checks) {
    arr.push_back({{"name", c.name},
                   {"relation", c.relation},
                   {"value", c.value},
                   {"bound", c.bound},
                   {"passed", c.passed}});
  }
  return arr;
}

const char* exit_code_label(int code) {
  switch (code) {
    case 0: return "ok";
    case 2: return "config";
    case 3: return "convergence";
    default: return "verification";
  }
}

njson scenario_echo(const ScenarioConfig& config) {
  njson equation = {{"kind", config.equation_kind}, {"generator", config.generator}};
  if (config.generator == "constant") {
    if (config.equation_kind == "reduced") {
      equation["lambda"] = to_json(config.lambda_const);
    } else {
      equation["mu"] = to_json(config.mu_const);
      equation["nu"] = to_json(config.nu_const);
    }
  } else if (config.generator == "smooth_bump") {
    equation["amp"] = to_json(config.bump_amp);
    equation["center"] = to_json(config.bump_center);
    equation["width"] = config.bump_width;
  } else if (config.generator == "radial_stretch") {
    equation["k"] = config.stretch_k;
    equation["support_radius"] = config.support_radius;
  } else if (config.generator == "csv") {
    if (!config.csv_lambda.empty()) equation["lambda_csv"] = config.csv_lambda.string();
    if (!config.csv_mu.empty()) equation["mu_csv"] = config.csv_mu.string();
    if (!config.csv_nu.empty()) equation["nu_csv"] = config.csv_nu.string();
  }

  njson family = {{"mode", config.family_mode}};
  if (config.family_mode == "scaled_copy") family["scale"] = config.copy_scale;
  if (config.family_mode == "affine_pair") {
    family["phi_a"] = to_json(config.phi_a);
    family["phi_b"] = to_json(config.phi_b);
    family["psi_a"] = to_json(config.psi_a);
    family["psi_b"] = to_json(config.psi_b);
  }

  return {{"name", config.name},
          {"description", config.description},
          {"source", config.source_path.string()},
          {"grid", {{"n", config.grid.n}, {"side", config.grid.side}}},
          {"equation", equation},
          {"family", family},
          {"solver",
           {{"tol", config.tol}, {"max_iter", config.max_iter}, {"dealias", config.dealias}}},
          {"verification",
           {{"tau_rel", config.tau_rel},
            {"lambda_samples", config.lambda_samples},
            {"bump_randomized", config.bump_randomized},
            {"disk_centers", config.disk_centers},
            {"disk_ladder", config.disk_ladder},
            {"seeds",
             {{"lambda", config.lambda_seed},
              {"bump", config.bump_seed},
              {"disk", config.disk_seed}}},
            {"pair_residual_tol", config.pair_residual_tol},
            {"sign_band_rel", config.sign_band_rel},
            {"run_factorization", config.run_factorization},
            {"run_elliptic", config.run_elliptic},
            {"run_reverse_holder", config.run_reverse_holder}}}};
}

njson sign_stats_json(const SignStatistics& s) {
  return {{"positive_fraction", s.positive_fraction},
          {"negative_fraction", s.negative_fraction},
          {"zero_fraction", s.zero_fraction},
          {"band", s.band}};
}

njson zero_fractions_json(const std::vector<double>& tau_rel,
                          const std::vector<double>& tau_abs,
                          const std::vector<double>& fractions) {
  njson arr = njson::array();
  for (std::size_t i = 0; i < tau_rel.size(); ++i) {
    arr.push_back(
        {{"tau_rel", tau_rel[i]}, {"tau_abs", tau_abs[i]}, {"fraction", fractions[i]}});
  }
  return arr;
}

/// Index of the tau used for summary/check fractions: nearest to the
/// requested relative threshold (default 1e-6), first on ties.
std::size_t select_tau_index(const std::vector<double>& tau_rel, double wanted) {
  std::size_t best = 0;
  double best_gap = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < tau_rel.size(); ++i) {
    const double gap = std::abs(tau_rel[i] - wanted);
    if (gap < best_gap) {
      best_gap = gap;
      best = i;
    }
  }
  return best;
}

}  // namespace

// ---------------------------------------------------------------------------
// Seeds
// ---------------------------------------------------------------------------

int classify_exit_code(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const IoError*>(&e) ||
      dynamic_cast<const DomainError*>(&e) || dynamic_cast<const EllipticityError*>(&e)) {
    return 2;
  }
  if (dynamic_cast<const ConvergenceError*>(&e)) return 3;
  return 1;  // degeneracy, sampling, failed verification invariants
}

std::uint64_t derive_seed(std::uint64_t master, const std::string& purpose) {
  // FNV-1a over the little-endian master bytes followed by the purpose
  // string: stable across platforms and independent of library hash seeds.
  std::uint64_t h = 14695981039346656037ull;
  const auto mix = [&h](unsigned char byte) {
    h ^= byte;
    h *= 1099511628211ull;
  };
  for (int i = 0; i < 8; ++i) mix(static_cast<unsigned char>(master >> (8 * i)));
  for (char c : purpose) mix(static_cast<unsigned char>(c));
  return h;
}

// ---------------------------------------------------------------------------
// Loading
// ---------------------------------------------------------------------------

ScenarioConfig load_scenario(const std::filesystem::path& path,
                             std::uint64_t master_seed) {
  const TomlDocument doc = TomlDocument::parse_file(path);
  const std::string origin = path.string();
  ScenarioConfig config;
  config.source_path = path;

  static const std::set<std::string> known_tables = {
      "scenario", "grid", "equation", "family", "solver", "verification", "output", "expect"};
  for (const auto& table : doc.tables()) {
    if (!known_tables.count(table)) {
      throw ConfigError(origin + ": unknown table [" + table + "]");
    }
  }
  for (const auto& required : {"equation", "family"}) {
    if (doc.keys(required).empty() &&
        std::find(doc.tables().begin(), doc.tables().end(), required) == doc.tables().end()) {
      throw ConfigError(origin + ": missing required table [" + std::string(required) + "]");
    }
  }

  require_keys_subset(doc, "scenario", {"name", "description"}, origin);
  config.name = doc.get_string_or("scenario", "name", path.stem().string());
  config.description = doc.get_string_or("scenario", "description", "");
  if (config.name.empty()) throw ConfigError(origin + ": scenario name is empty");

  require_keys_subset(doc, "grid", {"n", "side"}, origin);
  config.grid.n = static_cast<int>(doc.get_int_or("grid", "n", 128));
  config.grid.side = doc.get_double_or("grid", "side", kTwoPi);
  config.grid.validate();

  // --- [equation] ---------------------------------------------------------
  config.equation_kind = doc.get_string("equation", "kind");
  config.generator = doc.get_string("equation", "generator");
  std::set<std::string> equation_keys = {"kind", "generator"};
  if (config.equation_kind == "reduced") {
    if (config.generator == "constant") {
      equation_keys.insert({"lambda_re", "lambda_im"});
      config.lambda_const = get_complex(doc, "equation", "lambda", {0.0, 0.0});
    } else if (config.generator == "smooth_bump") {
      equation_keys.insert({"amp_re", "amp_im", "center_x", "center_y", "width"});
      config.bump_amp = get_complex(doc, "equation", "amp", {0.0, 0.0});
      config.bump_center = {doc.get_double_or("equation", "center_x", 0.0),
                            doc.get_double_or("equation", "center_y", 0.0)};
      config.bump_width = doc.get_double("equation", "width");
      if (!(config.bump_width > 0.0)) {
        throw ConfigError(origin + ": smooth_bump width must be positive");
      }
    } else if (config.generator == "csv") {
      equation_keys.insert("lambda_csv");
      config.csv_lambda = doc.get_string("equation", "lambda_csv");
      if (config.csv_lambda.is_relative()) {
        config.csv_lambda = path.parent_path() / config.csv_lambda;
      }
    } else {
      throw ConfigError(origin + ": reduced generator must be constant, smooth_bump, or csv");
    }
  } else if (config.equation_kind == "general") {
    if (config.generator == "constant") {
      equation_keys.insert({"mu_re", "mu_im", "nu_re", "nu_im"});
      config.mu_const = get_complex(doc, "equation", "mu", {0.0, 0.0});
      config.nu_const = get_complex(doc, "equation", "nu", {0.0, 0.0});
    } else if (config.generator == "radial_stretch") {
      equation_keys.insert({"k", "support_radius"});
      config.stretch_k = doc.get_double("equation", "k");
      config.support_radius = doc.get_double_or("equation", "support_radius", 1.0);
      if (!(config.stretch_k >= 0.0 && config.stretch_k < 1.0)) {
        throw ConfigError(origin + ": radial_stretch k must lie in [0, 1)");
      }
      if (!(config.support_radius > 0.0 &&
            2.0 * config.support_radius < config.grid.side)) {
        throw ConfigError(origin + ": radial_stretch support must fit inside the cell");
      }
    } else if (config.generator == "csv") {
      equation_keys.insert({"mu_csv", "nu_csv"});
      config.csv_mu = doc.get_string("equation", "mu_csv");
      config.csv_nu = doc.get_string("equation", "nu_csv");
      if (config.csv_mu.is_relative()) config.csv_mu = path.parent_path() / config.csv_mu;
      if (config.csv_nu.is_relative()) config.csv_nu = path.parent_path() / config.csv_nu;
    } else {
      throw ConfigError(origin + ": general generator must be constant, radial_stretch, or csv");
    }
  } else {
    throw ConfigError(origin + ": equation kind must be 'reduced' or 'general'");
  }
  require_keys_subset(doc, "equation", equation_keys, origin);

  // --- [family] ------------------------------------------------------------
  config.family_mode = doc.get_string("family", "mode");
  std::set<std::string> family_keys = {"mode"};
  static const std::set<std::string> known_modes = {
      "identity_plus_solved", "two_solved", "affine_pair", "scaled_copy", "psi_square"};
  if (!known_modes.count(config.family_mode)) {
    throw ConfigError(origin + ": unknown family mode '" + config.family_mode + "'");
  }
  if (config.family_mode == "scaled_copy") {
    family_keys.insert("scale");
    config.copy_scale = doc.get_double_or("family", "scale", 2.0);
    if (!std::isfinite(config.copy_scale) || config.copy_scale == 0.0) {
      throw ConfigError(origin + ": scaled_copy scale must be finite and nonzero");
    }
  }
  if (config.family_mode == "affine_pair") {
    family_keys.insert({"phi_a", "phi_b", "psi_a", "psi_b"});
    config.phi_a = get_complex_array(doc, "family", "phi_a", {1.0, 0.0}, origin);
    config.phi_b = get_complex_array(doc, "family", "phi_b", {0.0, 0.0}, origin);
    config.psi_a = get_complex_array(doc, "family", "psi_a", {0.0, 1.0}, origin);
    config.psi_b = get_complex_array(doc, "family", "psi_b", {0.0, 0.0}, origin);
  }
  if (config.family_mode == "psi_square" && !(config.equation_kind == "general" &&
                                              config.generator == "constant" &&
                                              config.mu_const == std::complex<double>{} &&
                                              config.nu_const == std::complex<double>{})) {
    throw ConfigError(origin + ": psi_square requires the general equation with mu = nu = 0");
  }
  require_keys_subset(doc, "family", family_keys, origin);

  // --- [solver] ------------------------------------------------------------
  require_keys_subset(doc, "solver", {"tol", "max_iter", "dealias"}, origin);
  config.tol = doc.get_double_or("solver", "tol", 1e-10);
  config.max_iter = static_cast<int>(doc.get_int_or("solver", "max_iter", 400));
  config.dealias = doc.get_bool_or("solver", "dealias", false);
  if (!(config.tol > 0.0 && config.tol < 1.0)) {
    throw ConfigError(origin + ": solver tol must lie in (0, 1)");
  }
  if (config.max_iter < 1) throw ConfigError(origin + ": max_iter must be >= 1");

  // --- [verification] ------------------------------------------------------
  require_keys_subset(doc, "verification",
                      {"tau_rel", "lambda_samples", "bump_randomized", "disk_centers",
                       "disk_ladder", "lambda_seed", "bump_seed", "disk_seed",
                       "pair_residual_tol", "sign_band_rel", "run_factorization",
                       "run_elliptic", "run_reverse_holder"},
                      origin);
  if (doc.has("verification", "tau_rel")) {
    config.tau_rel = doc.get_double_array("verification", "tau_rel");
  }
  if (config.tau_rel.empty()) throw ConfigError(origin + ": tau_rel must be nonempty");
  for (double tau : config.tau_rel) {
    if (!(tau > 0.0 && tau < 1.0)) {
      throw ConfigError(origin + ": tau_rel entries must lie in (0, 1)");
    }
  }
  config.lambda_samples = doc.get_int_or("verification", "lambda_samples", 100000);
  config.bump_randomized =
      static_cast<int>(doc.get_int_or("verification", "bump_randomized", 20));
  config.disk_centers = static_cast<int>(doc.get_int_or("verification", "disk_centers", 50));
  if (config.lambda_samples < 1) throw ConfigError(origin + ": lambda_samples must be >= 1");
  if (config.bump_randomized < 0) throw ConfigError(origin + ": bump_randomized must be >= 0");
  if (config.disk_centers < 1) throw ConfigError(origin + ": disk_centers must be >= 1");
  if (doc.has("verification", "disk_ladder")) {
    config.disk_ladder.clear();
    for (auto v : doc.get_int_array("verification", "disk_ladder")) {
      config.disk_ladder.push_back(static_cast<int>(v));
    }
  }
  if (config.disk_ladder.empty()) throw ConfigError(origin + ": disk_ladder must be nonempty");
  for (int rung : config.disk_ladder) {
    if (rung < 1) throw ConfigError(origin + ": disk_ladder rungs must be >= 1");
  }
  const auto seed_or_derived = [&](const char* key, const char* purpose) {
    if (doc.has("verification", key)) {
      return static_cast<std::uint64_t>(doc.get_int("verification", key));
    }
    return derive_seed(master_seed, config.name + ":" + purpose);
  };
  config.lambda_seed = seed_or_derived("lambda_seed", "lambda");
  config.bump_seed = seed_or_derived("bump_seed", "bump");
  config.disk_seed = seed_or_derived("disk_seed", "disk");
  config.pair_residual_tol = doc.get_double_or("verification", "pair_residual_tol",
                                               std::max(10.0 * config.tol, 1e-12));
  if (!(config.pair_residual_tol > 0.0)) {
    throw ConfigError(origin + ": pair_residual_tol must be positive");
  }
  config.sign_band_rel = doc.get_double_or("verification", "sign_band_rel", 1e-12);
  if (!(config.sign_band_rel >= 0.0)) {
    throw ConfigError(origin + ": sign_band_rel must be nonnegative");
  }
  config.run_factorization = doc.get_bool_or("verification", "run_factorization", true);
  config.run_elliptic = doc.get_bool_or("verification", "run_elliptic", true);
  config.run_reverse_holder = doc.get_bool_or("verification", "run_reverse_holder", true);

  require_keys_subset(doc, "output", {"subdir"}, origin);
  config.output_subdir = doc.get_string_or("output", "subdir", config.name);

  // --- [expect] -------------------------------------------------------------
  const auto& vocab = expect_vocabulary();
  for (const auto& key : doc.keys("expect")) {
    auto it = vocab.find(key);
    if (it == vocab.end()) {
      throw ConfigError(origin + ": unknown expectation '" + key + "'");
    }
    ScenarioConfig::Expectation e;
    e.key = key;
    switch (it->second) {
      case ExpectKind::Number:
        e.kind = ScenarioConfig::Expectation::Kind::Number;
        e.number = doc.get_double("expect", key);
        break;
      case ExpectKind::Text:
        e.kind = ScenarioConfig::Expectation::Kind::Text;
        e.text = doc.get_string("expect", key);
        break;
      case ExpectKind::Flag:
        e.kind = ScenarioConfig::Expectation::Kind::Flag;
        e.flag = doc.get_bool_or("expect", key, false);
        break;
    }
    config.expectations.push_back(std::move(e));
  }

  if (const auto* oracle = find_expect(config, "oracle")) {
    if (oracle->text == "affine") {
      if (config.generator != "constant") {
        throw ConfigError(origin + ": the affine oracle requires the constant generator");
      }
    } else if (oracle->text == "radial_stretch") {
      if (config.generator != "radial_stretch" || config.family_mode != "two_solved") {
        throw ConfigError(origin +
                          ": the radial_stretch oracle requires its generator and two_solved");
      }
    } else {
      throw ConfigError(origin + ": oracle must be 'affine' or 'radial_stretch'");
    }
    if (!has_expect(config, "oracle_rel_l2_max")) {
      throw ConfigError(origin + ": oracle requires oracle_rel_l2_max");
    }
  }
  if (has_expect(config, "oracle_rel_l2_max") && !has_expect(config, "oracle")) {
    throw ConfigError(origin + ": oracle_rel_l2_max requires an oracle");
  }
  if (has_expect(config, "lambda_verdict")) {
    const std::string v = find_expect(config, "lambda_verdict")->text;
    if (v != "all-negative" && v != "all-positive" && v != "mixed" && v != "degenerate") {
      throw ConfigError(origin + ": unknown lambda_verdict expectation '" + v + "'");
    }
  }
  if (has_expect(config, "zero_fraction_max") || has_expect(config, "zero_fraction_min")) {
    const double wanted = expect_number_or(config, "zero_fraction_tau_rel", 1e-6);
    bool found = false;
    for (double tau : config.tau_rel) {
      if (std::abs(tau - wanted) <= 1e-9 * std::max(tau, wanted)) found = true;
    }
    if (!found) {
      throw ConfigError(origin + ": zero_fraction_tau_rel is not one of tau_rel");
    }
  }

  return config;
}

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

ScenarioOutcome run_scenario(const ScenarioConfig& config, const RunOptions& options) {
  ScenarioOutcome outcome;
  outcome.summary.name = config.name;
  outcome.summary.n = config.grid.n;
  outcome.summary.kind = config.equation_kind;
  outcome.summary.k = kNaN;
  outcome.summary.phi_residual = kNaN;
  outcome.summary.psi_residual = kNaN;
  outcome.summary.pairing_sup = kNaN;
  outcome.summary.zero_fraction = kNaN;
  outcome.summary.chain_rule_residual = kNaN;
  outcome.summary.weak_residual = kNaN;
  outcome.summary.adjoint_residual = kNaN;
  outcome.summary.c0_empirical = kNaN;

  const std::string subdir = config.output_subdir.empty() ? config.name : config.output_subdir;
  outcome.output_dir = options.output_root / subdir;

  njson report;
  report["scenario"] = scenario_echo(config);
  StageTimer timer;
  Metrics metrics;
  std::string stage = "setup";

  try {
    // --- coefficients -------------------------------------------------------
    stage = "coefficients";
    std::optional<ReducedCoefficient> reduced;
    std::optional<BeltramiCoefficients> coeffs;
    {
      ScopedStage t(timer, stage);
      if (config.equation_kind == "reduced") {
        reduced = ReducedCoefficient::make(generated_lambda(config));
        coeffs = reduced_to_general(*reduced);
      } else {
        auto [mu, nu] = generated_mu_nu(config);
        coeffs = BeltramiCoefficients::make(std::move(mu), std::move(nu));
      }
    }
    metrics.num["k"] = coeffs->k();
    outcome.summary.k = coeffs->k();
    report["equation"] = {{"k", coeffs->k()},
                          {"distortion", coeffs->distortion()},
                          {"kind", config.equation_kind}};
    if (reduced) report["equation"]["k_prime"] = reduced->k_prime();

    // --- family members -----------------------------------------------------
    stage = "solve";
    QCSolution phi, psi;
    std::string phi_source, psi_source;
    {
      ScopedStage t(timer, stage);
      SolveOptions solve_opts;
      solve_opts.tol = config.tol;
      solve_opts.max_iter = config.max_iter;
      solve_opts.dealias = config.dealias;
      const auto solve_with = [&](std::complex<double> seed) {
        SolveOptions o = solve_opts;
        o.seed = seed;
        return solve_principal(*coeffs, o);
      };
      if (config.family_mode == "identity_plus_solved") {
        phi = QCSolution::affine(config.grid, {1.0, 0.0}, {0.0, 0.0});
        phi_source = "affine";
        psi = solve_with({0.0, 1.0});
        psi_source = "solved";
      } else if (config.family_mode == "two_solved") {
        phi = solve_with({1.0, 0.0});
        phi_source = "solved";
        psi = solve_with({0.0, 1.0});
        psi_source = "solved";
      } else if (config.family_mode == "affine_pair") {
        phi = QCSolution::affine(config.grid, config.phi_a, config.phi_b);
        phi_source = "affine";
        psi = QCSolution::affine(config.grid, config.psi_a, config.psi_b);
        psi_source = "affine";
      } else if (config.family_mode == "scaled_copy") {
        phi = solve_with({1.0, 0.0});
        phi_source = "solved";
        psi = phi.combine(config.copy_scale, phi, 0.0);
        psi_source = "scaled copy of phi";
      } else {  // psi_square
        phi = QCSolution::affine(config.grid, {1.0, 0.0}, {0.0, 0.0});
        phi_source = "affine";
        const ComplexField z = coordinate_field(config.grid);
        ComplexField values(config.grid), fz(config.grid), fzbar(config.grid);
        for (int i = 0; i < config.grid.n * config.grid.n; ++i) {
          values.data()[i] = z.data()[i] * z.data()[i];
          fz.data()[i] = 2.0 * z.data()[i];
          fzbar.data()[i] = 0.0;
        }
        psi = QCSolution::from_fields(std::move(values), std::move(fz), std::move(fzbar));
        psi_source = "wrapped";
      }
    }
    metrics.num["phi_residual"] = residual_general(phi, *coeffs);
    metrics.num["psi_residual"] = residual_general(psi, *coeffs);
    metrics.num["iterations_phi"] = phi.iterations();
    metrics.num["iterations_psi"] = psi.iterations();
    if (reduced) {
      metrics.num["reduced_residual"] = std::max(residual_reduced(phi, *reduced),
                                                 residual_reduced(psi, *reduced));
    }
    outcome.summary.phi_residual = metrics.num["phi_residual"];
    outcome.summary.psi_residual = metrics.num["psi_residual"];

    const auto member_json = [&](const QCSolution& f, const std::string& source,
                                 double equation_residual) {
      njson j = {{"source", source},
                 {"a", to_json(f.a())},
                 {"b", to_json(f.b())},
                 {"iterations", f.iterations()},
                 {"fixed_point_residual", f.residual()},
                 {"equation_residual", equation_residual},
                 {"step_count", f.step_norms().size()}};
      return j;
    };
    report["solver"] = {{"phi", member_json(phi, phi_source, metrics.num["phi_residual"])},
                        {"psi", member_json(psi, psi_source, metrics.num["psi_residual"])}};
    if (reduced) report["solver"]["reduced_residual"] = metrics.num["reduced_residual"];

    // --- oracle comparison ---------------------------------------------------
    if (const auto* oracle = find_expect(config, "oracle")) {
      stage = "oracle";
      ScopedStage t(timer, stage);
      ComplexField phi_oracle(config.grid), psi_oracle(config.grid);
      if (oracle->text == "affine") {
        // A constant-coefficient equation is solved exactly by the affine
        // map seed*z + b*conj(z) with b = mu*seed + nu*conj(seed).
        const auto affine_values = [&](std::complex<double> seed) {
          const std::complex<double> mu0 =
              config.equation_kind == "reduced" ? std::complex<double>(0.0, -0.5) *
                                                      config.lambda_const
                                                : config.mu_const;
          const std::complex<double> nu0 =
              config.equation_kind == "reduced"
                  ? std::complex<double>(0.0, 0.5) * config.lambda_const
                  : config.nu_const;
          const std::complex<double> b = mu0 * seed + nu0 * std::conj(seed);
          return QCSolution::affine(config.grid, seed, b).values();
        };
        phi_oracle = phi_source == "solved" ? affine_values(phi.a())
                                            : phi.values();
        psi_oracle = psi_source == "solved" ? affine_values(psi.a())
                                            : psi.values();
      } else {  // radial_stretch
        phi_oracle = radial_stretch_oracle(config.grid, config.stretch_k,
                                           config.support_radius, phi.a());
        psi_oracle = radial_stretch_oracle(config.grid, config.stretch_k,
                                           config.support_radius, psi.a());
      }
      const auto rel_l2 = [](const ComplexField& got, const ComplexField& want) {
        ComplexField diff = got;
        for (int i = 0; i < want.spec().n * want.spec().n; ++i) {
          diff.data()[i] -= want.data()[i];
        }
        return l2_norm(diff) / std::max(l2_norm(want), kTiny);
      };
      const double phi_err = rel_l2(phi.values(), phi_oracle);
      const double psi_err = rel_l2(psi.values(), psi_oracle);
      metrics.num["oracle_rel_l2"] = std::max(phi_err, psi_err);
      report["oracle"] = {{"kind", oracle->text},
                          {"phi_rel_l2", phi_err},
                          {"psi_rel_l2", psi_err},
                          {"rel_l2", metrics.num["oracle_rel_l2"]}};
    }

    // --- pairing -------------------------------------------------------------
    stage = "pair";
    std::optional<LinearFamilyPair> pair;
    bool orientation_flipped = false;
    LambdaSignReport lambda_report;
    std::optional<std::array<double, 2>> dependence;
    {
      ScopedStage t(timer, stage);
      pair = LinearFamilyPair::make(phi, psi, *coeffs, config.pair_residual_tol);
      dependence = degenerate_pair_detect(pair->phi, pair->psi);
      lambda_report = lambda_sign_field(pair->phi, pair->psi,
                                        static_cast<std::size_t>(config.lambda_samples),
                                        config.lambda_seed);
      if (lambda_report.verdict == SignVerdict::AllPositive) {
        // Negating one member flips Lambda exactly; re-orient so the
        // all-negative normalization holds downstream.
        psi = psi.combine(-1.0, psi, 0.0);
        pair = LinearFamilyPair::make(phi, psi, *coeffs, config.pair_residual_tol);
        const double old_min = lambda_report.min, old_max = lambda_report.max;
        lambda_report.min = -old_max;
        lambda_report.max = -old_min;
        lambda_report.verdict = SignVerdict::AllNegative;
        orientation_flipped = true;
      }
    }
    const bool degenerate = dependence.has_value();
    metrics.flag["degenerate"] = degenerate;
    metrics.text["lambda_verdict"] = to_string(lambda_report.verdict);
    outcome.summary.lambda_verdict = metrics.text["lambda_verdict"];
    outcome.summary.degenerate = degenerate;

    double pairing_min = pair->pairing.data()[0], pairing_max = pair->pairing.data()[0];
    for (int i = 0; i < config.grid.n * config.grid.n; ++i) {
      pairing_min = std::min(pairing_min, pair->pairing.data()[i]);
      pairing_max = std::max(pairing_max, pair->pairing.data()[i]);
    }
    const double pairing_sup = std::max(std::abs(pairing_min), std::abs(pairing_max));
    metrics.num["pairing_sup"] = pairing_sup;
    outcome.summary.pairing_sup = pairing_sup;
    if (const auto* c = find_expect(config, "pairing_const")) {
      metrics.num["pairing_dev"] =
          std::max(std::abs(pairing_min - c->number), std::abs(pairing_max - c->number));
    }

    stage = "zero_measure";
    std::vector<double> tau_abs;
    std::vector<double> fractions;
    {
      ScopedStage t(timer, stage);
      const double scale = std::max(pairing_sup, kTiny);
      for (double tau : config.tau_rel) tau_abs.push_back(tau * scale);
      fractions = zero_measure_estimate(pair->pairing, tau_abs);
    }
    const std::size_t tau_index = select_tau_index(
        config.tau_rel, expect_number_or(config, "zero_fraction_tau_rel", 1e-6));
    metrics.num["zero_fraction"] = fractions[tau_index];
    outcome.summary.zero_fraction = fractions[tau_index];

    report["theorem_1_2"] = {
        {"pairing_min", pairing_min},
        {"pairing_max", pairing_max},
        {"pairing_sup", pairing_sup},
        {"zero_fractions", zero_fractions_json(config.tau_rel, tau_abs, fractions)},
        {"lambda_sign",
         {{"min", lambda_report.min},
          {"max", lambda_report.max},
          {"verdict", metrics.text["lambda_verdict"]},
          {"samples", lambda_report.samples},
          {"resamples", lambda_report.resamples},
          {"band", lambda_report.band}}},
        {"orientation_flipped", orientation_flipped},
        {"degenerate",
         degenerate ? njson({{"a", (*dependence)[0]}, {"b", (*dependence)[1]}})
                    : njson(nullptr)}};

    // --- factorization --------------------------------------------------------
    if (!config.run_factorization) {
      report["theorem_1_2"]["factorization"] = {{"skipped", "disabled by configuration"}};
    } else if (degenerate) {
      report["theorem_1_2"]["factorization"] = {{"skipped", "degenerate family"}};
    } else {
      stage = "factorization";
      ScopedStage t(timer, stage);
      const Factorization fact = factorize(*pair);
      const ChainRuleReport chain = chain_rule_identity_residual(*pair, fact);
      metrics.num["chain_rule_residual"] = chain.residual;
      metrics.num["lambda_sup"] = fact.lambda_sup;
      metrics.num["k_prime_bound"] = fact.k_prime_bound;
      metrics.num["im_fw_negative_fraction"] = chain.im_fw_signs.negative_fraction;
      if (find_expect(config, "lambda_w_const_re")) {
        const std::complex<double> want{expect_number_or(config, "lambda_w_const_re", 0.0),
                                        expect_number_or(config, "lambda_w_const_im", 0.0)};
        double dev = 0.0;
        for (int i = 0; i < config.grid.n * config.grid.n; ++i) {
          dev = std::max(dev, std::abs(fact.lambda_w.data()[i] - want));
        }
        metrics.num["lambda_w_dev"] = dev;
      }
      outcome.summary.chain_rule_residual = chain.residual;
      report["theorem_1_2"]["factorization"] = {
          {"masked_fraction", fact.masked_fraction},
          {"j_floor", fact.j_floor},
          {"lambda_sup", fact.lambda_sup},
          {"k_prime_bound", fact.k_prime_bound},
          {"chain_rule_residual", chain.residual},
          {"im_fw_signs", sign_stats_json(chain.im_fw_signs)}};
    }

    // --- real-component relations ---------------------------------------------
    std::optional<ComponentRelations> relations;
    if (!reduced) {
      report["component_relations"] = {
          {"skipped", "general-form equation (no reduced coefficient)"}};
    } else {
      stage = "component_relations";
      ScopedStage t(timer, stage);
      relations = component_relations(psi, *reduced);
      metrics.num["vx_residual"] = relations->vx_residual;
      metrics.num["uy_residual"] = relations->uy_residual;
      metrics.num["uy_mixed_fraction"] = std::min(relations->uy_signs.positive_fraction,
                                                  relations->uy_signs.negative_fraction);
      RealField im_fz(config.grid);
      for (int i = 0; i < config.grid.n * config.grid.n; ++i) {
        im_fz.data()[i] = psi.fz().data()[i].imag();
      }
      const double scale = std::max(sup_norm(im_fz), kTiny);
      std::vector<double> im_taus;
      for (double tau : config.tau_rel) im_taus.push_back(tau * scale);
      report["component_relations"] = {
          {"vx_residual", relations->vx_residual},
          {"uy_residual", relations->uy_residual},
          {"uy_signs", sign_stats_json(relations->uy_signs)},
          {"im_fz_zero_fractions",
           zero_fractions_json(config.tau_rel, im_taus,
                               zero_measure_estimate(im_fz, im_taus))}};
    }

    // --- adjoint elliptic PDE ---------------------------------------------------
    std::optional<EllipticCoefficients> elliptic;
    std::optional<RealField> w_scan;
    if (!reduced) {
      report["adjoint_pde"] = {{"skipped", "general-form equation (no reduced coefficient)"}};
    } else if (!config.run_elliptic) {
      report["adjoint_pde"] = {{"skipped", "disabled by configuration"}};
    } else {
      stage = "elliptic";
      ScopedStage t(timer, stage);
      elliptic = coefficients_from_lambda(*reduced);
      const std::vector<TestBump> bumps =
          TestBump::battery(config.grid, config.bump_randomized, config.bump_seed);
      const Gradient grad_u = real_gradient(psi);
      const WeakFormReport weak =
          weak_divergence_residual(grad_u, *elliptic, bumps, options.threads);
      const WeakFormReport adjoint =
          adjoint_residual(relations->u_y, *elliptic, bumps, options.threads);
      const WeakFormReport bridging =
          bridging_residual(grad_u, *elliptic, bumps, options.threads);
      metrics.num["weak_residual"] = weak.max_residual;
      metrics.num["adjoint_residual"] = adjoint.max_residual;
      metrics.num["bridging_residual"] = bridging.max_residual;
      outcome.summary.weak_residual = weak.max_residual;
      outcome.summary.adjoint_residual = adjoint.max_residual;

      // Adjoint-solution candidate: u_y, oriented to nonnegative mean (both
      // signs satisfy the adjoint equation; the scan wants the nonneg one).
      w_scan = relations->u_y;
      if (mean(*w_scan) < 0.0) {
        for (auto& v : *w_scan) v = -v;
      }
      const double w_sup = std::max(sup_norm(*w_scan), kTiny);
      std::vector<double> w_taus;
      for (double tau : config.tau_rel) w_taus.push_back(tau * w_sup);
      report["adjoint_pde"] = {
          {"K_ell", elliptic->K_ell},
          {"bumps", bumps.size()},
          {"weak_residual", weak.max_residual},
          {"adjoint_residual", adjoint.max_residual},
          {"bridging_residual", bridging.max_residual},
          {"w_zero_fractions",
           zero_fractions_json(config.tau_rel, w_taus,
                               zero_measure_estimate(*w_scan, w_taus))}};
      metrics.num["K_ell"] = elliptic->K_ell;
    }

    // --- reverse Hoelder scan ----------------------------------------------------
    if (!reduced || !elliptic) {
      // adjoint_pde fragment already carries the reason
    } else if (!config.run_reverse_holder) {
      report["adjoint_pde"]["reverse_holder"] = {{"skipped", "disabled by configuration"}};
    } else if (degenerate) {
      report["adjoint_pde"]["reverse_holder"] = {{"skipped", "degenerate family"}};
    } else {
      stage = "reverse_holder";
      ScopedStage t(timer, stage);
      const std::vector<Disk> disks =
          disk_battery(config.grid, config.disk_ladder, config.disk_centers, config.disk_seed);
      const ReverseHolderReport scan = reverse_holder_scan(*w_scan, disks, options.threads);

      std::map<int, double> rung_c0;
      std::map<int, std::pair<std::size_t, std::size_t>> rung_counts;  // total, skipped
      double ratio_min = std::numeric_limits<double>::infinity();
      for (const auto& entry : scan.entries) {
        auto& counts = rung_counts[entry.disk.rung_h];
        ++counts.first;
        if (entry.skipped) {
          ++counts.second;
          continue;
        }
        ratio_min = std::min(ratio_min, entry.ratio);
        auto it = rung_c0.find(entry.disk.rung_h);
        if (it == rung_c0.end()) {
          rung_c0[entry.disk.rung_h] = entry.ratio;
        } else {
          it->second = std::max(it->second, entry.ratio);
        }
      }
      double c0_lo = std::numeric_limits<double>::infinity(), c0_hi = 0.0;
      njson per_rung = njson::array();
      for (const auto& [rung, c0] : rung_c0) {
        c0_lo = std::min(c0_lo, c0);
        c0_hi = std::max(c0_hi, c0);
        per_rung.push_back({{"rung_h", rung},
                            {"disks", rung_counts[rung].first},
                            {"skipped", rung_counts[rung].second},
                            {"c0", c0}});
      }
      metrics.num["c0_empirical"] = scan.c0_empirical;
      metrics.num["c0_rung_spread"] = rung_c0.empty() ? 0.0 : c0_hi / c0_lo - 1.0;
      if (std::isfinite(ratio_min)) metrics.num["ratio_min"] = ratio_min;
      outcome.summary.c0_empirical = scan.c0_empirical;
      report["adjoint_pde"]["reverse_holder"] = {
          {"c0_empirical", scan.c0_empirical},
          {"c0_per_rung", per_rung},
          {"ratio_min", ratio_min},
          {"clipped_negative_fraction", scan.clipped_negative_fraction},
          {"max_negative_excursion_rel", scan.max_negative_excursion_rel},
          {"skipped", scan.skipped_count},
          {"disks", scan.entries.size()},
          {"mean_floor", scan.mean_floor}};
    }

    // --- field dumps ----------------------------------------------------------
    if (options.dump_fields) {
      stage = "dump_fields";
      ScopedStage t(timer, stage);
      const std::filesystem::path dir = outcome.output_dir / "fields";
      std::filesystem::create_directories(dir);
      write_field_csv(dir / "phi_values.csv", phi.values());
      write_field_csv(dir / "phi_fz.csv", phi.fz());
      write_field_csv(dir / "phi_fzbar.csv", phi.fzbar());
      write_field_csv(dir / "psi_values.csv", psi.values());
      write_field_csv(dir / "psi_fz.csv", psi.fz());
      write_field_csv(dir / "psi_fzbar.csv", psi.fzbar());
      write_field_csv(dir / "pairing.csv", real_as_complex(pair->pairing));
      if (reduced) {
        write_field_csv(dir / "lambda.csv", reduced->lambda());
      } else {
        write_field_csv(dir / "mu.csv", coeffs->mu());
        write_field_csv(dir / "nu.csv", coeffs->nu());
      }
      if (relations) write_field_csv(dir / "uy.csv", real_as_complex(relations->u_y));
      if (w_scan) write_field_csv(dir / "w.csv", real_as_complex(*w_scan));
    }

    // --- checks ------------------------------------------------------------------
    stage = "checks";
    if (options.verify) {
      const std::vector<CheckResult> checks = evaluate_checks(config, metrics);
      report["checks"] = checks_to_json(checks);
      outcome.passed = std::all_of(checks.begin(), checks.end(),
                                   [](const CheckResult& c) { return c.passed; });
      if (!outcome.passed) {
        outcome.exit_code = 1;
        outcome.failure_stage = "checks";
        for (const auto& c : checks) {
          if (!c.passed) {
            outcome.failure_reason = "failed check: " + c.name;
            break;
          }
        }
      }
    } else {
      report["checks"] = njson::array();
      outcome.passed = true;
    }
  } catch (const std::exception& e) {
    outcome.exit_code = classify_exit_code(e);
    outcome.passed = false;
    outcome.failure_stage = stage;
    outcome.failure_reason = e.what();
    report["error"] = {{"stage", stage},
                       {"kind", exit_code_label(outcome.exit_code)},
                       {"message", e.what()}};
  }

  outcome.summary.passed = outcome.passed;
  outcome.summary.exit_code = outcome.exit_code;
  report["passed"] = outcome.passed;
  report["exit_code"] = outcome.exit_code;
  if (options.include_timings) report["timings"] = timer.to_json();
  outcome.report_json = report.dump(2) + "\n";

  try {
    std::filesystem::create_directories(outcome.output_dir);
    const std::filesystem::path report_path = outcome.output_dir / "report.json";
    std::ofstream out(report_path, std::ios::binary);
    out << outcome.report_json;
    out.flush();
    if (!out) throw IoError("cannot write " + report_path.string());
  } catch (const std::exception& e) {
    if (outcome.exit_code == 0) {
      outcome.exit_code = 2;
      outcome.passed = false;
      outcome.summary.passed = false;
      outcome.summary.exit_code = 2;
      outcome.failure_stage = "write_report";
      outcome.failure_reason = e.what();
    }
  }
  return outcome;
}

// ---------------------------------------------------------------------------
// Batch
// ---------------------------------------------------------------------------

BatchOutcome batch_run(const std::filesystem::path& dir, std::uint64_t master_seed,
                       const RunOptions& options) {
  if (!std::filesystem::is_directory(dir)) {
    throw ConfigError("not a directory: " + dir.string());
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".toml") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end(), [](const auto& a, const auto& b) {
    return a.filename().string() < b.filename().string();
  });
  if (files.empty()) {
    throw ConfigError("no scenario files (*.toml) under " + dir.string());
  }

  BatchOutcome batch;
  batch.outcomes.resize(files.size());
  std::vector<std::optional<ScenarioConfig>> configs(files.size());
  for (std::size_t i = 0; i < files.size(); ++i) {
    try {
      configs[i] = load_scenario(files[i], master_seed);
    } catch (const std::exception& e) {
      ScenarioOutcome& bad = batch.outcomes[i];
      bad.exit_code = classify_exit_code(e);
      bad.failure_stage = "load";
      bad.failure_reason = e.what();
      bad.summary.name = files[i].stem().string();
      bad.summary.exit_code = bad.exit_code;
      bad.summary.n = 0;
      bad.summary.k = kNaN;
      bad.summary.phi_residual = kNaN;
      bad.summary.psi_residual = kNaN;
      bad.summary.pairing_sup = kNaN;
      bad.summary.zero_fraction = kNaN;
      bad.summary.chain_rule_residual = kNaN;
      bad.summary.weak_residual = kNaN;
      bad.summary.adjoint_residual = kNaN;
      bad.summary.c0_empirical = kNaN;
    }
  }

  // Scenarios are independent; distribute them across the workers and give
  // each run a single thread so results cannot depend on the schedule.
  RunOptions inner = options;
  inner.threads = 1;
  parallel_for(0, static_cast<int>(files.size()), options.threads, [&](int i) {
    if (configs[i]) batch.outcomes[i] = run_scenario(*configs[i], inner);
  });

  for (const auto& outcome : batch.outcomes) {
    if (outcome.exit_code != 0) {
      batch.exit_code = outcome.exit_code;
      break;
    }
  }

  std::filesystem::create_directories(options.output_root);
  batch.summary_path = options.output_root / "batch_summary.csv";
  std::ofstream csv(batch.summary_path, std::ios::binary);
  csv << "scenario,passed,exit_code,n,kind,k,phi_residual,psi_residual,pairing_sup,"
         "zero_fraction,lambda_verdict,degenerate,chain_rule_residual,weak_residual,"
         "adjoint_residual,c0_empirical\n";
  for (const auto& outcome : batch.outcomes) {
    const SummaryRow& row = outcome.summary;
    csv << row.name << ',' << (row.passed ? "true" : "false") << ',' << row.exit_code << ','
        << row.n << ',' << row.kind << ',' << fmt_g17(row.k) << ','
        << fmt_g17(row.phi_residual) << ',' << fmt_g17(row.psi_residual) << ','
        << fmt_g17(row.pairing_sup) << ',' << fmt_g17(row.zero_fraction) << ','
        << row.lambda_verdict << ',' << (row.degenerate ? "true" : "false") << ','
        << fmt_g17(row.chain_rule_residual) << ',' << fmt_g17(row.weak_residual) << ','
        << fmt_g17(row.adjoint_residual) << ',' << fmt_g17(row.c0_empirical) << '\n';
  }
  csv.flush();
  if (!csv) throw IoError("cannot write " + batch.summary_path.string());
  return batch;
}

}  // namespace qclab
