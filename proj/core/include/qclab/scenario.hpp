#pragma once

#include <complex>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "qclab/beltrami.hpp"
#include "qclab/grid.hpp"

namespace qclab {

/// Parsed scenario file. Everything carries resolved defaults, so the
/// pipeline never consults the TOML again; seeds left unset in the file are
/// derived deterministically from the master seed and their purpose string.
struct ScenarioConfig {
  std::string name;
  std::string description;
  std::filesystem::path source_path;  // where the TOML came from, if a file

  GridSpec grid{128, kTwoPi};

  // [equation]
  std::string equation_kind;  // "reduced" | "general"
  std::string generator;      // constant | smooth_bump | radial_stretch | csv
  std::complex<double> lambda_const{0.0, 0.0};  // constant (reduced)
  std::complex<double> mu_const{0.0, 0.0};      // constant (general)
  std::complex<double> nu_const{0.0, 0.0};
  double stretch_k = 0.0;          // radial_stretch
  double support_radius = 1.0;     // radial_stretch
  std::complex<double> bump_amp{0.0, 0.0};  // smooth_bump
  std::complex<double> bump_center{0.0, 0.0};
  double bump_width = 1.0;
  std::filesystem::path csv_lambda, csv_mu, csv_nu;

  // [family]
  std::string family_mode;  // identity_plus_solved | two_solved | affine_pair
                            // | scaled_copy | psi_square
  double copy_scale = 2.0;  // scaled_copy
  std::complex<double> phi_a{1.0, 0.0}, phi_b{0.0, 0.0};
  std::complex<double> psi_a{0.0, 1.0}, psi_b{0.0, 0.0};

  // [solver]
  double tol = 1e-10;
  int max_iter = 400;
  bool dealias = false;

  // [verification]
  std::vector<double> tau_rel{1e-4, 1e-6, 1e-8};
  std::int64_t lambda_samples = 100000;
  int bump_randomized = 20;
  int disk_centers = 50;
  std::vector<int> disk_ladder{8, 16, 32};
  std::uint64_t lambda_seed = 0, bump_seed = 0, disk_seed = 0;  // resolved
  double pair_residual_tol = 0.0;  // resolved: max(10*tol, 1e-12)
  double sign_band_rel = 1e-12;
  bool run_factorization = true;
  bool run_elliptic = true;
  bool run_reverse_holder = true;

  std::string output_subdir;  // defaults to name

  // [expect] entries; validated against a fixed vocabulary at load time and
  // evaluated against the computed metrics at the end of a run.
  struct Expectation {
    enum class Kind { Number, Text, Flag };
    std::string key;
    Kind kind = Kind::Number;
    double number = 0.0;
    std::string text;
    bool flag = false;
  };
  std::vector<Expectation> expectations;
};

/// Master seed used to derive any seed the scenario file does not pin.
inline constexpr std::uint64_t kDefaultMasterSeed = 20240816ull;

/// Stable seed derivation (FNV-1a over the purpose string, mixed with the
/// master seed); identical across platforms and runs.
std::uint64_t derive_seed(std::uint64_t master, const std::string& purpose);

/// Process exit code for an escaped exception: config/domain/IO errors -> 2,
/// convergence failures -> 3, anything else (verification) -> 1.
int classify_exit_code(const std::exception& e);

/// Parses and validates a scenario file. Unknown tables, unknown keys, and
/// out-of-contract values all raise ConfigError.
ScenarioConfig load_scenario(const std::filesystem::path& path,
                             std::uint64_t master_seed = kDefaultMasterSeed);

struct RunOptions {
  std::filesystem::path output_root = "out";
  int threads = 1;
  bool dump_fields = false;     // also write field CSVs
  bool verify = true;           // run the verification stages + checks
  bool include_timings = true;  // include the (non-deterministic) timings key
};

/// One row of the batch summary CSV; doubles are NaN when a stage was
/// skipped, rendered as empty CSV cells.
struct SummaryRow {
  std::string name;
  bool passed = false;
  int exit_code = 0;
  int n = 0;
  std::string kind;
  double k = 0.0;
  double phi_residual = 0.0;
  double psi_residual = 0.0;
  double pairing_sup = 0.0;
  double zero_fraction = 0.0;  // pairing, at the 1e-6 relative threshold
  std::string lambda_verdict;
  bool degenerate = false;
  double chain_rule_residual = 0.0;
  double weak_residual = 0.0;
  double adjoint_residual = 0.0;
  double c0_empirical = 0.0;
};

struct ScenarioOutcome {
  int exit_code = 0;  // 0 pass, 1 verification failure, 2 config, 3 convergence
  bool passed = false;
  std::string failure_stage;   // set when exit_code is 2 or 3
  std::string failure_reason;  // ditto
  SummaryRow summary;
  std::string report_json;  // full report, serialized
  std::filesystem::path output_dir;
};

/// Runs the verification pipeline for one scenario and writes
/// <output_root>/<subdir>/report.json (plus fields/*.csv when dumping).
/// Module exceptions are captured into the outcome, not rethrown.
ScenarioOutcome run_scenario(const ScenarioConfig& config,
                             const RunOptions& options);

struct BatchOutcome {
  int exit_code = 0;
  std::vector<ScenarioOutcome> outcomes;  // in sorted filename order
  std::filesystem::path summary_path;
};

/// Runs every *.toml under dir (sorted by filename; scenarios may execute
/// concurrently on options.threads workers) and writes batch_summary.csv
/// under output_root. The batch exit code is the first nonzero scenario
/// exit code in sorted order.
BatchOutcome batch_run(const std::filesystem::path& dir,
                       std::uint64_t master_seed, const RunOptions& options);

}  // namespace qclab
