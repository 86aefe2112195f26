#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

#include <json.hpp>

#include "qclab/errors.hpp"
#include "qclab/grid.hpp"
#include "qclab/scenario.hpp"
#include "test_support.hpp"

using namespace qclab;
namespace fs = std::filesystem;
using njson = nlohmann::json;

namespace {

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

/// A fast, fully passing scenario: constant reduced coefficient at n = 32
/// with an affine identity member and one solved member.
const char* kMiniScenario = R"(
[scenario]
name = "mini"
description = "constant coefficient smoke scenario"

[grid]
n = 32

[equation]
kind = "reduced"
generator = "constant"
lambda_re = 0.4

[family]
mode = "identity_plus_solved"

[solver]
tol = 1e-12
max_iter = 50

[verification]
lambda_samples = 4000
bump_randomized = 2
disk_centers = 4
disk_ladder = [4, 8]

[expect]
phi_residual_max = 1e-13
psi_residual_max = 1e-11
reduced_residual_max = 1e-11
iterations_max_psi = 3
pairing_const = -1.0
pairing_tol = 1e-12
zero_fraction_max = 0.0
lambda_verdict = "all-negative"
degenerate = false
chain_rule_residual_max = 1e-13
lambda_w_const_re = 0.4
lambda_w_const_im = 0.0
lambda_w_tol = 1e-13
vx_residual_max = 1e-11
uy_residual_max = 1e-11
uy_mixed_fraction_max = 0.0
c0_max = 1.0
)";

fs::path write_mini(const fs::path& dir, const char* filename = "mini.toml") {
  const fs::path path = dir / filename;
  write_file(path, kMiniScenario);
  return path;
}

/// Expects load_scenario to reject `text` with a message containing
/// `needle`.
void expect_load_reject(const fs::path& dir, const std::string& text,
                        const std::string& needle) {
  const fs::path path = dir / "bad.toml";
  write_file(path, text);
  try {
    (void)load_scenario(path);
    FAIL("expected ConfigError with: " << needle);
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    INFO("message: " << msg);
    CHECK(msg.find(needle) != std::string::npos);
  }
}

/// FNV-1a re-derivation, written out separately from the library so the
/// seed contract is pinned by two implementations.
std::uint64_t fnv_reference(std::uint64_t master, const std::string& purpose) {
  std::uint64_t h = 14695981039346656037ull;
  for (int i = 0; i < 8; ++i) {
    h ^= static_cast<unsigned char>(master >> (8 * i));
    h *= 1099511628211ull;
  }
  for (char c : purpose) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

TEST_CASE("seed derivation is the documented FNV-1a mix") {
  CHECK(derive_seed(0, "") == fnv_reference(0, ""));
  CHECK(derive_seed(kDefaultMasterSeed, "mini:lambda") ==
        fnv_reference(kDefaultMasterSeed, "mini:lambda"));
  CHECK(derive_seed(123456789ull, "a:disk") ==
        fnv_reference(123456789ull, "a:disk"));
  CHECK(derive_seed(1, "a") != derive_seed(1, "b"));
  CHECK(derive_seed(1, "a") != derive_seed(2, "a"));
}

TEST_CASE("exception taxonomy maps onto process exit codes") {
  CHECK(classify_exit_code(ConfigError("x")) == 2);
  CHECK(classify_exit_code(IoError("x")) == 2);
  CHECK(classify_exit_code(DomainError("x")) == 2);
  CHECK(classify_exit_code(EllipticityError("x")) == 2);
  CHECK(classify_exit_code(ConvergenceError("x", 0.5)) == 3);
  CHECK(classify_exit_code(DegeneracyError("x")) == 1);
  CHECK(classify_exit_code(SamplingError("x")) == 1);
  CHECK(classify_exit_code(std::runtime_error("x")) == 1);
}

TEST_CASE("loading resolves defaults and derived seeds") {
  const fs::path dir = qclab::testing::scratch_dir("scenario_load");
  const fs::path path = dir / "tiny.toml";
  write_file(path,
             "[equation]\nkind = \"reduced\"\ngenerator = \"constant\"\n"
             "lambda_re = 0.25\n[family]\nmode = \"identity_plus_solved\"\n");
  const ScenarioConfig config = load_scenario(path);

  CHECK(config.name == "tiny");  // falls back to the file stem
  CHECK(config.grid.n == 128);
  CHECK(config.grid.side == kTwoPi);
  CHECK(config.lambda_const == std::complex<double>{0.25, 0.0});
  CHECK(config.tol == 1e-10);
  CHECK(config.max_iter == 400);
  CHECK(config.dealias == false);
  CHECK(config.tau_rel == std::vector<double>{1e-4, 1e-6, 1e-8});
  CHECK(config.lambda_samples == 100000);
  CHECK(config.bump_randomized == 20);
  CHECK(config.disk_centers == 50);
  CHECK(config.disk_ladder == std::vector<int>{8, 16, 32});
  CHECK(config.pair_residual_tol == 1e-9);  // max(10 * tol, 1e-12)
  CHECK(config.sign_band_rel == 1e-12);
  CHECK(config.run_factorization);
  CHECK(config.run_elliptic);
  CHECK(config.run_reverse_holder);
  CHECK(config.output_subdir == "tiny");
  CHECK(config.expectations.empty());
  // Unpinned seeds derive from the master seed and the purpose string.
  CHECK(config.lambda_seed ==
        derive_seed(kDefaultMasterSeed, "tiny:lambda"));
  CHECK(config.bump_seed == derive_seed(kDefaultMasterSeed, "tiny:bump"));
  CHECK(config.disk_seed == derive_seed(kDefaultMasterSeed, "tiny:disk"));

  // A different master shifts the derived seeds.
  const ScenarioConfig other = load_scenario(path, 99);
  CHECK(other.lambda_seed == derive_seed(99, "tiny:lambda"));
  CHECK(other.lambda_seed != config.lambda_seed);

  // A pinned seed is taken verbatim.
  write_file(path,
             "[equation]\nkind = \"reduced\"\ngenerator = \"constant\"\n"
             "[family]\nmode = \"identity_plus_solved\"\n"
             "[verification]\nlambda_seed = 77\n");
  const ScenarioConfig pinned = load_scenario(path);
  CHECK(pinned.lambda_seed == 77);
  CHECK(pinned.bump_seed == derive_seed(kDefaultMasterSeed, "tiny:bump"));
  fs::remove_all(dir);
}

TEST_CASE("loading rejects out-of-contract scenarios") {
  const fs::path dir = qclab::testing::scratch_dir("scenario_reject");
  const std::string eq =
      "[equation]\nkind = \"reduced\"\ngenerator = \"constant\"\n";
  const std::string fam = "[family]\nmode = \"identity_plus_solved\"\n";

  expect_load_reject(dir, eq + fam + "[mystery]\nx = 1\n",
                     "unknown table [mystery]");
  expect_load_reject(dir, eq + fam + "[scenario]\nnames = \"typo\"\n",
                     "unknown key 'names' in [scenario]");
  expect_load_reject(dir, fam, "missing required table [equation]");
  expect_load_reject(dir, eq, "missing required table [family]");
  expect_load_reject(
      dir, "[equation]\nkind = \"weird\"\ngenerator = \"constant\"\n" + fam,
      "equation kind must be 'reduced' or 'general'");
  expect_load_reject(
      dir, "[equation]\nkind = \"reduced\"\ngenerator = \"radial_stretch\"\nk = 0.3\n" + fam,
      "reduced generator must be constant, smooth_bump, or csv");
  expect_load_reject(dir,
                     "[equation]\nkind = \"reduced\"\ngenerator = "
                     "\"smooth_bump\"\nwidth = 0.0\n" +
                         fam,
                     "smooth_bump width must be positive");
  expect_load_reject(dir,
                     "[equation]\nkind = \"general\"\ngenerator = "
                     "\"radial_stretch\"\nk = 1.0\n" +
                         fam,
                     "radial_stretch k must lie in [0, 1)");
  expect_load_reject(dir,
                     "[equation]\nkind = \"general\"\ngenerator = "
                     "\"radial_stretch\"\nk = 0.3\nsupport_radius = 4.0\n" +
                         fam,
                     "radial_stretch support must fit inside the cell");
  expect_load_reject(dir, eq + "[family]\nmode = \"freeform\"\n",
                     "unknown family mode 'freeform'");
  expect_load_reject(dir, eq + "[family]\nmode = \"scaled_copy\"\nscale = 0.0\n",
                     "scaled_copy scale must be finite and nonzero");
  expect_load_reject(
      dir, eq + "[family]\nmode = \"psi_square\"\n",
      "psi_square requires the general equation with mu = nu = 0");
  expect_load_reject(dir, eq + fam + "[solver]\ntol = 1.0\n",
                     "solver tol must lie in (0, 1)");
  expect_load_reject(dir, eq + fam + "[solver]\nmax_iter = 0\n",
                     "max_iter must be >= 1");
  expect_load_reject(dir, eq + fam + "[verification]\ntau_rel = [0.5, 1.5]\n",
                     "tau_rel entries must lie in (0, 1)");
  expect_load_reject(dir, eq + fam + "[verification]\ntau_rel = []\n",
                     "tau_rel must be nonempty");
  expect_load_reject(dir, eq + fam + "[verification]\nlambda_samples = 0\n",
                     "lambda_samples must be >= 1");
  expect_load_reject(dir, eq + fam + "[verification]\ndisk_ladder = [8, 0]\n",
                     "disk_ladder rungs must be >= 1");
  expect_load_reject(dir, eq + fam + "[expect]\nmade_up_metric = 1.0\n",
                     "unknown expectation 'made_up_metric'");
  expect_load_reject(
      dir, eq + fam + "[expect]\noracle = \"affine\"\n",
      "oracle requires oracle_rel_l2_max");
  expect_load_reject(
      dir, eq + fam + "[expect]\noracle_rel_l2_max = 1e-10\n",
      "oracle_rel_l2_max requires an oracle");
  expect_load_reject(
      dir, eq + fam + "[expect]\noracle = \"exact\"\noracle_rel_l2_max = 1e-10\n",
      "oracle must be 'affine' or 'radial_stretch'");
  expect_load_reject(
      dir,
      "[equation]\nkind = \"reduced\"\ngenerator = \"smooth_bump\"\nwidth = "
      "1.0\n" +
          fam + "[expect]\noracle = \"affine\"\noracle_rel_l2_max = 1e-10\n",
      "the affine oracle requires the constant generator");
  expect_load_reject(dir, eq + fam + "[expect]\nlambda_verdict = \"sorta\"\n",
                     "unknown lambda_verdict expectation 'sorta'");
  expect_load_reject(
      dir, eq + fam + "[expect]\nzero_fraction_max = 0.1\nzero_fraction_tau_rel = 0.5\n",
      "zero_fraction_tau_rel is not one of tau_rel");
  expect_load_reject(
      dir, eq + "[family]\nmode = \"affine_pair\"\nphi_a = [1.0, 0.0, 2.0]\n",
      "'phi_a' must be a [re, im] pair");
  fs::remove_all(dir);
}

TEST_CASE("a constant-coefficient scenario runs end to end") {
  const fs::path dir = qclab::testing::scratch_dir("scenario_run");
  const ScenarioConfig config = load_scenario(write_mini(dir));
  RunOptions options;
  options.output_root = dir / "out";
  options.include_timings = true;
  const ScenarioOutcome outcome = run_scenario(config, options);

  CHECK(outcome.exit_code == 0);
  CHECK(outcome.passed);
  CHECK(outcome.failure_stage.empty());
  CHECK(outcome.output_dir == options.output_root / "mini");

  // The serialized report and the file on disk are the same bytes.
  const fs::path report_path = outcome.output_dir / "report.json";
  REQUIRE(fs::exists(report_path));
  std::ifstream in(report_path, std::ios::binary);
  const std::string on_disk((std::istreambuf_iterator<char>(in)),
                            std::istreambuf_iterator<char>());
  CHECK(on_disk == outcome.report_json);

  const njson report = njson::parse(outcome.report_json);
  CHECK(report.at("passed").get<bool>());
  CHECK(report.at("exit_code").get<int>() == 0);
  CHECK(report.at("scenario").at("name").get<std::string>() == "mini");
  CHECK(report.at("equation").at("kind").get<std::string>() == "reduced");
  CHECK(report.at("equation").at("k").get<double>() ==
        doctest::Approx(0.4).epsilon(1e-14));
  CHECK(report.at("equation").at("k_prime").get<double>() ==
        doctest::Approx(0.4).epsilon(1e-14));
  CHECK(report.at("solver").at("phi").at("source").get<std::string>() ==
        "affine");
  CHECK(report.at("solver").at("psi").at("source").get<std::string>() ==
        "solved");
  CHECK(report.at("solver").at("psi").at("iterations").get<int>() <= 3);

  const njson& thm = report.at("theorem_1_2");
  CHECK(thm.at("pairing_min").get<double>() ==
        doctest::Approx(-1.0).epsilon(1e-14));
  CHECK(thm.at("pairing_max").get<double>() ==
        doctest::Approx(-1.0).epsilon(1e-14));
  const njson& fractions = thm.at("zero_fractions");
  REQUIRE(fractions.size() == 3);  // default tau ladder
  for (const auto& row : fractions) {
    CHECK(row.contains("tau_rel"));
    CHECK(row.contains("tau_abs"));
    CHECK(row.at("fraction").get<double>() == 0.0);
  }
  CHECK(thm.at("lambda_sign").at("verdict").get<std::string>() ==
        "all-negative");
  CHECK(thm.at("lambda_sign").at("samples").get<std::size_t>() == 4000);
  CHECK(!thm.at("orientation_flipped").get<bool>());
  CHECK(thm.at("degenerate").is_null());
  CHECK(thm.at("factorization").at("masked_fraction").get<double>() == 0.0);
  CHECK(thm.at("factorization").at("chain_rule_residual").get<double>() ==
        0.0);

  CHECK(report.at("component_relations").contains("uy_signs"));
  const njson& pde = report.at("adjoint_pde");
  CHECK(pde.at("K_ell").get<double>() > 1.0);
  CHECK(pde.at("bumps").get<int>() == 7);  // 5 canonical + 2 randomized
  CHECK(pde.at("reverse_holder").at("c0_empirical").get<double>() > 0.0);
  CHECK(pde.at("reverse_holder").at("ratio_min").get<double>() >=
        1.0 / std::sqrt(std::numbers::pi) - 1e-3);

  const njson& checks = report.at("checks");
  // 17 expect keys minus the 3 parameter keys (pairing_tol, lambda_w_tol,
  // lambda_w_const_im) plus 2 implicit invariants.
  CHECK(checks.size() == 16);
  for (const auto& c : checks) {
    INFO("check: " << c.at("name").get<std::string>());
    CHECK(c.at("passed").get<bool>());
  }
  CHECK(report.contains("timings"));
  fs::remove_all(dir);
}

TEST_CASE("reports are byte-identical across reruns without timings") {
  const fs::path dir = qclab::testing::scratch_dir("scenario_repeat");
  const ScenarioConfig config = load_scenario(write_mini(dir));
  RunOptions options;
  options.output_root = dir / "out";
  options.include_timings = false;
  const ScenarioOutcome first = run_scenario(config, options);
  const ScenarioOutcome second = run_scenario(config, options);
  CHECK(first.exit_code == 0);
  CHECK(first.report_json == second.report_json);
  fs::remove_all(dir);
}

TEST_CASE("a failed expectation is exit code 1 with the check named") {
  const fs::path dir = qclab::testing::scratch_dir("scenario_fail");
  const fs::path path = dir / "wrong.toml";
  std::string text = kMiniScenario;
  const auto at = text.find("pairing_const = -1.0");
  REQUIRE(at != std::string::npos);
  text.replace(at, std::string("pairing_const = -1.0").size(),
               "pairing_const = 0.5");
  write_file(path, text);

  RunOptions options;
  options.output_root = dir / "out";
  const ScenarioOutcome outcome = run_scenario(load_scenario(path), options);
  CHECK(outcome.exit_code == 1);
  CHECK(!outcome.passed);
  CHECK(outcome.failure_stage == "checks");
  CHECK(outcome.failure_reason.find("pairing_const") != std::string::npos);

  const njson report = njson::parse(outcome.report_json);
  CHECK(!report.at("passed").get<bool>());
  CHECK(report.at("exit_code").get<int>() == 1);
  bool found = false;
  for (const auto& c : report.at("checks")) {
    if (c.at("name").get<std::string>() == "pairing_const") {
      found = true;
      CHECK(!c.at("passed").get<bool>());
      CHECK(c.at("relation").get<std::string>() == "<=");
    }
  }
  CHECK(found);
  fs::remove_all(dir);
}

TEST_CASE("a starved solver is exit code 3 at the solve stage") {
  const fs::path dir = qclab::testing::scratch_dir("scenario_diverge");
  const fs::path path = dir / "starved.toml";
  write_file(path, R"(
[scenario]
name = "starved"

[grid]
n = 32

[equation]
kind = "reduced"
generator = "smooth_bump"
amp_re = 0.55
width = 2.0

[family]
mode = "identity_plus_solved"

[solver]
tol = 1e-12
max_iter = 2
)");
  RunOptions options;
  options.output_root = dir / "out";
  const ScenarioOutcome outcome = run_scenario(load_scenario(path), options);
  CHECK(outcome.exit_code == 3);
  CHECK(!outcome.passed);
  CHECK(outcome.failure_stage == "solve");

  // The report is still written, with the error block filled in.
  const njson report = njson::parse(outcome.report_json);
  CHECK(report.at("exit_code").get<int>() == 3);
  CHECK(report.at("error").at("stage").get<std::string>() == "solve");
  CHECK(report.at("error").at("kind").get<std::string>() == "convergence");
  CHECK(fs::exists(outcome.output_dir / "report.json"));
  fs::remove_all(dir);
}

TEST_CASE("a missing coefficient CSV is exit code 2 at coefficients") {
  const fs::path dir = qclab::testing::scratch_dir("scenario_badcsv");
  const fs::path path = dir / "orphan.toml";
  write_file(path, R"(
[scenario]
name = "orphan"

[grid]
n = 32

[equation]
kind = "reduced"
generator = "csv"
lambda_csv = "does_not_exist.csv"

[family]
mode = "identity_plus_solved"
)");
  RunOptions options;
  options.output_root = dir / "out";
  const ScenarioOutcome outcome = run_scenario(load_scenario(path), options);
  CHECK(outcome.exit_code == 2);
  CHECK(outcome.failure_stage == "coefficients");
  const njson report = njson::parse(outcome.report_json);
  CHECK(report.at("error").at("kind").get<std::string>() == "config");
  fs::remove_all(dir);
}

TEST_CASE("field dumps cover the pipeline and round-trip as generators") {
  const fs::path dir = qclab::testing::scratch_dir("scenario_dump");
  const ScenarioConfig config = load_scenario(write_mini(dir));
  RunOptions options;
  options.output_root = dir / "out";
  options.dump_fields = true;
  const ScenarioOutcome outcome = run_scenario(config, options);
  REQUIRE(outcome.exit_code == 0);

  const fs::path fields = outcome.output_dir / "fields";
  for (const char* name :
       {"phi_values.csv", "phi_fz.csv", "phi_fzbar.csv", "psi_values.csv",
        "psi_fz.csv", "psi_fzbar.csv", "pairing.csv", "lambda.csv", "uy.csv",
        "w.csv"}) {
    INFO("expected dump: " << name);
    CHECK(fs::exists(fields / name));
  }
  const ComplexField lambda = read_field_csv(fields / "lambda.csv");
  CHECK(lambda.spec().n == 32);
  for (const auto& v : lambda) {
    CHECK(v == std::complex<double>{0.4, 0.0});
  }

  // Feed the dumped coefficient back through the csv generator: the run
  // must reproduce the constant-coefficient metrics bitwise.
  const fs::path dir2 = dir / "csvgen";
  fs::create_directories(dir2);
  fs::copy_file(fields / "lambda.csv", dir2 / "lambda.csv");
  std::string text = kMiniScenario;
  const std::string gen_line = "generator = \"constant\"\nlambda_re = 0.4";
  const auto at = text.find(gen_line);
  REQUIRE(at != std::string::npos);
  text.replace(at, gen_line.size(),
               "generator = \"csv\"\nlambda_csv = \"lambda.csv\"");
  write_file(dir2 / "mini_csv.toml", text);
  RunOptions options2;
  options2.output_root = dir / "out2";
  const ScenarioOutcome replay =
      run_scenario(load_scenario(dir2 / "mini_csv.toml"), options2);
  CHECK(replay.exit_code == 0);
  CHECK(replay.summary.k == outcome.summary.k);
  CHECK(replay.summary.psi_residual == outcome.summary.psi_residual);
  CHECK(replay.summary.pairing_sup == outcome.summary.pairing_sup);
  fs::remove_all(dir);
}

TEST_CASE("batch runs are sorted, summarized, and fail on the first bad row") {
  const fs::path dir = qclab::testing::scratch_dir("scenario_batch");
  const fs::path scenarios = dir / "scenarios";
  fs::create_directories(scenarios);

  write_mini(scenarios, "a_ok.toml");
  std::string failing = kMiniScenario;
  const auto at = failing.find("pairing_const = -1.0");
  REQUIRE(at != std::string::npos);
  failing.replace(at, std::string("pairing_const = -1.0").size(),
                  "pairing_const = 0.5");
  const auto name_at = failing.find("name = \"mini\"");
  REQUIRE(name_at != std::string::npos);
  failing.replace(name_at, std::string("name = \"mini\"").size(),
                  "name = \"b_fail\"");
  write_file(scenarios / "b_fail.toml", failing);
  write_file(scenarios / "z_broken.toml", "[mystery]\nx = 1\n");
  write_file(scenarios / "notes.txt", "not a scenario");

  RunOptions options;
  options.output_root = dir / "out";
  options.threads = 2;
  options.include_timings = false;
  const BatchOutcome batch = batch_run(scenarios, kDefaultMasterSeed, options);

  REQUIRE(batch.outcomes.size() == 3);
  CHECK(batch.outcomes[0].summary.name == "mini");  // a_ok.toml names itself
  CHECK(batch.outcomes[0].exit_code == 0);
  CHECK(batch.outcomes[1].exit_code == 1);
  CHECK(batch.outcomes[2].exit_code == 2);
  CHECK(batch.outcomes[2].failure_stage == "load");
  CHECK(batch.outcomes[2].summary.name == "z_broken");
  // First nonzero exit in sorted filename order wins.
  CHECK(batch.exit_code == 1);

  REQUIRE(fs::exists(batch.summary_path));
  std::ifstream in(batch.summary_path);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  REQUIRE(lines.size() == 4);
  CHECK(lines[0] ==
        "scenario,passed,exit_code,n,kind,k,phi_residual,psi_residual,"
        "pairing_sup,zero_fraction,lambda_verdict,degenerate,"
        "chain_rule_residual,weak_residual,adjoint_residual,c0_empirical");
  CHECK(lines[1].rfind("mini,true,0,32,reduced,", 0) == 0);
  CHECK(lines[2].rfind("b_fail,false,1,32,reduced,", 0) == 0);
  // The broken row keeps its stem name and renders NaN metrics as empty.
  CHECK(lines[3] == "z_broken,false,2,0,,,,,,,,false,,,,");

  // Reports exist for the scenarios that ran, not for the load failure.
  CHECK(fs::exists(dir / "out" / "mini" / "report.json"));
  CHECK(!fs::exists(dir / "out" / "z_broken" / "report.json"));

  CHECK_THROWS_AS(batch_run(dir / "missing", kDefaultMasterSeed, options),
                  ConfigError);
  const fs::path empty = dir / "empty";
  fs::create_directories(empty);
  CHECK_THROWS_AS(batch_run(empty, kDefaultMasterSeed, options), ConfigError);
  fs::remove_all(dir);
}
