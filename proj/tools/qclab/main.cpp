// qclab: scenario-driven verification harness for linear families of
// quasiconformal mappings.
//
//   qclab run <scenario.toml>          run one scenario, write report.json
//   qclab batch <dir>                  run every *.toml, write batch_summary.csv
//   qclab dump-fields <scenario.toml>  run the pipeline and write field CSVs
//
// Exit codes: 0 success, 1 verification failure, 2 configuration error,
// 3 convergence failure.

#include <cstdlib>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "qclab/errors.hpp"
#include "qclab/scenario.hpp"

namespace {

std::filesystem::path resolve_output_root(const std::string& cli_value) {
  if (!cli_value.empty()) return cli_value;
  if (const char* env = std::getenv("QCLAB_OUTPUT_ROOT"); env && *env) return env;
  return "out";
}

void print_outcome(const qclab::ScenarioOutcome& outcome) {
  const auto& s = outcome.summary;
  std::cout << s.name << ": " << (outcome.exit_code == 0 ? "PASS" : "FAIL")
            << " (exit " << outcome.exit_code << ")";
  if (!outcome.failure_stage.empty()) {
    std::cout << " [" << outcome.failure_stage << "] " << outcome.failure_reason;
  }
  std::cout << "\n";
}

int run_single(const std::string& path, std::uint64_t seed,
               const qclab::RunOptions& options) {
  const qclab::ScenarioConfig config = qclab::load_scenario(path, seed);
  const qclab::ScenarioOutcome outcome = qclab::run_scenario(config, options);
  print_outcome(outcome);
  std::cout << "report: " << (outcome.output_dir / "report.json").string() << "\n";
  return outcome.exit_code;
}

int run_batch(const std::string& dir, std::uint64_t seed,
              const qclab::RunOptions& options) {
  const qclab::BatchOutcome batch = qclab::batch_run(dir, seed, options);
  for (const auto& outcome : batch.outcomes) print_outcome(outcome);
  std::cout << "summary: " << batch.summary_path.string() << "\n";
  return batch.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Verification harness for linear families of quasiconformal mappings"};
  app.require_subcommand(1);
  app.fallthrough();  // accept --seed/--threads/--output after the subcommand

  std::uint64_t seed = qclab::kDefaultMasterSeed;
  int threads = 1;
  std::string output;
  app.add_option("--seed", seed, "Master seed for derived sampling seeds");
  app.add_option("--threads", threads, "Worker threads (>= 1)")
      ->check(CLI::Range(1, 1024));
  app.add_option("--output", output,
                 "Output root (default: $QCLAB_OUTPUT_ROOT, then ./out)");

  std::string run_path, batch_dir, dump_path;
  CLI::App* run_cmd = app.add_subcommand("run", "Run one scenario file");
  run_cmd->add_option("scenario", run_path, "Scenario TOML file")->required();
  CLI::App* batch_cmd = app.add_subcommand("batch", "Run every *.toml in a directory");
  batch_cmd->add_option("dir", batch_dir, "Directory of scenario files")->required();
  CLI::App* dump_cmd = app.add_subcommand(
      "dump-fields", "Run one scenario and also write field CSVs");
  dump_cmd->add_option("scenario", dump_path, "Scenario TOML file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // bad command line is a configuration error
  }

  qclab::RunOptions options;
  options.output_root = resolve_output_root(output);
  options.threads = threads;

  try {
    if (run_cmd->parsed()) return run_single(run_path, seed, options);
    if (batch_cmd->parsed()) return run_batch(batch_dir, seed, options);
    options.dump_fields = true;
    options.verify = false;  // dump mode reports diagnostics without gating
    return run_single(dump_path, seed, options);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return qclab::classify_exit_code(e);
  }
}
