#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "degenode/degenode.hpp"

namespace {

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("degenode");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  const char* env = std::getenv("DEGENODE_LOG");
  spdlog::set_level(env ? spdlog::level::from_str(env) : spdlog::level::warn);
}

int cmd_simulate(const std::string& config_path, const std::string& out_dir) {
  degenode::ExperimentConfig cfg;
  try {
    cfg = degenode::load_config(config_path);
  } catch (const degenode::Error& e) {
    std::cerr << "config invalid: " << e.what() << '\n';
    return e.code() == degenode::ErrorCode::IoError ? 2 : degenode::exit_code_for(e.code());
  }
  try {
    spdlog::info("simulating {} into {}", config_path, out_dir);
    const auto res = degenode::simulate_to_directory(cfg, out_dir);
    const auto& s = res.summary;
    std::cout << "status: " << s["status"].get<std::string>() << '\n';
    const auto& fit = s["analysis"]["fit"];
    if (fit.contains("exponent")) std::cout << "fitted exponent: " << fit["exponent"].get<double>() << '\n';
    std::cout << "energy identity residual: " << s["analysis"]["energy_identity_residual"].get<double>() << '\n';
    return 0;
  } catch (const degenode::Error& e) {
    std::cerr << "simulation failed: " << e.what() << '\n';
    return degenode::exit_code_for(e.code());
  }
}

int cmd_sweep(const std::string& config_path, const std::string& out_dir, int jobs) {
  std::vector<degenode::SweepCell> cells;
  try {
    cells = degenode::expand_sweep(degenode::read_json_file(config_path));
  } catch (const degenode::Error& e) {
    std::cerr << "sweep config invalid: " << e.what() << '\n';
    return 2;
  }
  if (cells.empty()) {
    std::cerr << "sweep grid is empty\n";
    return 2;
  }
  spdlog::info("sweep with {} cells on {} workers", cells.size(), jobs);
  try {
    const auto rows = degenode::run_sweep(cells, out_dir, jobs);
    std::size_t ok = 0;
    for (const auto& r : rows) {
      if (r.ok) {
        ++ok;
      } else {
        spdlog::warn("cell {} failed: {}", r.cell.index, r.error);
      }
    }
    std::cout << ok << "/" << rows.size() << " cells succeeded\n";
    return ok > 0 ? 0 : 3;
  } catch (const degenode::Error& e) {
    std::cerr << "sweep failed: " << e.what() << '\n';
    return degenode::exit_code_for(e.code());
  }
}

int cmd_verify(const std::string& suite, long samples, std::uint64_t seed) {
  const std::vector<std::string> known{"inequalities", "chain_rule", "wronskian", "epsilon_family", "all"};
  if (std::find(known.begin(), known.end(), suite) == known.end()) {
    std::cerr << "unknown suite: " << suite << '\n';
    return 2;
  }
  std::vector<degenode::SuiteResult> results;
  try {
    if (suite == "inequalities" || suite == "all") results.push_back(degenode::inequality_suite_run(samples, seed));
    if (suite == "chain_rule" || suite == "all") results.push_back(degenode::chain_rule_suite_run());
    if (suite == "wronskian" || suite == "all") results.push_back(degenode::wronskian_suite_run(seed));
    if (suite == "epsilon_family" || suite == "all") results.push_back(degenode::epsilon_family_suite_run());
  } catch (const degenode::Error& e) {
    std::cerr << "verification aborted: " << e.what() << '\n';
    return 1;
  }
  long violations = 0;
  for (const auto& r : results) {
    std::cout << "suite " << r.name << ": " << r.violations << " violation(s)\n";
    for (const auto& line : r.lines) std::cout << "  " << line << '\n';
    violations += r.violations;
  }
  return violations == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Simulation and verification of degenerate damped vector oscillators"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  auto* simulate = app.add_subcommand("simulate", "integrate one configured experiment");
  simulate->add_option("config", config_path, "experiment config (JSON)")->required();
  simulate->add_option("-o,--out", out_dir, "output directory")->required();

  std::string sweep_path, sweep_out;
  int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  auto* sweep = app.add_subcommand("sweep", "run a parameter grid");
  sweep->add_option("config", sweep_path, "sweep config (JSON)")->required();
  sweep->add_option("-o,--out", sweep_out, "output directory")->required();
  sweep->add_option("-j,--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);

  std::string suite;
  long samples = 100000;
  std::uint64_t seed = 42;
  auto* verify = app.add_subcommand("verify", "run property suites");
  verify->add_option("--suite", suite, "inequalities | chain_rule | wronskian | epsilon_family | all")->required();
  verify->add_option("--samples", samples, "random pairs per exponent")->check(CLI::PositiveNumber);
  verify->add_option("--seed", seed, "random seed");

  CLI11_PARSE(app, argc, argv);

  if (*simulate) return cmd_simulate(config_path, out_dir);
  if (*sweep) return cmd_sweep(sweep_path, sweep_out, jobs);
  return cmd_verify(suite, samples, seed);
}
