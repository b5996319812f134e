#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "nslb/experiments.hpp"

int main(int argc, char** argv) {
  CLI::App app{"nslb: Navier-Stokes singularity laboratory"};
  std::string experiment;
  std::string config_path;
  std::string out_dir = "nslb-out";
  std::optional<std::uint64_t> seed;
  app.add_option("experiment", experiment, "Experiment to run")
      ->required()
      ->check(CLI::IsMember(nslb::experiment_names()));
  app.add_option("--config", config_path, "Config file (key = value with [sections])")->required();
  app.add_option("--out", out_dir, "Output directory for report.json and friends");
  app.add_option("--seed", seed, "Seed overriding run.seed");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  nslb::RunOutcome outcome = nslb::run_experiment_file(experiment, config_path, out_dir, seed);
  for (const auto& a : outcome.assertions)
    std::cout << (a.pass ? "PASS " : "FAIL ") << a.name << " value=" << a.value << " " << a.relation << " "
              << a.limit << "\n";
  if (!outcome.report_path.empty()) std::cout << "report: " << outcome.report_path.string() << "\n";
  if (outcome.exit_code != 0) std::cerr << "nslb: " << outcome.message << "\n";
  return outcome.exit_code;
}
