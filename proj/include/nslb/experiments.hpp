#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "nslb/config.hpp"

namespace nslb {

inline constexpr int kReportSchemaVersion = 1;
inline constexpr int kTimeseriesVersion = 1;
// Fixed column order of timeseries.csv.
inline constexpr const char* kTimeseriesHeader = "time,energy,enstrophy,divergence_max,sobolev_h1,sobolev_h2";

// simulate, transform-check, fit-singularity, verify-kernels, rescale-audit, duhamel-residual
const std::vector<std::string>& experiment_names();

struct AssertionResult {
  std::string name;
  bool pass = false;
  double value = 0.0;
  double limit = 0.0;
  std::string relation;  // "<=", ">=" or "=="
};

struct RunOutcome {
  int exit_code = 0;    // 0 all assertions pass, 1 an assertion failed, 2 bad config or input
  std::string message;  // names the failing invariant or field for non-zero exits
  std::vector<AssertionResult> assertions;
  std::filesystem::path report_path;
};

// Runs one experiment and writes report.json, report.meta.json (timestamps)
// and, for simulate, timeseries.csv into out_dir. The seed overrides run.seed.
RunOutcome run_experiment(const std::string& experiment, const Config& config,
                          const std::filesystem::path& out_dir, std::optional<std::uint64_t> seed = {});
// Loads the config first; parse failures map to exit code 2.
RunOutcome run_experiment_file(const std::string& experiment, const std::filesystem::path& config_path,
                               const std::filesystem::path& out_dir, std::optional<std::uint64_t> seed = {});

}  // namespace nslb
