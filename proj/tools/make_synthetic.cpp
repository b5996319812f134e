// Writes the bundled synthetic snapshot set: |v| = c (t_s - t)^{-mu} |x - x_s|^{-lambda}
// with torus distance, on a 64^2 grid, plus its manifest.
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "nslb/snapshot_io.hpp"

namespace {

constexpr int kModes = 64;
constexpr double kTs = 1.0;
constexpr double kT1 = 0.5;
constexpr double kXs[2] = {0.1234567, -0.2718281};
constexpr double kLambda = 0.7;
constexpr double kMu = 0.3;
constexpr double kC = 2.0;
const std::vector<double> kTimes = {0.5, 0.75, 0.9, 0.95, 0.975};

nslb::PhysicalField singular_field(double t) {
  nslb::TorusGrid grid(2, kModes);
  nslb::PhysicalField f(grid, 2);
  double gap = kTs - t;
  for (std::size_t j = 0; j < grid.size(); ++j) {
    nslb::MultiIndex idx = grid.unflatten(j);
    double r2 = 0.0;
    for (int d = 0; d < 2; ++d) {
      double diff = grid.coordinate(idx[d]) - kXs[d];
      diff -= std::round(diff);
      r2 += diff * diff;
    }
    double magnitude = kC / (std::pow(gap, kMu) * std::pow(std::sqrt(r2), kLambda));
    f.at(0, j) = 0.6 * magnitude;
    f.at(1, j) = 0.8 * magnitude;
  }
  return f;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: nslb_make_synthetic <output-dir>\n";
    return 2;
  }
  std::filesystem::path dir(argv[1]);
  std::filesystem::create_directories(dir);
  std::string files;
  for (std::size_t i = 0; i < kTimes.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "snap_%03zu.nslb", i);
    nslb::write_snapshot(dir / name, singular_field(kTimes[i]), kTimes[i]);
    files += (i ? ", " : "") + std::string(name);
  }
  std::ofstream manifest(dir / "manifest.cfg");
  manifest.precision(10);
  manifest << "# Synthetic singular field |v| = c (t_s - t)^(-mu) |x - x_s|^(-lambda), torus distance.\n"
           << "# Regenerate with: nslb_make_synthetic data/synthetic\n"
           << "[cone]\nt_s = " << kTs << "\nx_s = " << kXs[0] << ", " << kXs[1] << "\nt_1 = " << kT1 << "\n\n"
           << "[truth]\nlambda = " << kLambda << "\nmu = " << kMu << "\nc = " << kC << "\n\n"
           << "[snapshots]\nfiles = " << files << "\n";
  return manifest ? 0 : 1;
}
