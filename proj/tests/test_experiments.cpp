#include "nslb/experiments.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include "generators.hpp"
#include "gtest/gtest.h"
#include "nslb/config.hpp"
#include "nslb/snapshot_io.hpp"

namespace nslb {
namespace {

namespace fs = std::filesystem;
using testing::Gen;

const fs::path kSource = NSLB_SOURCE_DIR;

fs::path scratch(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("nslb_test_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

bool has_substr(const std::string& text, const std::string& needle) { return text.find(needle) != std::string::npos; }

TEST(ConfigParse, SectionsCommentsAndTypedAccess) {
  Config c = Config::parse("experiment = simulate\n# note\n[physics]\nnu = 0.1  # inline\nlist = 1, 2.5, 3\n");
  EXPECT_EQ(c.get_string("experiment"), "simulate");
  EXPECT_EQ(c.get_double("physics.nu"), 0.1);
  EXPECT_EQ(c.get_doubles("physics.list"), (std::vector<double>{1.0, 2.5, 3.0}));
  EXPECT_EQ(c.get_int("physics.missing", 7), 7);
}

TEST(ConfigParse, ErrorsNameTheLine) {
  auto message = [](const std::string& text) {
    try {
      Config::parse(text, "x.cfg");
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  EXPECT_TRUE(has_substr(message("a = 1\n[broken\n"), "x.cfg:2")) << message("a = 1\n[broken\n");
  EXPECT_TRUE(has_substr(message("\n\nno equals sign\n"), "x.cfg:3"));
  EXPECT_TRUE(has_substr(message("[s]\nk = 1\nk = 2\n"), "duplicate"));
  EXPECT_TRUE(has_substr(message("= 4\n"), "x.cfg:1"));
}

TEST(ConfigParse, RangeAndTypeErrorsNameTheField) {
  Config c = Config::parse("[physics]\nnu = -1\ndt = abc\n");
  try {
    c.get_double_in("physics.nu", 0.0, 1.0);
    FAIL() << "out-of-range value accepted";
  } catch (const ConfigError& e) {
    EXPECT_TRUE(has_substr(e.what(), "physics.nu"));
  }
  EXPECT_THROW(c.get_double("physics.dt"), ConfigError);
  EXPECT_THROW(c.get_double("physics.absent"), ConfigError);
}

TEST(Snapshot, RoundTripIsBitExact) {
  for (int seed = 0; seed < 10; ++seed) {
    Gen gen(1500 + seed);
    int n = gen.integer(2, 3);
    TorusGrid g(n, n == 2 ? 8 * gen.integer(1, 3) : 8);
    PhysicalField f = gen.physical(g, n);
    double t = gen.uniform(-5.0, 5.0);
    std::vector<std::uint8_t> bytes = encode_snapshot(f, t);
    EXPECT_EQ(bytes.size(), kSnapshotHeaderBytes + g.size() * n * 8);
    Snapshot back = decode_snapshot(bytes);
    EXPECT_EQ(back.time, t);
    ASSERT_EQ(back.field.values().size(), f.values().size());
    for (std::size_t i = 0; i < f.values().size(); ++i) EXPECT_EQ(back.field.values()[i], f.values()[i]);
    EXPECT_EQ(encode_snapshot(back.field, back.time), bytes);
  }
}

TEST(Snapshot, FileRoundTrip) {
  fs::path dir = scratch("snap");
  fs::create_directories(dir);
  Gen gen(1510);
  TorusGrid g(2, 16);
  PhysicalField f = gen.physical(g, 2);
  write_snapshot(dir / "a.nslb", f, 0.25);
  Snapshot s = read_snapshot(dir / "a.nslb");
  EXPECT_EQ(s.time, 0.25);
  EXPECT_EQ(s.field.values(), f.values());
  EXPECT_THROW(read_snapshot(dir / "missing.nslb"), SnapshotError);
}

TEST(Snapshot, RejectsCorruptInput) {
  Gen gen(1520);
  TorusGrid g(2, 8);
  std::vector<std::uint8_t> good = encode_snapshot(gen.physical(g, 2), 1.0);

  std::vector<std::uint8_t> truncated(good.begin(), good.end() - 3);
  try {
    decode_snapshot(truncated);
    FAIL() << "truncated snapshot accepted";
  } catch (const SnapshotError& e) {
    EXPECT_TRUE(has_substr(e.what(), "truncated"));
  }
  std::vector<std::uint8_t> short_header(good.begin(), good.begin() + 10);
  EXPECT_THROW(decode_snapshot(short_header), SnapshotError);

  std::vector<std::uint8_t> bad_magic = good;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_snapshot(bad_magic), SnapshotError);

  std::vector<std::uint8_t> bad_version = good;
  bad_version[4] = 9;
  try {
    decode_snapshot(bad_version);
    FAIL() << "future version accepted";
  } catch (const SnapshotError& e) {
    EXPECT_TRUE(has_substr(e.what(), "version"));
  }

  std::vector<std::uint8_t> trailing = good;
  trailing.push_back(0);
  EXPECT_THROW(decode_snapshot(trailing), SnapshotError);
}

TEST(Experiments, NamesAreFixed) {
  EXPECT_EQ(experiment_names(), (std::vector<std::string>{"simulate", "transform-check", "fit-singularity",
                                                          "verify-kernels", "rescale-audit", "duhamel-residual"}));
}

TEST(Experiments, MissingViscosityIsAConfigError) {
  Config broken = Config::parse("experiment = simulate\n[grid]\nn = 2\nN = 16\n[physics]\ndt = 0.001\nt_end = 0.01\n");
  RunOutcome r = run_experiment("simulate", broken, scratch("nonu"));
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_TRUE(has_substr(r.message, "physics.nu")) << r.message;
}

TEST(Experiments, UnknownOrMismatchedExperimentRejected) {
  Config c = Config::load(kSource / "configs/simulate_taylor_green.cfg");
  EXPECT_EQ(run_experiment("no-such", c, scratch("unknown")).exit_code, 2);
  RunOutcome r = run_experiment("verify-kernels", c, scratch("mismatch"));
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_TRUE(has_substr(r.message, "experiment")) << r.message;
}

TEST(Experiments, MissingConfigFileIsAConfigError) {
  RunOutcome r = run_experiment_file("simulate", kSource / "configs/absent.cfg", scratch("absent"));
  EXPECT_EQ(r.exit_code, 2);
}

TEST(Experiments, TaylorGreenTimeseriesAndReport) {
  fs::path out = scratch("tg");
  RunOutcome r = run_experiment_file("simulate", kSource / "configs/simulate_taylor_green.cfg", out);
  ASSERT_EQ(r.exit_code, 0) << r.message;
  std::istringstream csv(slurp(out / "timeseries.csv"));
  std::string line;
  // Rows end in CRLF.
  std::getline(csv, line);
  ASSERT_FALSE(line.empty());
  EXPECT_EQ(line.back(), '\r');
  EXPECT_EQ(line.substr(0, line.size() - 1), kTimeseriesHeader);
  double prev_energy = INFINITY, prev_time = -1.0;
  int rows = 0;
  while (std::getline(csv, line)) {
    double t = 0.0, e = 0.0;
    char comma = 0;
    std::istringstream row(line);
    row >> t >> comma >> e;
    EXPECT_GT(t, prev_time);
    EXPECT_LE(e, prev_energy);
    prev_time = t;
    prev_energy = e;
    ++rows;
  }
  EXPECT_EQ(rows, 51);
  // The velocity decays at rate 8 pi^2 nu, so the energy A^2/4 decays at twice that.
  EXPECT_NEAR(prev_energy, 0.25 * std::exp(-16.0 * M_PI * M_PI * 0.1 * 0.5), 1e-9);
  std::string report = slurp(out / "report.json");
  EXPECT_TRUE(has_substr(report, "\"status\": \"pass\""));
  EXPECT_TRUE(fs::exists(out / "report.meta.json"));
}

TEST(Experiments, ReportIsByteIdenticalAcrossRuns) {
  fs::path a = scratch("det_a"), b = scratch("det_b");
  ASSERT_EQ(run_experiment_file("simulate", kSource / "configs/simulate_random.cfg", a).exit_code, 0);
  ASSERT_EQ(run_experiment_file("simulate", kSource / "configs/simulate_random.cfg", b).exit_code, 0);
  EXPECT_EQ(slurp(a / "report.json"), slurp(b / "report.json"));
  EXPECT_EQ(slurp(a / "timeseries.csv"), slurp(b / "timeseries.csv"));
}

TEST(Experiments, SeedOverrideChangesRandomRuns) {
  fs::path a = scratch("seed_a"), b = scratch("seed_b");
  ASSERT_EQ(run_experiment_file("simulate", kSource / "configs/simulate_random.cfg", a, 1).exit_code, 0);
  ASSERT_EQ(run_experiment_file("simulate", kSource / "configs/simulate_random.cfg", b, 2).exit_code, 0);
  EXPECT_NE(slurp(a / "timeseries.csv"), slurp(b / "timeseries.csv"));
}

TEST(Experiments, BundledSnapshotFitPasses) {
  RunOutcome r = run_experiment_file("fit-singularity", kSource / "configs/fit_singularity.cfg", scratch("fit"));
  EXPECT_EQ(r.exit_code, 0) << r.message;
  EXPECT_EQ(r.assertions.size(), 4u);
  for (const auto& a : r.assertions) EXPECT_TRUE(a.pass) << a.name;
}

TEST(Experiments, CorruptSnapshotInManifestIsExitTwo) {
  fs::path dir = scratch("corrupt");
  fs::create_directories(dir);
  for (const auto& entry : fs::directory_iterator(kSource / "data/synthetic"))
    fs::copy_file(entry.path(), dir / entry.path().filename());
  fs::resize_file(dir / "snap_002.nslb", 100);
  std::string cfg = slurp(kSource / "configs/fit_singularity.cfg");
  cfg.replace(cfg.find("../data/synthetic/manifest.cfg"), std::string("../data/synthetic/manifest.cfg").size(),
              "manifest.cfg");
  std::ofstream(dir / "run.cfg") << cfg;
  RunOutcome r = run_experiment_file("fit-singularity", dir / "run.cfg", dir / "out");
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_TRUE(has_substr(r.message, "snapshot")) << r.message;
}

}  // namespace
}  // namespace nslb
