#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "doctest.h"
#include "specwave/experiment.hpp"

using namespace specwave;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir() {
  char tmpl[] = "/tmp/specwave_exp_XXXXXX";
  char* made = mkdtemp(tmpl);
  REQUIRE(made != nullptr);
  return fs::path(made);
}

std::string write_text(const fs::path& file, const std::string& text) {
  std::ofstream out(file);
  out << text;
  return file.string();
}

std::string read_text(const fs::path& file) {
  std::ifstream in(file);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::map<std::string, std::string> tiny_sk_map() {
  return {
      {"experiment", "sk-sweep"},   {"seed", "9"},
      {"sim.n_modes", "6"},         {"sim.grid_size", "12"},
      {"sim.dt", "0.01"},           {"sim.horizon", "0.2"},
      {"sim.record_every", "4"},    {"mu_grid", "0.1,0.01"},
      {"samples", "6"},             {"multiplier.form", "constant"},
      {"drift.form", "affine"},     {"drift.kappa", "-1"},
      {"assert.enabled", "false"},
  };
}

}  // namespace

TEST_CASE("key value parser handles comments, spacing, and malformed lines") {
  const auto kv = parse_key_values(
      "# header\n"
      "experiment = sk-sweep   # trailing comment\n"
      "\n"
      "  sim.dt=0.25  \n");
  CHECK(kv.size() == 2);
  CHECK(kv.at("experiment") == "sk-sweep");
  CHECK(kv.at("sim.dt") == "0.25");

  CHECK_THROWS_AS(parse_key_values("experiment sk-sweep\n"), ConfigError);
  CHECK_THROWS_AS(parse_key_values("a = 1\na = 2\n"), ConfigError);
  CHECK_THROWS_AS(parse_key_values("= 3\n"), ConfigError);
}

TEST_CASE("resolve fills defaults, rejects unknown keys and bad values") {
  auto cfg = resolve_config({{"experiment", "verify-bounds"}}, false);
  CHECK(cfg.sim.n_modes == 64);
  CHECK(cfg.workers == 1);
  CHECK(cfg.time_points == 200);
  CHECK(cfg.mu_grid.size() == 5);
  CHECK(cfg.resolved.at("sim.dt") == "0.001");

  CHECK_THROWS_AS(resolve_config({}, false), ConfigError);
  CHECK_THROWS_AS(resolve_config({{"experiment", "verify-bounds"}, {"wibble", "1"}}, false),
                  ConfigError);
  CHECK_THROWS_AS(resolve_config({{"experiment", "nope"}}, false), ConfigError);
  CHECK_THROWS_AS(
      resolve_config({{"experiment", "verify-bounds"}, {"sim.dt", "fast"}}, false), ConfigError);
  CHECK_THROWS_AS(
      resolve_config({{"experiment", "verify-bounds"}, {"samples", "2.5"}}, false), ConfigError);
  CHECK_THROWS_AS(resolve_config({{"experiment", "verify-bounds"}, {"seed", "-3"}}, false),
                  ConfigError);
  CHECK_THROWS_AS(
      resolve_config({{"experiment", "verify-bounds"}, {"mu_grid", "0.5,2"}}, false),
      ConfigError);
}

TEST_CASE("experiment-specific config rules") {
  auto sk = tiny_sk_map();
  sk["sim.zeta"] = "0";
  CHECK_THROWS_AS(resolve_config(sk, false), ConfigError);

  sk = tiny_sk_map();
  sk["sim.record_every"] = "3";  // 20 steps, stride 3
  CHECK_THROWS_AS(resolve_config(sk, false), ConfigError);

  CHECK_THROWS_AS(resolve_config({{"experiment", "convolution-scaling"}}, false),
                  ConfigError);  // default lambda_grid contains 0
  CHECK_THROWS_AS(resolve_config({{"experiment", "convolution-scaling"},
                                  {"lambda_grid", "1,4,4"}},
                                 false),
                  ConfigError);
  CHECK_THROWS_AS(resolve_config({{"experiment", "coupling"}}, false),
                  ConfigError);  // multiplier defaults to none
  CHECK_THROWS_AS(resolve_config({{"experiment", "coupling"}, {"multiplier.form", "constant"}},
                                 false),
                  ConfigError);
}

TEST_CASE("manifest round trip: resolving the resolved map is a fixed point") {
  const auto cfg = resolve_config(tiny_sk_map(), false);
  const auto again = resolve_config(cfg.resolved, false);
  CHECK(again.resolved == cfg.resolved);
  CHECK(again.seed == cfg.seed);
  CHECK(again.sim.record_times == cfg.sim.record_times);
}

TEST_CASE("environment seed override applies to runs only") {
  setenv("SPECWAVE_SEED", "777", 1);
  const auto with_env = resolve_config(tiny_sk_map(), true);
  CHECK(with_env.seed == 777);
  const auto without_env = resolve_config(tiny_sk_map(), false);
  CHECK(without_env.seed == 9);
  unsetenv("SPECWAVE_SEED");
}

TEST_CASE("verify suites report every cell with nonnegative slack") {
  auto cfg = resolve_config({{"experiment", "verify-semigroup"},
                             {"sim.n_modes", "6"},
                             {"time.points", "20"}},
                            false);
  auto out = run_experiment(cfg);
  CHECK(out.records.size() == 8);
  for (const auto& r : out.records) {
    CHECK(r.statistic == "worst_slack");
    CHECK(r.value >= -1e-12);
    CHECK(r.n > 0);
  }
  CHECK(out.failures.empty());

  cfg = resolve_config(
      {{"experiment", "verify-bounds"}, {"sim.n_modes", "6"}, {"time.points", "20"}}, false);
  out = run_experiment(cfg);
  CHECK(out.records.size() == 13);
  for (const auto& r : out.records) CHECK(r.value >= -1e-12);
  CHECK(out.failures.empty());
}

TEST_CASE("sk sweep emits per-mass rows plus the shared limit row") {
  const auto cfg = resolve_config(tiny_sk_map(), false);
  const auto out = run_experiment(cfg);
  CHECK(out.records.size() == 13);  // 5 stats per mass, 3 for the limit system
  long heat_rows = 0;
  for (const auto& r : out.records)
    if (r.params == "system=heat") ++heat_rows;
  CHECK(heat_rows == 3);
  CHECK(out.failures.empty());  // assertions disabled in the config
}

TEST_CASE("single-point mass grid skips trend assertions with a notice") {
  auto raw = tiny_sk_map();
  raw["mu_grid"] = "0.01";
  raw["assert.enabled"] = "true";
  const auto out = run_experiment(resolve_config(raw, false));
  CHECK(out.failures.empty());
  REQUIRE(out.notices.size() == 1);
  CHECK(out.notices[0].find("single point") != std::string::npos);
}

TEST_CASE("result rendering pins the field order and digit count") {
  auto cfg = resolve_config(tiny_sk_map(), false);
  std::vector<ResultRecord> records{{"mu=0.1", "stat", 1.0 / 3.0, 0.25, 6}};
  CHECK(render_results(cfg, records) ==
        "sk-sweep,mu=0.1,stat,0.33333333333333331,0.25,6,9\n");
  records[0].value = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(render_results(cfg, records), SimulationError);
}

TEST_CASE("tolerance comparison distinguishes noise from drift") {
  const std::string base = "e,p,s,1.0000000000,0.5,6,9\n";
  std::string detail;
  CHECK(compare_results(base, "e,p,s,1.0000000004,0.5,6,9\n", 1e-9, &detail));
  CHECK_FALSE(compare_results(base, "e,p,s,1.00001,0.5,6,9\n", 1e-9, &detail));
  CHECK(detail.find("row 1") != std::string::npos);
  CHECK_FALSE(compare_results(base, "e,p,s,1.0000000000,0.5,7,9\n", 1e-9, &detail));
  CHECK_FALSE(compare_results(base, base + base, 1e-9, &detail));
}

TEST_CASE("file driver: run, manifest rerun, and corruption detection") {
  const fs::path dir = fresh_dir();
  std::string text = "experiment = sk-sweep\nseed = 9\nsim.n_modes = 6\nsim.grid_size = 12\n"
                     "sim.dt = 0.01\nsim.horizon = 0.2\nsim.record_every = 4\n"
                     "mu_grid = 0.1,0.01\nsamples = 6\nmultiplier.form = constant\n"
                     "drift.form = affine\ndrift.kappa = -1\nassert.enabled = false\n";
  const std::string cfg_file =
      write_text(dir / "run.cfg", text + "output = " + (dir / "out").string() + "\n");

  std::ostringstream log;
  CHECK(run_config_file(cfg_file, "", 0, log) == 0);
  CHECK(fs::exists(dir / "out" / "results.txt"));
  CHECK(fs::exists(dir / "out" / "summary.csv"));
  CHECK(fs::exists(dir / "out" / "manifest.txt"));
  const std::string first = read_text(dir / "out" / "results.txt");
  CHECK(first.find("sk-sweep,mu=0.1,sup_distance_mean,") != std::string::npos);

  // Same config, more workers: byte-identical results.
  const std::string cfg4 =
      write_text(dir / "run4.cfg",
                 text + "workers = 4\noutput = " + (dir / "out4").string() + "\n");
  CHECK(run_config_file(cfg4, "", 0, log) == 0);
  CHECK(read_text(dir / "out4" / "results.txt") == first);

  // Rerun from the manifest, overriding workers again.
  CHECK(rerun_manifest_file((dir / "out" / "manifest.txt").string(), "", 3, log) == 0);
  CHECK(read_text(dir / "out" / "rerun" / "results.txt") == first);
  CHECK(log.str().find("byte for byte") != std::string::npos);

  // A corrupted results file must be flagged.
  write_text(dir / "out" / "results.txt", first + "extra,row,x,0,0,0,0\n");
  std::ostringstream log2;
  CHECK(rerun_manifest_file((dir / "out" / "manifest.txt").string(), "", 0, log2) == 1);
  CHECK(log2.str().find("mismatch") != std::string::npos);

  fs::remove_all(dir);
}

TEST_CASE("file driver exit codes for config failures") {
  std::ostringstream log;
  CHECK(run_config_file("/nonexistent/specwave.cfg", "", 0, log) == 2);

  const fs::path dir = fresh_dir();
  const std::string bad =
      write_text(dir / "bad.cfg", "experiment = sk-sweep\nsim.dt = -1\noutput = " +
                                      (dir / "nope").string() + "\n");
  CHECK(run_config_file(bad, "", 0, log) == 2);
  CHECK_FALSE(fs::exists(dir / "nope"));

  const std::string no_out = write_text(dir / "noout.cfg", "experiment = verify-bounds\n");
  CHECK(run_config_file(no_out, "", 0, log) == 2);
  fs::remove_all(dir);
}

TEST_CASE("self-convergence runner validates the refinement ladder") {
  auto raw = std::map<std::string, std::string>{
      {"experiment", "self-convergence"}, {"sim.n_modes", "4"},  {"sim.grid_size", "8"},
      {"sim.dt", "0.005"},                {"sim.horizon", "0.2"}, {"samples", "3"},
      {"drift.form", "affine"},           {"drift.kappa", "-2"}, {"multiplier.form", "constant"},
      {"refine.levels", "8,4,2"},         {"sim.record_every", "1"},
  };
  const auto out = run_experiment(resolve_config(raw, false));
  // 40 steps: distances per level plus dt rows plus the fitted slope.
  CHECK(out.records.size() == 7);
  CHECK(out.records.back().statistic == "slope");
  CHECK(out.failures.empty());

  raw["refine.levels"] = "16,8";  // 16 does not divide 40
  CHECK_THROWS_AS(run_experiment(resolve_config(raw, false)), ConfigError);
  raw["refine.levels"] = "12,8";  // 8 does not divide 12
  CHECK_THROWS_AS(run_experiment(resolve_config(raw, false)), ConfigError);
}

TEST_CASE("schema text and experiment list cover the public surface") {
  const auto names = experiment_names();
  CHECK(names.size() == 6);
  const std::string schema = schema_text();
  for (const char* key : {"experiment", "sim.dt", "mu_grid", "coupling.levels",
                          "assert.slope_max", "SPECWAVE_SEED"})
    CHECK(schema.find(key) != std::string::npos);
  CHECK(build_fingerprint().find("specwave") == 0);
}
