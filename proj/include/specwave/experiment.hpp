#pragma once

#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "specwave/analysis.hpp"

namespace specwave {

/*
 * Config-driven experiment layer behind the command line tool.  One flat
 * key/value config produces a machine-readable result table, a CSV summary,
 * and a manifest that reproduces the run byte for byte on the same build.
 * Results depend only on (config, seed, build); worker count changes the
 * schedule but never the output.
 */

// Parses "key = value" lines.  '#' starts a comment, blank lines are skipped,
// duplicate keys and lines without '=' are rejected.
std::map<std::string, std::string> parse_key_values(const std::string& text);

struct ExperimentConfig {
  std::string experiment;
  std::uint64_t seed = 0;
  int workers = 1;
  std::string output;
  long samples = 100;

  SimConfig sim;           // record grid already resolved from record_every
  long record_every = 1;   // record stride in steps; 0 keeps only endpoints

  EigenFamily family = EigenFamily::dirichlet_laplacian;
  double op_eta0 = 0.5;
  double op_scale = 1.0;

  HolderDrift drift;
  bool multiplier_on = false;
  HolderMultiplier multiplier;
  int mollify_level = 0;  // 0 runs the raw coefficients

  int initial_mode = 1;  // 0 starts from the zero state
  double initial_amplitude = 1.0;

  std::vector<double> mu_grid;
  std::vector<double> lambda_grid;
  double p = 2.0;
  double gamma_c = 0.1;
  double threshold_factor = 1.0;
  std::vector<int> coupling_levels;
  std::vector<double> tail_levels;
  std::vector<int> refine_levels;
  long time_points = 200;
  double time_max = 5.0;

  bool assert_enabled = true;
  double assert_distance_max = 0.0;  // 0 disables the final-distance check
  double assert_slope_max = -0.30;
  double assert_slope_min = 0.30;

  // Canonical text of every schema key, defaults included; the manifest body.
  std::map<std::string, std::string> resolved;
};

// Validates a raw key/value map against the schema (unknown keys rejected),
// fills defaults, and re-renders every value canonically so that a manifest
// resolves to the identical config.  With apply_env_seed the SPECWAVE_SEED
// environment variable overrides the seed key; reruns never apply it.
ExperimentConfig resolve_config(const std::map<std::string, std::string>& raw,
                                bool apply_env_seed);

struct ResultRecord {
  std::string params;     // "key=value" pairs joined by ';'
  std::string statistic;
  double value = 0.0;
  double se = 0.0;
  long n = 0;
};

struct ExperimentOutcome {
  std::vector<ResultRecord> records;
  std::vector<std::string> failures;  // named assertion violations
  std::vector<std::string> notices;
};

// Executes the configured experiment.  Throws ConfigError for semantic config
// problems and SimulationError when the computation itself breaks down.
ExperimentOutcome run_experiment(const ExperimentConfig& cfg);

std::vector<std::string> experiment_names();
std::string schema_text();

// Library version plus compiler tag; stamped into every manifest.
std::string build_fingerprint();

// One record per line: experiment,params,statistic,value,stderr,n,seed with
// numbers at 17 significant digits.
std::string render_results(const ExperimentConfig& cfg,
                           const std::vector<ResultRecord>& records);

// Field-by-field comparison of two rendered result tables with a relative
// tolerance on value and stderr.  Returns true on match; on mismatch `detail`
// names the first offending row.
bool compare_results(const std::string& expected, const std::string& actual, double tol,
                     std::string* detail);

// CLI entry points.  Both return the process exit code: 0 success, 1 failed
// assertion or reproduction mismatch, 2 config error, 3 simulation failure.
// Overrides apply when nonempty (output) or positive (workers).
int run_config_file(const std::string& config_path, const std::string& output_override,
                    int worker_override, std::ostream& log);
int rerun_manifest_file(const std::string& manifest_path, const std::string& output_override,
                        int worker_override, std::ostream& log);

}  // namespace specwave
