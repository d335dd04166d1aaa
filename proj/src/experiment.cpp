#include "specwave/experiment.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "specwave/version.hpp"

namespace specwave {
namespace {

constexpr double kSlackFloor = -1e-12;

std::string trim(const std::string& s) {
  std::size_t a = 0;
  std::size_t b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

std::string num17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string num12(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::string num6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* want) {
  throw ConfigError("config key '" + key + "': cannot parse '" + value + "' as " + want);
}

double parse_double(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  if (v.empty()) bad_value(key, value, "a number");
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (end != v.c_str() + v.size()) bad_value(key, value, "a number");
  if (!std::isfinite(x)) bad_value(key, value, "a finite number");
  return x;
}

long parse_long(const std::string& key, const std::string& value) {
  const double x = parse_double(key, value);
  if (x != std::nearbyint(x) || std::fabs(x) > 9.0e15) bad_value(key, value, "an integer");
  return static_cast<long>(x);
}

std::uint64_t parse_seed(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos)
    bad_value(key, value, "an unsigned integer");
  try {
    return std::stoull(v);
  } catch (const std::exception&) {
    bad_value(key, value, "an unsigned 64-bit integer");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad_value(key, value, "a boolean (true/false)");
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string item;
  std::stringstream in(s);
  while (std::getline(in, item, sep)) parts.push_back(item);
  if (!s.empty() && s.back() == sep) parts.push_back("");
  return parts;
}

std::vector<double> parse_double_list(const std::string& key, const std::string& value) {
  std::vector<double> out;
  for (const std::string& item : split(value, ',')) out.push_back(parse_double(key, item));
  if (out.empty()) bad_value(key, value, "a comma-separated list of numbers");
  return out;
}

std::vector<int> parse_int_list(const std::string& key, const std::string& value) {
  std::vector<int> out;
  for (const std::string& item : split(value, ',')) {
    const long x = parse_long(key, item);
    if (x < -2000000000L || x > 2000000000L) bad_value(key, value, "a list of small integers");
    out.push_back(static_cast<int>(x));
  }
  if (out.empty()) bad_value(key, value, "a comma-separated list of integers");
  return out;
}

std::string join_doubles(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += num17(v[i]);
  }
  return out;
}

std::string join_ints(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(v[i]);
  }
  return out;
}

struct SchemaEntry {
  const char* key;
  const char* type;
  const char* fallback;
  const char* doc;
};

const SchemaEntry kSchema[] = {
    {"experiment", "name", "", "one of the names from list-experiments; required"},
    {"seed", "uint64", "0", "root seed of every noise stream; SPECWAVE_SEED overrides it for run"},
    {"workers", "int", "1", "sampling threads; never changes any result"},
    {"output", "path", "", "directory receiving results.txt, summary.csv, manifest.txt"},
    {"samples", "int", "100", "Monte Carlo samples per grid cell"},
    {"sim.n_modes", "int", "64", "spectral truncation; also the mode cap of the verify sweeps"},
    {"sim.grid_size", "int", "256", "physical grid points for coefficient evaluation"},
    {"sim.dt", "float", "0.001", "step size; the finest one for self-convergence"},
    {"sim.horizon", "float", "1", "final time, a whole number of steps"},
    {"sim.mu", "float", "0.001", "mass in front of the second time derivative"},
    {"sim.lambda", "float", "0", "spectral shift added to every eigenvalue"},
    {"sim.zeta", "int", "1", "damping switch, 0 or 1"},
    {"sim.record_every", "int", "1", "record stride in steps; 0 keeps only the endpoints"},
    {"operator.family", "name", "dirichlet_laplacian",
     "dirichlet_laplacian, bilaplacian_1d, or power_law"},
    {"operator.eta0", "float", "0.5", "trace exponent of the power_law family"},
    {"operator.scale", "float", "1", "eigenvalue scale of the power_law family"},
    {"drift.form", "name", "zero", "zero, signed_power, or affine"},
    {"drift.alpha", "float", "0.8", "drift roughness exponent in (0,1]"},
    {"drift.kappa", "float", "0", "drift magnitude"},
    {"drift.offset", "float", "0", "constant part of the affine drift"},
    {"multiplier.form", "name", "none", "none, constant, or power; none switches the noise off"},
    {"multiplier.beta", "float", "0.8", "multiplier roughness exponent in (3/4,1]"},
    {"multiplier.floor", "float", "1", "uniform lower bound of the multiplier"},
    {"multiplier.scale", "float", "1", "state-dependent part of the multiplier"},
    {"mollify.level", "int", "0", "piecewise-linear approximation level for both coefficients; 0 runs them raw"},
    {"initial.mode", "int", "1", "mode carrying the initial displacement; 0 starts from rest"},
    {"initial.amplitude", "float", "1", "initial coefficient on that mode"},
    {"mu_grid", "floats", "0.0001,0.001,0.01,0.1,1",
     "mass grid of the verify sweeps and the mass sweep"},
    {"lambda_grid", "floats", "0,1,10,100",
     "shift grid; the scaling study needs distinct positive values"},
    {"p", "float", "2", "moment order of the scaling study"},
    {"gamma_c", "float", "0.1", "cost exponent of the coupling control rate"},
    {"threshold.factor", "float", "1",
     "stopping threshold as a multiple of the measured approximation error"},
    {"coupling.levels", "ints", "16,64,256", "approximation levels compared by the coupling run"},
    {"tail.levels", "floats", "0.001,0.01,0.1", "deviation levels of the coupling tail report"},
    {"refine.levels", "ints", "16,8,4,2", "coarsening factors of the self-convergence ladder"},
    {"time.points", "int", "200", "time grid points of the verify sweeps"},
    {"time.max", "float", "5", "largest time of the verify sweeps"},
    {"assert.enabled", "bool", "true", "run the configured trend and threshold assertions"},
    {"assert.distance_max", "float", "0", "cap on the smallest-mass sweep distance; 0 disables"},
    {"assert.slope_max", "float", "-0.3", "ceiling for the scaling-study slope"},
    {"assert.slope_min", "float", "0.3", "floor for the self-convergence slope"},
};

FieldFn make_drift_field(const ExperimentConfig& cfg) {
  if (cfg.drift.form == DriftForm::zero) return FieldFn{};
  if (cfg.mollify_level > 0) return approx_field(mollify_1d(cfg.drift, cfg.mollify_level));
  return drift_field(cfg.drift);
}

FieldFn make_multiplier_field(const ExperimentConfig& cfg) {
  if (!cfg.multiplier_on) return FieldFn{};
  if (cfg.mollify_level > 0) return approx_field(mollify_1d(cfg.multiplier, cfg.mollify_level));
  return multiplier_field(cfg.multiplier);
}

PhaseState initial_state(const ExperimentConfig& cfg) {
  PhaseState z;
  z.u = Eigen::VectorXd::Zero(cfg.sim.n_modes);
  z.v = Eigen::VectorXd::Zero(cfg.sim.n_modes);
  if (cfg.initial_mode > 0) z.u[cfg.initial_mode - 1] = cfg.initial_amplitude;
  return z;
}

const char* bound_name(BoundId id) {
  switch (id) {
    case BoundId::displacement_low_modes: return "displacement_low_modes";
    case BoundId::velocity_low_modes: return "velocity_low_modes";
    case BoundId::displacement_high_modes: return "displacement_high_modes";
    case BoundId::velocity_high_modes: return "velocity_high_modes";
    case BoundId::displacement_undamped: return "displacement_undamped";
    case BoundId::velocity_undamped: return "velocity_undamped";
    case BoundId::energy: return "energy";
  }
  return "unknown";
}

const char* norm_name(OperatorBound id) {
  switch (id) {
    case OperatorBound::response: return "response";
    case OperatorBound::position: return "position";
    case OperatorBound::velocity_low: return "velocity_low";
    case OperatorBound::velocity_high: return "velocity_high";
    case OperatorBound::velocity_high_shifted: return "velocity_high_shifted";
    case OperatorBound::phase_space: return "phase_space";
    case OperatorBound::phase_space_shifted: return "phase_space_shifted";
  }
  return "unknown";
}

// Worst (smallest) relative slack seen so far, with the grid point realizing it.
struct WorstCell {
  double slack = std::numeric_limits<double>::infinity();
  long checks = 0;
  int k = 0;
  double mu = 0.0, lambda = 0.0, t = 0.0;

  void feed(double quantity, double ceiling, int kk, double m, double l, double tt) {
    const double s = (ceiling - quantity) / std::max(1.0, ceiling);
    ++checks;
    if (s < slack) {
      slack = s;
      k = kk;
      mu = m;
      lambda = l;
      t = tt;
    }
  }

  std::string where() const {
    std::string out = "k=" + std::to_string(k) + " mu=" + num12(mu) + " lambda=" + num12(lambda) +
                      " t=" + num12(t) + " slack=" + num12(slack);
    return out;
  }
};

void push(ExperimentOutcome& out, std::string params, std::string statistic, double value,
          double se, long n) {
  out.records.push_back({std::move(params), std::move(statistic), value, se, n});
}

ExperimentOutcome run_verify_semigroup(const ExperimentConfig& cfg) {
  ExperimentOutcome out;
  const SpectralOperator op = make_operator(cfg.family, cfg.sim.n_modes, cfg.op_eta0, cfg.op_scale);
  const double eu = 0.6, ev = -0.8;  // energy check initial data

  // Cells 0..4 carry zeta = 1, cells 5..7 carry zeta = 0.
  const BoundId ids[8] = {BoundId::displacement_low_modes, BoundId::velocity_low_modes,
                          BoundId::displacement_high_modes, BoundId::velocity_high_modes,
                          BoundId::energy,
                          BoundId::displacement_undamped, BoundId::velocity_undamped,
                          BoundId::energy};
  WorstCell cells[8];

  for (int zeta : {1, 0}) {
    WorstCell* base = zeta == 1 ? cells : cells + 5;
    for (double mu : cfg.mu_grid) {
      for (double lam : cfg.lambda_grid) {
        for (int k = 1; k <= op.modes(); ++k) {
          const double gamma = op.eigenvalue(k) + lam;
          const ModePropagator prop = make_propagator(mu, zeta, gamma);
          const double tol = discriminant_tolerance(mu, gamma);
          const bool low = zeta == 1 && prop.discriminant >= -tol;
          const bool high = zeta == 1 && prop.discriminant <= tol;
          for (long j = 0; j < cfg.time_points; ++j) {
            const double t = cfg.time_max * double(j) / double(cfg.time_points - 1);
            const ModeValue a = propagate(prop, 0.0, 1.0, t);
            if (zeta == 1) {
              if (low) {
                base[0].feed(std::fabs(a.f),
                             bound_oracle(prop, t, BoundId::displacement_low_modes), k, mu, lam, t);
                base[1].feed(std::fabs(a.fp), bound_oracle(prop, t, BoundId::velocity_low_modes),
                             k, mu, lam, t);
              }
              if (high) {
                base[2].feed(std::fabs(a.f),
                             bound_oracle(prop, t, BoundId::displacement_high_modes), k, mu, lam,
                             t);
                base[3].feed(std::fabs(a.fp), bound_oracle(prop, t, BoundId::velocity_high_modes),
                             k, mu, lam, t);
              }
            } else {
              base[0].feed(std::fabs(a.f), bound_oracle(prop, t, BoundId::displacement_undamped),
                           k, mu, lam, t);
              base[1].feed(std::fabs(a.fp), bound_oracle(prop, t, BoundId::velocity_undamped), k,
                           mu, lam, t);
            }
            const ModeValue e = propagate(prop, eu, ev, t);
            const double energy = mu * e.fp * e.fp + gamma * e.f * e.f;
            (zeta == 1 ? base[4] : base[2])
                .feed(energy, bound_oracle(prop, t, BoundId::energy, eu, ev), k, mu, lam, t);
          }
        }
      }
    }
  }

  for (int c = 0; c < 8; ++c) {
    const int zeta = c < 5 ? 1 : 0;
    const std::string params =
        std::string("bound=") + bound_name(ids[c]) + ";zeta=" + std::to_string(zeta);
    push(out, params, "worst_slack", cells[c].slack, 0.0, cells[c].checks);
    if (cfg.assert_enabled && cells[c].slack < kSlackFloor)
      out.failures.push_back(std::string("decay envelope violated: ") + bound_name(ids[c]) +
                             " (zeta=" + std::to_string(zeta) + ") at " + cells[c].where());
  }
  return out;
}

ExperimentOutcome run_verify_bounds(const ExperimentConfig& cfg) {
  ExperimentOutcome out;
  const SpectralOperator op = make_operator(cfg.family, cfg.sim.n_modes, cfg.op_eta0, cfg.op_scale);
  const OperatorBound all[] = {OperatorBound::response,
                               OperatorBound::position,
                               OperatorBound::velocity_low,
                               OperatorBound::velocity_high,
                               OperatorBound::velocity_high_shifted,
                               OperatorBound::phase_space,
                               OperatorBound::phase_space_shifted};
  for (int zeta : {1, 0}) {
    for (OperatorBound which : all) {
      if (zeta == 0 && which == OperatorBound::velocity_low) continue;
      WorstCell cell;
      for (double mu : cfg.mu_grid) {
        for (double lam : cfg.lambda_grid) {
          for (long j = 0; j < cfg.time_points; ++j) {
            const double t = cfg.time_max * double(j) / double(cfg.time_points - 1);
            const NormCheck c = operator_norm_check(op, mu, lam, zeta, t, which);
            cell.feed(c.computed, c.bound, 0, mu, lam, t);
          }
        }
      }
      const std::string params =
          std::string("norm=") + norm_name(which) + ";zeta=" + std::to_string(zeta);
      push(out, params, "worst_slack", cell.slack, 0.0, cell.checks);
      if (cfg.assert_enabled && cell.slack < kSlackFloor)
        out.failures.push_back(std::string("operator norm ceiling exceeded: ") + norm_name(which) +
                               " (zeta=" + std::to_string(zeta) + ") at " + cell.where());
    }
  }
  return out;
}

ExperimentOutcome run_sk_sweep(const ExperimentConfig& cfg) {
  ExperimentOutcome out;
  const SpectralOperator op = make_operator(cfg.family, cfg.sim.n_modes, cfg.op_eta0, cfg.op_scale);
  const FieldFn drift = make_drift_field(cfg);
  const FieldFn mult = make_multiplier_field(cfg);
  const PhaseState z0 = initial_state(cfg);
  const SkTable table =
      sk_study(op, cfg.sim, drift, mult, cfg.mu_grid, z0, static_cast<int>(cfg.samples),
               cfg.workers);

  std::vector<double> gaps(table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const SkRow& row = table.rows[i];
    const std::string params = "mu=" + num12(row.mu);
    push(out, params, "sup_distance_mean", row.distance.mean(), row.distance.se(),
         row.distance.count());
    push(out, params, "end_norm_mean", row.wave.norm.mean(), row.wave.norm.se(),
         row.wave.norm.count());
    push(out, params, "end_norm2_mean", row.wave.norm2.mean(), row.wave.norm2.se(),
         row.wave.norm2.count());
    push(out, params, "end_mode1_mean", row.wave.mode1.mean(), row.wave.mode1.se(),
         row.wave.mode1.count());
    gaps[i] = std::fabs(row.wave.norm2.mean() - table.heat.norm2.mean());
    const double gap_se = std::hypot(row.wave.norm2.se(), table.heat.norm2.se());
    push(out, params, "end_norm2_gap", gaps[i], gap_se, row.wave.norm2.count());
  }
  push(out, "system=heat", "end_norm_mean", table.heat.norm.mean(), table.heat.norm.se(),
       table.heat.norm.count());
  push(out, "system=heat", "end_norm2_mean", table.heat.norm2.mean(), table.heat.norm2.se(),
       table.heat.norm2.count());
  push(out, "system=heat", "end_mode1_mean", table.heat.mode1.mean(), table.heat.mode1.se(),
       table.heat.mode1.count());

  if (!cfg.assert_enabled) return out;
  if (table.rows.size() < 2) {
    out.notices.push_back("trend assertions skipped: the mass grid has a single point");
    return out;
  }
  std::vector<std::size_t> order(table.rows.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return table.rows[a].mu > table.rows[b].mu; });
  for (std::size_t i = 0; i + 1 < order.size(); ++i) {
    const SkRow& big = table.rows[order[i]];
    const SkRow& small = table.rows[order[i + 1]];
    if (cfg.mollify_level > 0) {
      if (!(small.distance.mean() < big.distance.mean()))
        out.failures.push_back("mass-limit distance not decreasing: mu " + num12(big.mu) + " -> " +
                               num12(small.mu) + " mean " + num12(big.distance.mean()) + " -> " +
                               num12(small.distance.mean()));
    } else {
      if (!(gaps[order[i + 1]] < gaps[order[i]]))
        out.failures.push_back("end-state law gap not decreasing: mu " + num12(big.mu) + " -> " +
                               num12(small.mu) + " gap " + num12(gaps[order[i]]) + " -> " +
                               num12(gaps[order[i + 1]]));
    }
  }
  if (cfg.mollify_level > 0 && cfg.assert_distance_max > 0) {
    const SkRow& last = table.rows[order.back()];
    if (!(last.distance.mean() < cfg.assert_distance_max))
      out.failures.push_back("mass-limit distance " + num12(last.distance.mean()) + " at mu=" +
                             num12(last.mu) + " exceeds " + num12(cfg.assert_distance_max));
  }
  return out;
}

ExperimentOutcome run_convolution_scaling(const ExperimentConfig& cfg) {
  ExperimentOutcome out;
  const SpectralOperator op = make_operator(cfg.family, cfg.sim.n_modes, cfg.op_eta0, cfg.op_scale);
  const ScalingFit fit = convolution_scaling_study(op, cfg.sim, cfg.p, cfg.lambda_grid,
                                                   static_cast<int>(cfg.samples), cfg.workers);
  for (const ScalingPoint& pt : fit.points) {
    push(out, "lambda=" + num12(pt.lambda), "sup_norm_p_mean", pt.estimate, pt.se, pt.survivors);
  }
  push(out, "fit=log-log", "slope", fit.slope, 0.0, long(fit.points.size()));
  push(out, "fit=log-log", "intercept", fit.intercept, 0.0, long(fit.points.size()));

  if (!cfg.assert_enabled) return out;
  for (std::size_t i = 0; i + 1 < fit.points.size(); ++i) {
    if (!(fit.points[i + 1].estimate < fit.points[i].estimate))
      out.failures.push_back("noise response not decreasing: lambda " +
                             num12(fit.points[i].lambda) + " -> " +
                             num12(fit.points[i + 1].lambda) + " mean " +
                             num12(fit.points[i].estimate) + " -> " +
                             num12(fit.points[i + 1].estimate));
  }
  if (!(fit.slope <= cfg.assert_slope_max))
    out.failures.push_back("noise response slope " + num12(fit.slope) + " above ceiling " +
                           num12(cfg.assert_slope_max));
  return out;
}

ExperimentOutcome run_self_convergence(const ExperimentConfig& cfg) {
  ExperimentOutcome out;
  const long steps = std::lround(cfg.sim.horizon / cfg.sim.dt);
  const std::vector<int>& levels = cfg.refine_levels;  // sorted descending
  const int rmax = levels.front();
  for (int r : levels) {
    if (steps % r != 0)
      throw ConfigError("refinement factor " + std::to_string(r) +
                        " does not divide the step count " + std::to_string(steps));
    if (rmax % r != 0)
      throw ConfigError("refinement factors must divide the largest one (" +
                        std::to_string(rmax) + ") so that all runs share record times");
  }
  const long stride = cfg.record_every == 0 ? steps : cfg.record_every * rmax;
  if (steps % stride != 0)
    throw ConfigError("sim.record_every * " + std::to_string(rmax) +
                      " must divide the step count " + std::to_string(steps));

  SimConfig fine = cfg.sim;
  fine.record_times.clear();
  for (long j = 0; j * stride <= steps; ++j)
    fine.record_times.push_back(j * stride == steps ? fine.horizon
                                                    : double(j * stride) * fine.dt);
  validate(fine);

  std::vector<SimConfig> coarse;
  for (int r : levels) {
    SimConfig c = fine;
    c.dt = double(r) * fine.dt;
    coarse.push_back(c);
  }

  const SpectralOperator op = make_operator(cfg.family, cfg.sim.n_modes, cfg.op_eta0, cfg.op_scale);
  const FieldFn drift = make_drift_field(cfg);
  const FieldFn mult = make_multiplier_field(cfg);
  const PhaseState z0 = initial_state(cfg);

  const std::function<std::vector<double>(long)> body = [&](long s) {
    const WavePath ref = simulate_wave(op, fine, drift, mult, z0, NoiseStream(cfg.seed, s));
    const FieldPath refp = position_path(ref);
    std::vector<double> dist(levels.size());
    for (std::size_t i = 0; i < levels.size(); ++i) {
      RefinedStepNoise noise(op, coarse[i], levels[i], NoiseStream(cfg.seed, s));
      const WavePath path = simulate_wave(op, coarse[i], drift, mult, z0, noise);
      dist[i] = sup_path_distance(refp, position_path(path));
    }
    return dist;
  };
  const auto samples = collect_samples<std::vector<double>>(cfg.samples, cfg.workers, body);

  std::vector<MeanSE> acc(levels.size());
  for (const auto& d : samples)
    for (std::size_t i = 0; i < levels.size(); ++i) acc[i].add(d[i]);

  std::vector<double> dts, means;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    const std::string params = "refine=" + std::to_string(levels[i]);
    push(out, params, "dt", coarse[i].dt, 0.0, acc[i].count());
    push(out, params, "sup_distance_mean", acc[i].mean(), acc[i].se(), acc[i].count());
    dts.push_back(coarse[i].dt);
    means.push_back(acc[i].mean());
  }

  const double floor_level = 1e-14;
  const bool degenerate =
      *std::max_element(means.begin(), means.end()) < floor_level || levels.size() < 2;
  if (degenerate) {
    out.notices.push_back(levels.size() < 2
                              ? "trend assertions skipped: a single refinement level fixes no trend"
                              : "trend assertions skipped: distances sit at the floating-point floor");
    return out;
  }
  double slope = 0.0, intercept = 0.0;
  fit_log_log(dts, means, &slope, &intercept);
  push(out, "fit=log-log", "slope", slope, 0.0, long(levels.size()));

  if (!cfg.assert_enabled) return out;
  for (std::size_t i = 0; i + 1 < levels.size(); ++i) {
    if (!(means[i + 1] < means[i]))
      out.failures.push_back("discretization error not decreasing: refine " +
                             std::to_string(levels[i]) + " -> " + std::to_string(levels[i + 1]) +
                             " mean " + num12(means[i]) + " -> " + num12(means[i + 1]));
  }
  if (!(slope >= cfg.assert_slope_min))
    out.failures.push_back("self-convergence slope " + num12(slope) + " below floor " +
                           num12(cfg.assert_slope_min));
  return out;
}

ExperimentOutcome run_coupling(const ExperimentConfig& cfg) {
  ExperimentOutcome out;
  const SpectralOperator op = make_operator(cfg.family, cfg.sim.n_modes, cfg.op_eta0, cfg.op_scale);
  const FieldFn drift = make_drift_field(cfg);
  const FieldFn mult = multiplier_field(cfg.multiplier);
  const PhaseState z0 = initial_state(cfg);

  std::vector<double> p_cross, tv_mean;
  for (int level : cfg.coupling_levels) {
    const LipschitzApprox approx = mollify_1d(cfg.multiplier, level);
    const double c_n = approx.error_bound();
    if (!(c_n > 0))
      throw ConfigError("approximation error vanishes at level " + std::to_string(level) +
                        "; nothing to couple");
    const double threshold = cfg.threshold_factor * c_n;
    const double rate = std::pow(threshold, cfg.gamma_c - 1.0);
    const FieldFn approx_mult = approx_field(approx);

    const std::function<CoupledRun(long)> body = [&](long s) {
      return simulate_controlled_pair(op, cfg.sim, drift, mult, approx_mult, threshold, rate, z0,
                                      NoiseStream(cfg.seed, s));
    };
    const auto runs = collect_samples<CoupledRun>(cfg.samples, cfg.workers, body);
    const CouplingReport rep = coupling_report(runs, threshold, cfg.gamma_c, cfg.sim.horizon,
                                               cfg.multiplier.floor, cfg.tail_levels);

    const std::string params = "level=" + std::to_string(level);
    push(out, params, "approx_error", c_n, 0.0, rep.runs);
    push(out, params, "threshold", threshold, 0.0, rep.runs);
    push(out, params, "control_rate", rate, 0.0, rep.runs);
    push(out, params, "cost_ceiling", rep.cost_ceiling, 0.0, rep.runs);
    push(out, params, "p_cross", rep.p_cross, (rep.wilson_high - rep.wilson_low) / 2, rep.runs);
    push(out, params, "wilson_low", rep.wilson_low, 0.0, rep.runs);
    push(out, params, "wilson_high", rep.wilson_high, 0.0, rep.runs);
    push(out, params, "mean_cost", rep.mean_cost, 0.0, rep.runs);
    push(out, params, "max_cost", rep.max_cost, 0.0, rep.runs);
    push(out, params, "tv_budget_mean", rep.tv_budget.mean(), rep.tv_budget.se(), rep.runs);
    for (std::size_t i = 0; i < rep.tail_levels.size(); ++i)
      push(out, params + ";s=" + num12(rep.tail_levels[i]), "tail_prob", rep.tail_probs[i], 0.0,
           rep.runs);
    p_cross.push_back(rep.p_cross);
    tv_mean.push_back(rep.tv_budget.mean());
  }

  if (!cfg.assert_enabled) return out;
  if (cfg.coupling_levels.size() < 2) {
    out.notices.push_back("trend assertions skipped: a single approximation level fixes no trend");
    return out;
  }
  for (std::size_t i = 0; i + 1 < cfg.coupling_levels.size(); ++i) {
    if (!(p_cross[i + 1] <= p_cross[i]))
      out.failures.push_back("crossing probability not non-increasing: level " +
                             std::to_string(cfg.coupling_levels[i]) + " -> " +
                             std::to_string(cfg.coupling_levels[i + 1]) + " p " +
                             num12(p_cross[i]) + " -> " + num12(p_cross[i + 1]));
    if (!(tv_mean[i + 1] < tv_mean[i]))
      out.failures.push_back("tv budget not decreasing: level " +
                             std::to_string(cfg.coupling_levels[i]) + " -> " +
                             std::to_string(cfg.coupling_levels[i + 1]) + " mean " +
                             num12(tv_mean[i]) + " -> " + num12(tv_mean[i + 1]));
  }
  return out;
}

std::string render_summary(const ExperimentConfig& cfg, const std::vector<ResultRecord>& records) {
  std::string out = "experiment,statistic,params,value,stderr,n\n";
  for (const ResultRecord& r : records) {
    out += cfg.experiment;
    out += ',';
    out += r.statistic;
    out += ',';
    out += r.params;
    out += ',';
    out += num6(r.value);
    out += ',';
    out += num6(r.se);
    out += ',';
    out += std::to_string(r.n);
    out += '\n';
  }
  return out;
}

std::string render_manifest(const ExperimentConfig& cfg) {
  std::string out = "fingerprint = " + build_fingerprint() + "\n";
  for (const auto& [key, value] : cfg.resolved) {
    out += key;
    out += " = ";
    out += value;
    out += '\n';
  }
  return out;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
  out.close();
  if (!out) throw ConfigError("failed while writing " + path.string());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_outputs(const std::string& dir, const ExperimentConfig& cfg,
                   const std::vector<ResultRecord>& records, const std::string& results_text) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + dir + ": " + ec.message());
  write_file(fs::path(dir) / "results.txt", results_text);
  write_file(fs::path(dir) / "summary.csv", render_summary(cfg, records));
  write_file(fs::path(dir) / "manifest.txt", render_manifest(cfg));
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::string line;
  std::stringstream in(text);
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

}  // namespace

std::map<std::string, std::string> parse_key_values(const std::string& text) {
  std::map<std::string, std::string> out;
  long line_no = 0;
  std::string line;
  std::stringstream in(text);
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const std::size_t eq = body.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value', got '" +
                        body + "'");
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    if (key.empty())
      throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    if (!out.emplace(key, value).second)
      throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
  }
  return out;
}

ExperimentConfig resolve_config(const std::map<std::string, std::string>& raw,
                                bool apply_env_seed) {
  std::map<std::string, std::string> merged;
  for (const SchemaEntry& e : kSchema) merged[e.key] = e.fallback;
  for (const auto& [key, value] : raw) {
    if (merged.find(key) == merged.end()) throw ConfigError("unknown config key '" + key + "'");
    merged[key] = trim(value);
  }
  if (apply_env_seed) {
    if (const char* env = std::getenv("SPECWAVE_SEED")) merged["seed"] = trim(env);
  }

  ExperimentConfig cfg;
  cfg.experiment = merged["experiment"];
  if (cfg.experiment.empty()) throw ConfigError("config key 'experiment' is required");
  const auto names = experiment_names();
  if (std::find(names.begin(), names.end(), cfg.experiment) == names.end())
    throw ConfigError("unknown experiment '" + cfg.experiment + "'");

  cfg.seed = parse_seed("seed", merged["seed"]);
  cfg.workers = static_cast<int>(parse_long("workers", merged["workers"]));
  if (cfg.workers < 1 || cfg.workers > 512)
    throw ConfigError("workers must lie in [1, 512]");
  cfg.output = merged["output"];
  cfg.samples = parse_long("samples", merged["samples"]);
  if (cfg.samples < 1) throw ConfigError("samples must be positive");

  cfg.sim.n_modes = static_cast<int>(parse_long("sim.n_modes", merged["sim.n_modes"]));
  cfg.sim.grid_size = static_cast<int>(parse_long("sim.grid_size", merged["sim.grid_size"]));
  cfg.sim.dt = parse_double("sim.dt", merged["sim.dt"]);
  cfg.sim.horizon = parse_double("sim.horizon", merged["sim.horizon"]);
  cfg.sim.mu = parse_double("sim.mu", merged["sim.mu"]);
  cfg.sim.lambda = parse_double("sim.lambda", merged["sim.lambda"]);
  cfg.sim.zeta = static_cast<int>(parse_long("sim.zeta", merged["sim.zeta"]));
  cfg.sim.seed = cfg.seed;
  cfg.record_every = parse_long("sim.record_every", merged["sim.record_every"]);
  if (cfg.record_every < 0) throw ConfigError("sim.record_every must be nonnegative");

  const std::string family = merged["operator.family"];
  if (family == "dirichlet_laplacian") cfg.family = EigenFamily::dirichlet_laplacian;
  else if (family == "bilaplacian_1d") cfg.family = EigenFamily::bilaplacian_1d;
  else if (family == "power_law") cfg.family = EigenFamily::power_law;
  else throw ConfigError("config key 'operator.family': unknown family '" + family + "'");
  cfg.op_eta0 = parse_double("operator.eta0", merged["operator.eta0"]);
  cfg.op_scale = parse_double("operator.scale", merged["operator.scale"]);

  const std::string drift_form = merged["drift.form"];
  DriftForm dform;
  if (drift_form == "zero") dform = DriftForm::zero;
  else if (drift_form == "signed_power") dform = DriftForm::signed_power;
  else if (drift_form == "affine") dform = DriftForm::affine;
  else throw ConfigError("config key 'drift.form': unknown form '" + drift_form + "'");
  cfg.drift = make_drift(dform, parse_double("drift.alpha", merged["drift.alpha"]),
                         parse_double("drift.kappa", merged["drift.kappa"]),
                         parse_double("drift.offset", merged["drift.offset"]));

  const std::string mult_form = merged["multiplier.form"];
  if (mult_form == "none") {
    cfg.multiplier_on = false;
  } else {
    MultiplierForm mform;
    if (mult_form == "constant") mform = MultiplierForm::constant;
    else if (mult_form == "power") mform = MultiplierForm::power;
    else throw ConfigError("config key 'multiplier.form': unknown form '" + mult_form + "'");
    cfg.multiplier = make_multiplier(mform, parse_double("multiplier.beta", merged["multiplier.beta"]),
                                     parse_double("multiplier.floor", merged["multiplier.floor"]),
                                     parse_double("multiplier.scale", merged["multiplier.scale"]));
    cfg.multiplier_on = true;
  }

  cfg.mollify_level = static_cast<int>(parse_long("mollify.level", merged["mollify.level"]));
  if (cfg.mollify_level < 0) throw ConfigError("mollify.level must be nonnegative");

  cfg.initial_mode = static_cast<int>(parse_long("initial.mode", merged["initial.mode"]));
  if (cfg.initial_mode < 0 || cfg.initial_mode > cfg.sim.n_modes)
    throw ConfigError("initial.mode must lie in [0, sim.n_modes]");
  cfg.initial_amplitude = parse_double("initial.amplitude", merged["initial.amplitude"]);

  cfg.mu_grid = parse_double_list("mu_grid", merged["mu_grid"]);
  for (double m : cfg.mu_grid)
    if (!(m > 0)) throw ConfigError("mu_grid entries must be positive");
  cfg.lambda_grid = parse_double_list("lambda_grid", merged["lambda_grid"]);
  for (double l : cfg.lambda_grid)
    if (!(l >= 0)) throw ConfigError("lambda_grid entries must be nonnegative");

  cfg.p = parse_double("p", merged["p"]);
  if (!(cfg.p > 0)) throw ConfigError("p must be positive");
  cfg.gamma_c = parse_double("gamma_c", merged["gamma_c"]);
  if (!(cfg.gamma_c > 0 && cfg.gamma_c < 1)) throw ConfigError("gamma_c must lie in (0, 1)");
  cfg.threshold_factor = parse_double("threshold.factor", merged["threshold.factor"]);
  if (!(cfg.threshold_factor > 0)) throw ConfigError("threshold.factor must be positive");

  cfg.coupling_levels = parse_int_list("coupling.levels", merged["coupling.levels"]);
  std::sort(cfg.coupling_levels.begin(), cfg.coupling_levels.end());
  cfg.coupling_levels.erase(std::unique(cfg.coupling_levels.begin(), cfg.coupling_levels.end()),
                            cfg.coupling_levels.end());
  for (int l : cfg.coupling_levels)
    if (l < 1) throw ConfigError("coupling.levels entries must be positive");

  cfg.tail_levels = parse_double_list("tail.levels", merged["tail.levels"]);
  std::sort(cfg.tail_levels.begin(), cfg.tail_levels.end());
  for (double s : cfg.tail_levels)
    if (!(s > 0)) throw ConfigError("tail.levels entries must be positive");

  cfg.refine_levels = parse_int_list("refine.levels", merged["refine.levels"]);
  std::sort(cfg.refine_levels.begin(), cfg.refine_levels.end(), std::greater<int>());
  cfg.refine_levels.erase(std::unique(cfg.refine_levels.begin(), cfg.refine_levels.end()),
                          cfg.refine_levels.end());
  for (int r : cfg.refine_levels)
    if (r < 2) throw ConfigError("refine.levels entries must be at least 2");

  cfg.time_points = parse_long("time.points", merged["time.points"]);
  if (cfg.time_points < 2) throw ConfigError("time.points must be at least 2");
  cfg.time_max = parse_double("time.max", merged["time.max"]);
  if (!(cfg.time_max > 0)) throw ConfigError("time.max must be positive");

  cfg.assert_enabled = parse_bool("assert.enabled", merged["assert.enabled"]);
  cfg.assert_distance_max = parse_double("assert.distance_max", merged["assert.distance_max"]);
  cfg.assert_slope_max = parse_double("assert.slope_max", merged["assert.slope_max"]);
  cfg.assert_slope_min = parse_double("assert.slope_min", merged["assert.slope_min"]);

  // Experiment-specific semantic checks, before any computation.
  const bool verify =
      cfg.experiment == "verify-semigroup" || cfg.experiment == "verify-bounds";
  if (verify) {
    for (double m : cfg.mu_grid)
      if (m > 1.0)
        throw ConfigError("the decay and norm ceilings assume mu <= 1; trim mu_grid");
  }
  if (cfg.experiment == "sk-sweep" && cfg.sim.zeta != 1)
    throw ConfigError("sk-sweep needs sim.zeta = 1: the first-order limit belongs to the damped system");
  if (cfg.experiment == "convolution-scaling") {
    std::sort(cfg.lambda_grid.begin(), cfg.lambda_grid.end());
    for (double l : cfg.lambda_grid)
      if (!(l > 0)) throw ConfigError("convolution-scaling needs positive lambda_grid entries");
    if (std::adjacent_find(cfg.lambda_grid.begin(), cfg.lambda_grid.end()) !=
        cfg.lambda_grid.end())
      throw ConfigError("lambda_grid entries must be distinct");
    if (cfg.lambda_grid.size() < 2)
      throw ConfigError("convolution-scaling needs at least two shifts");
  }
  if (cfg.experiment == "coupling" &&
      (!cfg.multiplier_on || cfg.multiplier.form != MultiplierForm::power))
    throw ConfigError(
        "coupling needs multiplier.form = power: approximating a constant is exact and leaves "
        "nothing to couple");

  const bool uses_sim = cfg.experiment == "sk-sweep" || cfg.experiment == "coupling" ||
                        cfg.experiment == "convolution-scaling" ||
                        cfg.experiment == "self-convergence";
  if (uses_sim) {
    validate(cfg.sim);  // record grid still empty; checks the scalar fields
    if (std::lround(cfg.sim.horizon / cfg.sim.dt) > 20000000L)
      throw ConfigError("step count exceeds 2e7; raise sim.dt or lower sim.horizon");
    if (cfg.experiment == "sk-sweep" || cfg.experiment == "convolution-scaling") {
      const long steps = std::lround(cfg.sim.horizon / cfg.sim.dt);
      const long stride = cfg.record_every == 0 ? steps : cfg.record_every;
      if (steps % stride != 0)
        throw ConfigError("sim.record_every must divide the step count " + std::to_string(steps));
      for (long j = 0; j * stride <= steps; ++j)
        cfg.sim.record_times.push_back(j * stride == steps ? cfg.sim.horizon
                                                           : double(j * stride) * cfg.sim.dt);
      validate(cfg.sim);
    }
  } else {
    if (cfg.sim.n_modes < 1) throw ConfigError("sim.n_modes must be positive");
  }

  auto& res = cfg.resolved;
  res["experiment"] = cfg.experiment;
  res["seed"] = std::to_string(cfg.seed);
  res["workers"] = std::to_string(cfg.workers);
  res["output"] = cfg.output;
  res["samples"] = std::to_string(cfg.samples);
  res["sim.n_modes"] = std::to_string(cfg.sim.n_modes);
  res["sim.grid_size"] = std::to_string(cfg.sim.grid_size);
  res["sim.dt"] = num17(cfg.sim.dt);
  res["sim.horizon"] = num17(cfg.sim.horizon);
  res["sim.mu"] = num17(cfg.sim.mu);
  res["sim.lambda"] = num17(cfg.sim.lambda);
  res["sim.zeta"] = std::to_string(cfg.sim.zeta);
  res["sim.record_every"] = std::to_string(cfg.record_every);
  res["operator.family"] = family;
  res["operator.eta0"] = num17(cfg.op_eta0);
  res["operator.scale"] = num17(cfg.op_scale);
  res["drift.form"] = drift_form;
  res["drift.alpha"] = num17(cfg.drift.alpha);
  res["drift.kappa"] = num17(cfg.drift.kappa);
  res["drift.offset"] = num17(cfg.drift.offset);
  res["multiplier.form"] = mult_form;
  res["multiplier.beta"] = num17(cfg.multiplier.beta);
  res["multiplier.floor"] = num17(cfg.multiplier.floor);
  res["multiplier.scale"] = num17(cfg.multiplier.scale);
  res["mollify.level"] = std::to_string(cfg.mollify_level);
  res["initial.mode"] = std::to_string(cfg.initial_mode);
  res["initial.amplitude"] = num17(cfg.initial_amplitude);
  res["mu_grid"] = join_doubles(cfg.mu_grid);
  res["lambda_grid"] = join_doubles(cfg.lambda_grid);
  res["p"] = num17(cfg.p);
  res["gamma_c"] = num17(cfg.gamma_c);
  res["threshold.factor"] = num17(cfg.threshold_factor);
  res["coupling.levels"] = join_ints(cfg.coupling_levels);
  res["tail.levels"] = join_doubles(cfg.tail_levels);
  res["refine.levels"] = join_ints(cfg.refine_levels);
  res["time.points"] = std::to_string(cfg.time_points);
  res["time.max"] = num17(cfg.time_max);
  res["assert.enabled"] = cfg.assert_enabled ? "true" : "false";
  res["assert.distance_max"] = num17(cfg.assert_distance_max);
  res["assert.slope_max"] = num17(cfg.assert_slope_max);
  res["assert.slope_min"] = num17(cfg.assert_slope_min);
  return cfg;
}

ExperimentOutcome run_experiment(const ExperimentConfig& cfg) {
  if (cfg.experiment == "verify-semigroup") return run_verify_semigroup(cfg);
  if (cfg.experiment == "verify-bounds") return run_verify_bounds(cfg);
  if (cfg.experiment == "sk-sweep") return run_sk_sweep(cfg);
  if (cfg.experiment == "coupling") return run_coupling(cfg);
  if (cfg.experiment == "convolution-scaling") return run_convolution_scaling(cfg);
  if (cfg.experiment == "self-convergence") return run_self_convergence(cfg);
  throw ConfigError("unknown experiment '" + cfg.experiment + "'");
}

std::vector<std::string> experiment_names() {
  return {"verify-semigroup", "verify-bounds",       "sk-sweep",
          "coupling",         "convolution-scaling", "self-convergence"};
}

std::string schema_text() {
  std::string out =
      "Config keys (key = value per line, '#' comments, unknown keys rejected):\n\n";
  for (const SchemaEntry& e : kSchema) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "  %-20s %-7s default %-26s %s\n", e.key, e.type,
                  e.fallback[0] ? e.fallback : "(none)", e.doc);
    out += buf;
  }
  out +=
      "\nEnvironment: SPECWAVE_SEED overrides the seed key for 'run'; reruns always use the "
      "manifest seed.\n";
  return out;
}

std::string build_fingerprint() {
  return std::string("specwave ") + kVersion + " / " + __VERSION__;
}

std::string render_results(const ExperimentConfig& cfg,
                           const std::vector<ResultRecord>& records) {
  std::string out;
  out.reserve(records.size() * 96);
  const std::string seed = std::to_string(cfg.seed);
  for (const ResultRecord& r : records) {
    if (!std::isfinite(r.value) || !std::isfinite(r.se))
      throw SimulationError("non-finite statistic " + r.statistic + " (" + r.params + ")");
    out += cfg.experiment;
    out += ',';
    out += r.params;
    out += ',';
    out += r.statistic;
    out += ',';
    out += num17(r.value);
    out += ',';
    out += num17(r.se);
    out += ',';
    out += std::to_string(r.n);
    out += ',';
    out += seed;
    out += '\n';
  }
  return out;
}

bool compare_results(const std::string& expected, const std::string& actual, double tol,
                     std::string* detail) {
  const auto el = split_lines(expected);
  const auto al = split_lines(actual);
  if (el.size() != al.size()) {
    if (detail)
      *detail = "row count " + std::to_string(el.size()) + " vs " + std::to_string(al.size());
    return false;
  }
  for (std::size_t i = 0; i < el.size(); ++i) {
    const auto ef = split(el[i], ',');
    const auto af = split(al[i], ',');
    const std::string row = "row " + std::to_string(i + 1);
    if (ef.size() != 7 || af.size() != 7) {
      if (detail) *detail = row + ": malformed record";
      return false;
    }
    for (std::size_t f : {std::size_t(0), std::size_t(1), std::size_t(2), std::size_t(5),
                          std::size_t(6)}) {
      if (ef[f] != af[f]) {
        if (detail) *detail = row + ": field " + std::to_string(f) + " '" + ef[f] + "' vs '" +
                              af[f] + "'";
        return false;
      }
    }
    for (std::size_t f : {std::size_t(3), std::size_t(4)}) {
      const double a = std::strtod(ef[f].c_str(), nullptr);
      const double b = std::strtod(af[f].c_str(), nullptr);
      if (!(std::fabs(a - b) <= tol * std::max({1.0, std::fabs(a), std::fabs(b)}))) {
        if (detail)
          *detail = row + " (" + ef[1] + "/" + ef[2] + "): " + ef[f] + " vs " + af[f];
        return false;
      }
    }
  }
  return true;
}

int run_config_file(const std::string& config_path, const std::string& output_override,
                    int worker_override, std::ostream& log) {
  try {
    const auto raw = parse_key_values(read_file(config_path));
    ExperimentConfig cfg = resolve_config(raw, true);
    if (worker_override > 0) {
      cfg.workers = worker_override;
      cfg.resolved["workers"] = std::to_string(worker_override);
    }
    if (!output_override.empty()) {
      cfg.output = output_override;
      cfg.resolved["output"] = output_override;
    }
    if (cfg.output.empty())
      throw ConfigError("no output directory: set the output key or pass --output");

    const ExperimentOutcome out = run_experiment(cfg);
    const std::string results = render_results(cfg, out.records);
    write_outputs(cfg.output, cfg, out.records, results);

    for (const std::string& n : out.notices) log << "note: " << n << "\n";
    for (const std::string& f : out.failures) log << "assertion failed: " << f << "\n";
    log << cfg.experiment << ": " << out.records.size() << " records -> " << cfg.output << "\n";
    return out.failures.empty() ? 0 : 1;
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << "\n";
    return 2;
  } catch (const SimulationError& e) {
    log << "simulation error: " << e.what() << "\n";
    return 3;
  }
}

int rerun_manifest_file(const std::string& manifest_path, const std::string& output_override,
                        int worker_override, std::ostream& log) {
  try {
    auto raw = parse_key_values(read_file(manifest_path));
    const auto fp = raw.find("fingerprint");
    if (fp == raw.end())
      throw ConfigError("manifest has no fingerprint line: " + manifest_path);
    const std::string recorded = fp->second;
    raw.erase(fp);

    ExperimentConfig cfg = resolve_config(raw, false);
    if (worker_override > 0) {
      cfg.workers = worker_override;
      cfg.resolved["workers"] = std::to_string(worker_override);
    }
    const std::filesystem::path manifest_dir =
        std::filesystem::path(manifest_path).parent_path();
    const std::string out_dir =
        !output_override.empty() ? output_override : (manifest_dir / "rerun").string();
    cfg.output = out_dir;
    cfg.resolved["output"] = out_dir;

    const bool same_build = recorded == build_fingerprint();
    if (!same_build)
      log << "warning: build fingerprint changed, comparing with tolerance\n  recorded: "
          << recorded << "\n  current:  " << build_fingerprint() << "\n";

    const ExperimentOutcome out = run_experiment(cfg);
    const std::string results = render_results(cfg, out.records);
    write_outputs(out_dir, cfg, out.records, results);
    for (const std::string& n : out.notices) log << "note: " << n << "\n";
    for (const std::string& f : out.failures) log << "assertion failed: " << f << "\n";

    int code = out.failures.empty() ? 0 : 1;
    const std::filesystem::path prev = manifest_dir / "results.txt";
    if (std::filesystem::exists(prev)) {
      const std::string prior = read_file(prev);
      if (same_build) {
        if (prior == results) {
          log << "reproduced " << prev.string() << " byte for byte\n";
        } else {
          log << "reproduction mismatch: results differ from " << prev.string() << "\n";
          code = 1;
        }
      } else {
        std::string why;
        if (compare_results(prior, results, 1e-9, &why)) {
          log << "results match the previous run within tolerance 1e-09\n";
        } else {
          log << "reproduction mismatch: " << why << "\n";
          code = 1;
        }
      }
    } else {
      log << "note: no previous results file next to the manifest, nothing to compare\n";
    }
    log << cfg.experiment << ": " << out.records.size() << " records -> " << out_dir << "\n";
    return code;
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << "\n";
    return 2;
  } catch (const SimulationError& e) {
    log << "simulation error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace specwave
