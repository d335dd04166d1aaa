#include "specwave/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace specwave {

void MeanSE::add(double x) {
  ++n_;
  const double delta = x - mean_;
  mean_ += delta / double(n_);
  m2_ += delta * (x - mean_);
}

double MeanSE::variance() const { return n_ < 2 ? 0.0 : m2_ / double(n_ - 1); }

double MeanSE::se() const { return n_ < 2 ? 0.0 : std::sqrt(variance() / double(n_)); }

namespace {

bool same_grid(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return a.size() == b.size() && (a - b).cwiseAbs().maxCoeff() == 0.0;
}

double capped_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  double sup = 0.0;
  for (long r = 0; r < a.cols(); ++r) {
    sup = std::max(sup, (a.col(r) - b.col(r)).norm());
    if (sup >= 1.0) return 1.0;
  }
  return sup;
}

}  // namespace

double sup_path_distance(const FieldPath& a, const FieldPath& b) {
  if (!same_grid(a.times, b.times)) throw ConfigError("record grids differ");
  if (a.u.rows() != b.u.rows()) throw ConfigError("mode counts differ");
  if (a.times.size() == 0) return 0.0;
  return capped_distance(a.u, b.u);
}

FieldPath position_path(const WavePath& path) {
  FieldPath out;
  out.times = path.times;
  out.u = path.u;
  return out;
}

MeanSE wasserstein_upper_bound(const PathEnsemble& a, const PathEnsemble& b) {
  if (a.samples.size() != b.samples.size() || a.samples.empty())
    throw ConfigError("ensembles must pair sample for sample");
  if (a.stream_ids != b.stream_ids)
    throw ConfigError("ensembles are not coupled through shared streams");
  if (!same_grid(a.times, b.times)) throw ConfigError("record grids differ");
  MeanSE out;
  for (std::size_t i = 0; i < a.samples.size(); ++i)
    out.add(std::min(1.0, capped_distance(a.samples[i], b.samples[i])));
  return out;
}

void fit_log_log(const std::vector<double>& x, const std::vector<double>& y, double* slope,
                 double* intercept) {
  if (x.size() != y.size() || x.size() < 2)
    throw ConfigError("a slope fit needs at least two points");
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0))
      throw ConfigError("log-log fit needs positive samples");
    const double lx = std::log(x[i]);
    const double ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double n = double(x.size());
  const double denom = n * sxx - sx * sx;
  *slope = (n * sxy - sx * sy) / denom;
  *intercept = (sy - *slope * sx) / n;
}

ScalingFit convolution_scaling_study(const SpectralOperator& op, const SimConfig& cfg, double p,
                                     const std::vector<double>& lambda_grid, int m_samples,
                                     int workers) {
  if (lambda_grid.size() < 2) throw ConfigError("scaling study needs at least two shifts");
  if (m_samples < 2) throw ConfigError("scaling study needs at least two samples");
  if (!(p > 0.0)) throw ConfigError("moment order must be positive");

  ScalingFit fit;
  fit.p = p;
  for (const double lambda : lambda_grid) {
    SimConfig point_cfg = cfg;
    point_cfg.lambda = lambda;
    validate(point_cfg);
    // NaN marks a failed sample; the same streams repeat for every lambda.
    const auto values = collect_samples<double>(m_samples, workers, [&](long s) {
      try {
        const FieldPath path = stochastic_convolution(op, point_cfg, Eigen::VectorXd(),
                                                      NoiseStream(point_cfg.seed, s));
        double sup = 0.0;
        for (long r = 0; r < path.u.cols(); ++r) sup = std::max(sup, path.u.col(r).norm());
        return std::pow(sup, p);
      } catch (const SimulationError&) {
        return std::numeric_limits<double>::quiet_NaN();
      }
    });
    MeanSE acc;
    for (const double v : values)
      if (std::isfinite(v)) acc.add(v);
    if (acc.count() * 10 < long(m_samples) * 9)
      throw SimulationError("more than 10% of scaling samples failed");
    fit.points.push_back({lambda, acc.mean(), acc.se(), acc.count()});
  }

  std::vector<double> xs, ys;
  for (const auto& pt : fit.points) {
    xs.push_back(pt.lambda);
    ys.push_back(pt.estimate);
  }
  fit_log_log(xs, ys, &fit.slope, &fit.intercept);
  return fit;
}

namespace {

struct SkSample {
  std::vector<double> distance;  // per mu
  std::vector<double> wave_norm, wave_norm2, wave_mode1;
  double heat_norm = 0.0, heat_norm2 = 0.0, heat_mode1 = 0.0;
};

void end_state_functionals(const Eigen::VectorXd& u, double* norm, double* norm2,
                           double* mode1) {
  const double n = u.norm();
  *norm = n;
  *norm2 = n * n;
  *mode1 = u[0];
}

}  // namespace

SkTable sk_study(const SpectralOperator& op, const SimConfig& cfg, const FieldFn& drift,
                 const FieldFn& multiplier, const std::vector<double>& mu_grid,
                 const PhaseState& z0, int m_samples, int workers) {
  if (mu_grid.empty()) throw ConfigError("mass grid must not be empty");
  if (m_samples < 1) throw ConfigError("sample count must be at least 1");
  if (cfg.zeta != 1) throw ConfigError("the small-mass limit needs zeta = 1");
  const auto rec = record_steps(cfg);
  if (rec.empty() || rec.back() != std::lround(cfg.horizon / cfg.dt))
    throw ConfigError("record grid must include the horizon");

  const auto samples = collect_samples<SkSample>(m_samples, workers, [&](long s) {
    SkSample out;
    const NoiseStream stream(cfg.seed, s);
    const FieldPath heat = simulate_heat(op, cfg, drift, multiplier, z0.u, stream);
    const long last = heat.u.cols() - 1;
    end_state_functionals(heat.u.col(last), &out.heat_norm, &out.heat_norm2, &out.heat_mode1);
    for (const double mu : mu_grid) {
      SimConfig wave_cfg = cfg;
      wave_cfg.mu = mu;
      const WavePath wave = simulate_wave(op, wave_cfg, drift, multiplier, z0, stream);
      double sup = 0.0;
      for (long r = 0; r < wave.u.cols(); ++r)
        sup = std::max(sup, std::min(1.0, (wave.u.col(r) - heat.u.col(r)).norm()));
      out.distance.push_back(sup);
      double n1 = 0.0, n2 = 0.0, m1 = 0.0;
      end_state_functionals(wave.u.col(last), &n1, &n2, &m1);
      out.wave_norm.push_back(n1);
      out.wave_norm2.push_back(n2);
      out.wave_mode1.push_back(m1);
    }
    return out;
  });

  SkTable table;
  table.m_samples = m_samples;
  table.rows.resize(mu_grid.size());
  for (std::size_t i = 0; i < mu_grid.size(); ++i) table.rows[i].mu = mu_grid[i];
  for (const auto& s : samples) {
    table.heat.norm.add(s.heat_norm);
    table.heat.norm2.add(s.heat_norm2);
    table.heat.mode1.add(s.heat_mode1);
    for (std::size_t i = 0; i < mu_grid.size(); ++i) {
      table.rows[i].distance.add(s.distance[i]);
      table.rows[i].wave.norm.add(s.wave_norm[i]);
      table.rows[i].wave.norm2.add(s.wave_norm2[i]);
      table.rows[i].wave.mode1.add(s.wave_mode1[i]);
    }
  }
  return table;
}

CouplingReport coupling_report(const std::vector<CoupledRun>& runs, double threshold,
                               double gamma_c, double horizon, double floor,
                               const std::vector<double>& tail_levels) {
  if (runs.empty()) throw ConfigError("coupling report needs at least one run");
  if (!(threshold > 0.0) || !(floor > 0.0) || !(horizon > 0.0))
    throw ConfigError("threshold, floor, and horizon must be positive");

  CouplingReport rep;
  rep.runs = long(runs.size());
  const double lambda = std::pow(threshold, gamma_c - 1.0);
  rep.cost_ceiling = lambda * lambda * threshold * threshold * horizon / (floor * floor);
  rep.tail_levels = tail_levels;
  rep.tail_probs.assign(tail_levels.size(), 0.0);

  double cost_sum = 0.0;
  for (const auto& run : runs) {
    if (run.stopped) ++rep.crossings;
    if (run.girsanov_cost > rep.cost_ceiling)
      throw SimulationError("a run exceeded the deterministic cost ceiling");
    cost_sum += run.girsanov_cost;
    rep.max_cost = std::max(rep.max_cost, run.girsanov_cost);
    rep.tv_budget.add(std::sqrt(run.girsanov_cost / 2.0));
    for (std::size_t i = 0; i < tail_levels.size(); ++i)
      if (run.sup_deviation >= tail_levels[i]) rep.tail_probs[i] += 1.0;
  }
  rep.mean_cost = cost_sum / double(rep.runs);
  rep.p_cross = double(rep.crossings) / double(rep.runs);
  for (double& p : rep.tail_probs) p /= double(rep.runs);

  const double z = 1.96;
  const double n = double(rep.runs);
  const double centre = (rep.p_cross + z * z / (2.0 * n)) / (1.0 + z * z / n);
  const double half = z *
                      std::sqrt(rep.p_cross * (1.0 - rep.p_cross) / n +
                                z * z / (4.0 * n * n)) /
                      (1.0 + z * z / n);
  rep.wilson_low = std::max(0.0, centre - half);
  rep.wilson_high = std::min(1.0, centre + half);
  return rep;
}

}  // namespace specwave
