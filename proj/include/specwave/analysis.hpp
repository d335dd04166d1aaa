#pragma once

#include <Eigen/Dense>
#include <atomic>
#include <cstdint>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

#include "specwave/errors.hpp"
#include "specwave/simulate.hpp"

namespace specwave {

/*
 * Ensemble statistics over simulated paths.  Every estimator reports a
 * standard error, comparisons across parameter grids reuse the same noise
 * streams, and reductions run in sample order so the reported numbers do not
 * depend on how many workers produced them.
 */

// Streaming mean, variance, and standard error of the mean.
class MeanSE {
 public:
  void add(double x);
  long count() const { return n_; }
  double mean() const { return mean_; }
  double variance() const;  // unbiased; zero below two samples
  double se() const;

 private:
  long n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

// Runs body(i) for i in [0, n) on `workers` threads and returns the results
// indexed by i.  Scheduling cannot reorder the output, so any later reduction
// is deterministic.  The first exception thrown by a body is rethrown.
template <typename T>
std::vector<T> collect_samples(long n, int workers, const std::function<T(long)>& body) {
  if (n < 0) throw ConfigError("sample count must be nonnegative");
  if (workers < 1) throw ConfigError("worker count must be at least 1");
  std::vector<T> out(static_cast<std::size_t>(n));
  if (n == 0) return out;
  if (workers == 1) {
    for (long i = 0; i < n; ++i) out[std::size_t(i)] = body(i);
    return out;
  }
  std::atomic<long> next{0};
  std::exception_ptr first_error;
  std::mutex error_lock;
  auto work = [&] {
    for (;;) {
      const long i = next.fetch_add(1);
      if (i >= n) return;
      try {
        out[std::size_t(i)] = body(i);
      } catch (...) {
        std::lock_guard<std::mutex> hold(error_lock);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  const int spawned = int(std::min<long>(workers, n));
  pool.reserve(std::size_t(spawned));
  for (int w = 0; w < spawned; ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
  return out;
}

// Largest pointwise path distance min(|a(t) - b(t)|_H, 1) over the shared
// record grid.  Throws ConfigError when the grids differ.
double sup_path_distance(const FieldPath& a, const FieldPath& b);

// Position component of a phase-space trajectory.
FieldPath position_path(const WavePath& path);

struct PathEnsemble {
  Eigen::VectorXd times;
  std::vector<Eigen::MatrixXd> samples;    // coefficients per record time
  std::vector<std::uint64_t> stream_ids;   // noise stream behind each sample
};

// Mean and standard error of the pairwise sup distance between ensembles
// whose samples share noise streams index by index.  Any shared-noise pairing
// is an admissible coupling, so the mean bounds the Wasserstein distance of
// the two path laws from above.
MeanSE wasserstein_upper_bound(const PathEnsemble& a, const PathEnsemble& b);

// Least-squares line through (log x, log y); needs at least two points and
// positive data.
void fit_log_log(const std::vector<double>& x, const std::vector<double>& y, double* slope,
                 double* intercept);

struct ScalingPoint {
  double lambda = 0.0;
  double estimate = 0.0;  // mean of sup_t |position|_H^p
  double se = 0.0;
  long survivors = 0;
};

struct ScalingFit {
  std::vector<ScalingPoint> points;
  double slope = 0.0;
  double intercept = 0.0;
  double p = 0.0;
};

// Estimates E sup_t |position of the stochastic convolution|_H^p on a shift
// grid with identical noise streams per sample, then fits the log-log slope.
// Samples whose simulation fails are dropped; fewer than 90% survivors abort
// the study.
ScalingFit convolution_scaling_study(const SpectralOperator& op, const SimConfig& cfg, double p,
                                     const std::vector<double>& lambda_grid, int m_samples,
                                     int workers);

struct SkFunctionals {
  MeanSE norm;   // |u(T)|_H
  MeanSE norm2;  // |u(T)|_H^2
  MeanSE mode1;  // first coefficient of u(T)
};

struct SkRow {
  double mu = 0.0;
  MeanSE distance;  // sup path distance to the paired heat run
  SkFunctionals wave;
};

struct SkTable {
  std::vector<SkRow> rows;
  SkFunctionals heat;
  long m_samples = 0;
};

// Mass sweep against the first-order limit: for each mu the damped wave
// system runs on the same noise stream and initial data as one shared heat
// ensemble, giving paired sup distances plus end-state functionals for
// law-level comparison.  Requires zeta = 1.
SkTable sk_study(const SpectralOperator& op, const SimConfig& cfg, const FieldFn& drift,
                 const FieldFn& multiplier, const std::vector<double>& mu_grid,
                 const PhaseState& z0, int m_samples, int workers);

struct CouplingReport {
  long runs = 0;
  long crossings = 0;
  double p_cross = 0.0;  // empirical P(tau < horizon)
  double wilson_low = 0.0;
  double wilson_high = 0.0;
  double mean_cost = 0.0;
  double max_cost = 0.0;
  double cost_ceiling = 0.0;  // lambda^2 threshold^2 horizon / floor^2
  MeanSE tv_budget;           // per-run sqrt(cost / 2)
  std::vector<double> tail_levels;
  std::vector<double> tail_probs;  // P(sup deviation >= level)
};

// Aggregates an ensemble of controlled runs produced with control rate
// lambda = threshold^{gamma_c - 1}.  Every run must respect the deterministic
// cost ceiling; a violation throws SimulationError since it can only come
// from a stepping bug.
CouplingReport coupling_report(const std::vector<CoupledRun>& runs, double threshold,
                               double gamma_c, double horizon, double floor,
                               const std::vector<double>& tail_levels);

}  // namespace specwave
