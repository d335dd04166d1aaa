#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "specwave/coefficients.hpp"
#include "specwave/mode_dynamics.hpp"
#include "specwave/noise.hpp"
#include "specwave/spectral.hpp"

namespace specwave {

/*
 * Exponential time stepping for the spectral systems.  Linear dynamics are
 * advanced by the exact per-mode kernels from mode_dynamics, coefficients are
 * frozen at the left endpoint of each step, and noise increments carry the
 * exact per-step covariance.  With zero coefficients the stepper therefore
 * commits no time-discretization error at all.
 */

struct SimConfig {
  int n_modes = 0;
  int grid_size = 0;
  double dt = 0.0;
  double horizon = 0.0;
  double mu = 1.0;
  double lambda = 0.0;  // spectral shift added to every eigenvalue
  int zeta = 1;
  std::uint64_t seed = 0;
  std::vector<double> record_times;  // strictly increasing multiples of dt in [0, horizon]
};

// Throws ConfigError unless every SimConfig invariant holds, including that
// horizon and each record time sit on the step grid.
void validate(const SimConfig& cfg);

// Step index of each record time (0 means the initial state).
std::vector<long> record_steps(const SimConfig& cfg);

struct PhaseState {
  Eigen::VectorXd u;
  Eigen::VectorXd v;
};

// Trajectory of one spectral field; column r holds the coefficients at
// times[r].
struct FieldPath {
  Eigen::VectorXd times;
  Eigen::MatrixXd u;
};

struct WavePath {
  Eigen::VectorXd times;
  Eigen::MatrixXd u;
  Eigen::MatrixXd v;
};

// Source of the integrated linear noise pair (int f dW, int f' dW) for every
// mode over one step, before any state-dependent amplitude is applied.
// Implementations must be deterministic functions of (seed, stream, step).
class WaveStepNoise {
 public:
  virtual ~WaveStepNoise() = default;
  virtual int modes() const = 0;
  // Fills column k with the increment pair for mode k+1 over the given step.
  virtual void increments(long step, Eigen::Ref<Eigen::Matrix2Xd> out) = 0;
};

// Draws the pair directly from the exact one-step covariance.
class ExactStepNoise final : public WaveStepNoise {
 public:
  ExactStepNoise(const SpectralOperator& op, const SimConfig& cfg, NoiseStream stream);

  int modes() const override { return static_cast<int>(chol_.cols()); }
  void increments(long step, Eigen::Ref<Eigen::Matrix2Xd> out) override;

 private:
  Eigen::Matrix3Xd chol_;  // packed lower factor per mode: (L00, L10, L11)
  NoiseStream stream_;
};

// Same Brownian path seen at a coarser resolution: each coarse increment is
// the sum of `refine` exact fine increments pushed through the remaining fine
// flows.  Solvers running at dt and dt/r on matching streams then share one
// noise realization, which is what a pathwise self-convergence study needs.
class RefinedStepNoise final : public WaveStepNoise {
 public:
  RefinedStepNoise(const SpectralOperator& op, const SimConfig& coarse_cfg, int refine,
                   NoiseStream stream);

  int modes() const override { return static_cast<int>(chol_fine_.cols()); }
  void increments(long step, Eigen::Ref<Eigen::Matrix2Xd> out) override;

 private:
  Eigen::Matrix3Xd chol_fine_;
  std::vector<Eigen::Matrix2d> flow_fine_;  // one-substep flow per mode
  int refine_;
  NoiseStream stream_;
};

// Second-order system, one mode per eigenvalue alpha_k + lambda:
//   mu u_k'' = -(alpha_k + lambda) u_k - zeta u_k' + <b(u), e_k> + <g(u) dW, e_k>.
// Empty drift or multiplier functions switch the corresponding term off
// entirely; a multiplier that is present is evaluated on the physical grid and
// applied to the noise pair by pointwise multiplication there.
WavePath simulate_wave(const SpectralOperator& op, const SimConfig& cfg, const FieldFn& drift,
                       const FieldFn& multiplier, const PhaseState& z0, WaveStepNoise& noise);

// Convenience overload wiring up ExactStepNoise from a stream.
WavePath simulate_wave(const SpectralOperator& op, const SimConfig& cfg, const FieldFn& drift,
                       const FieldFn& multiplier, const PhaseState& z0, NoiseStream stream);

// First-order limit system  u_k' = -(alpha_k + lambda) u_k + <b>_k + <g dW>_k.
// Shares the first component of each per-mode normal pair with the wave
// stepper on the same stream, so wave and heat runs see one Brownian path.
FieldPath simulate_heat(const SpectralOperator& op, const SimConfig& cfg, const FieldFn& drift,
                        const FieldFn& multiplier, const Eigen::VectorXd& u0,
                        NoiseStream stream);

// Position response of the linear system to constant diagonal noise weights:
// mode k accumulates weights[k] times the exact per-step noise pair, with no
// drift and no state feedback.  weights empty means the identity.
FieldPath stochastic_convolution(const SpectralOperator& op, const SimConfig& cfg,
                                 const Eigen::VectorXd& weights, NoiseStream stream);

struct CoupledRun {
  WavePath primary;
  WavePath controlled;
  double tau = 0.0;            // first grid time with |u - u~|_H >= threshold, else horizon
  bool stopped = false;        // whether that crossing happened before the horizon
  double girsanov_cost = 0.0;  // left-point quadrature of |lambda_c (u - u~) / g_n(u~)|_H^2
  double sup_deviation = 0.0;  // max of |u - u~|_H over grid times t <= tau
  Eigen::VectorXd deviation;   // |u - u~|_H at every record time
};

// Two wave solutions on one noise stream: the primary carries (drift, mult),
// the controlled copy carries (drift, mult_approx) plus the control forcing
// lambda_c (u - u~) until the deviation first reaches `threshold`.  Both run
// on kernels shifted by lambda_c, with the shift compensated through the
// forcing term, so switching the control off is exact.  The Girsanov cost
// stops accumulating at tau.
CoupledRun simulate_controlled_pair(const SpectralOperator& op, const SimConfig& cfg,
                                    const FieldFn& drift, const FieldFn& mult,
                                    const FieldFn& mult_approx, double threshold,
                                    double lambda_control, const PhaseState& z0,
                                    NoiseStream stream);

}  // namespace specwave
