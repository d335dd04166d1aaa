#pragma once

#include <Eigen/Dense>

#include "specwave/spectral.hpp"

namespace specwave {

/*
 * Scalar dynamics of one spectral mode,
 *
 *     mu f'' + zeta f' + gamma f = 0,   f(0) = u,  f'(0) = v,
 *
 * with mass mu > 0, damping flag zeta in {0,1} and stiffness
 * gamma = alpha_k + lambda > 0.  Every solution is represented through
 *
 *     f(t) = e^{sigma t} [ u C(t) + (v - sigma u) S(t) ],
 *     sigma = -zeta/(2 mu),   q = sigma^2 - gamma/mu,
 *
 * where C'' = q C, S'' = q S with C(0)=S'(0)=1, C'(0)=S(0)=0.  The sign of q
 * separates hyperbolic (overdamped), polynomial (critical) and trigonometric
 * (underdamped / undamped) behaviour; the implementation switches between the
 * closed forms and a short power series in q t^2 so that values stay accurate
 * through the critical surface 1 - 4 mu gamma = 0.
 */

enum class DampingRegime { overdamped, critical, underdamped, undamped };

struct ModePropagator {
  double mu = 1.0;
  int zeta = 1;
  double gamma = 1.0;
  DampingRegime regime = DampingRegime::underdamped;
  double sigma = 0.0;         // exponential envelope rate, -zeta/(2 mu)
  double q = 0.0;             // squared root offset, sign encodes the regime
  double discriminant = 0.0;  // 1 - 4 mu gamma (meaningful for zeta = 1)
  // Characteristic roots; equal for the critical regime, imaginary part zero
  // for the real-root regimes.
  double root1_re = 0.0, root1_im = 0.0;
  double root2_re = 0.0, root2_im = 0.0;
};

// Regime threshold: |1 - 4 mu gamma| <= 1e-10 * max(1, 4 mu gamma) counts as
// critical; the exact-zero surface is not representable in floating point.
double discriminant_tolerance(double mu, double gamma);

ModePropagator make_propagator(double mu, int zeta, double gamma);

struct ModeValue {
  double f = 0.0;
  double fp = 0.0;
};

// Exact solution value and derivative at time t >= 0.
ModeValue propagate(const ModePropagator& p, double u, double v, double t);

// One exact integration step of length dt for the mode driven by frozen
// forcing b and unit white noise:
//   state <- phi * state + forcing * b + noise,  noise ~ N(0, noise_cov).
// forcing = int_0^dt (f, f')(s, 0, 1/mu) ds and noise_cov is the exact
// covariance of (int f dW, int f' dW) over the step.
struct StepKernel {
  double dt = 0.0;
  Eigen::Matrix2d phi = Eigen::Matrix2d::Identity();
  Eigen::Vector2d forcing = Eigen::Vector2d::Zero();
  Eigen::Matrix2d noise_cov = Eigen::Matrix2d::Zero();
};

StepKernel step_kernel(const ModePropagator& p, double dt);

// First-order mode kernel for the heat equation:
//   u <- decay * u + forcing * b + N(0, noise_var).
struct HeatStep {
  double decay = 0.0;
  double forcing = 0.0;
  double noise_var = 0.0;
};

HeatStep heat_kernel(double gamma, double dt);

// Number of modes whose damped dynamics is non-oscillatory:
// max{ k : 1 - 4 mu (alpha_k + lambda) >= 0 }, possibly zero.
int low_mode_count(const SpectralOperator& op, double mu, double lambda);

// Closed-form decay envelopes for |f|, |f'| and the mode energy, used by the
// property suite as the right-hand side of |quantity| <= envelope.  The
// low/high split follows the sign of 1 - 4 mu gamma; both apply on the
// critical surface, where they coincide.
enum class BoundId {
  displacement_low_modes,   // zeta=1, 1-4 mu gamma >= 0:  4 mu |v| e^{-gamma t}
  velocity_low_modes,       //   "            "         :  2 |v| e^{-gamma t}
  displacement_high_modes,  // zeta=1, 1-4 mu gamma <= 0:  sqrt(4 mu) |v| / sqrt(gamma) e^{-t/(4 mu)}
  velocity_high_modes,      //   "            "         :  2 |v| e^{-t/(4 mu)}
  displacement_undamped,    // zeta=0:  sqrt(mu) |v| / sqrt(gamma)
  velocity_undamped,        // zeta=0:  |v|
  energy,                   // mu f'^2 + gamma f^2 <= mu v^2 + gamma u^2
};

double bound_oracle(const ModePropagator& p, double t, BoundId which, double u = 0.0,
                    double v = 1.0);

// Diagonal operator-norm checks for the phase-space semigroup of the truncated
// system.  Each check returns the supremum over stored modes of the relevant
// scalar quantity together with its closed-form ceiling; the supremum realizes
// the operator norm exactly because the semigroup is diagonal.
enum class OperatorBound {
  response,               // velocity-to-position block scaled by 1/mu; ceiling 4 (zeta=1) or 1/sqrt(alpha_1 mu) (zeta=0)
  position,               // position-to-position block; ceiling 1
  velocity_low,           // velocity block on non-oscillatory modes; ceiling 4 mu (zeta=1 only)
  velocity_high,          // velocity block H^{-1} -> H on the remaining modes; ceiling sqrt(4 mu), or sqrt(mu) over all modes for zeta=0
  velocity_high_shifted,  // same with the lambda-shifted H^{-1}(lambda) weight
  phase_space,            // full semigroup on H x H^{-1}; ceiling mu^{-1/2} sup_k sqrt((alpha_k+lambda)/alpha_k), mu <= 1
  phase_space_shifted,    // full semigroup on the lambda-shifted phase space; ceiling mu^{-1/2}, mu <= 1
};

struct NormCheck {
  double computed = 0.0;
  double bound = 0.0;
};

NormCheck operator_norm_check(const SpectralOperator& op, double mu, double lambda, int zeta,
                              double t, OperatorBound which);

// Distance of the damped mode flow from its vanishing-mass limit on a uniform
// time grid over [t0, T]:
//   initial_position:  sup |f(t, u, 0)     - u e^{-gamma t}|          (t0 = 0 allowed)
//   initial_velocity:  sup |f(t, 0, v/mu)  - v e^{-gamma t}|          (t0 > 0)
//   velocity_decay:    sup |f'(t, 0, v)|                              (t0 > 0)
enum class ModeLimitCase { initial_position, initial_velocity, velocity_decay };

double mode_limit_gap(const ModePropagator& p, double u, double v, double t0, double T,
                      ModeLimitCase which, int grid_points = 1000);

}  // namespace specwave
