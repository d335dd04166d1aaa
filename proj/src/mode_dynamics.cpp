#include "specwave/mode_dynamics.hpp"

#include <cmath>
#include <stdexcept>

#include "specwave/errors.hpp"

namespace specwave {

double discriminant_tolerance(double mu, double gamma) {
  return 1e-10 * std::max(1.0, 4.0 * mu * gamma);
}

ModePropagator make_propagator(double mu, int zeta, double gamma) {
  if (!(mu > 0.0)) throw ConfigError("mass must be positive");
  if (!(gamma > 0.0)) throw ConfigError("stiffness must be positive");
  if (zeta != 0 && zeta != 1) throw ConfigError("damping flag must be 0 or 1");
  ModePropagator p;
  p.mu = mu;
  p.zeta = zeta;
  p.gamma = gamma;
  p.sigma = -zeta / (2.0 * mu);
  p.q = p.sigma * p.sigma - gamma / mu;
  p.discriminant = 1.0 - 4.0 * mu * gamma;
  if (zeta == 0) {
    p.regime = DampingRegime::undamped;
    const double w = std::sqrt(gamma / mu);
    p.root1_im = w;
    p.root2_im = -w;
    return p;
  }
  const double tol = discriminant_tolerance(mu, gamma);
  if (p.discriminant > tol) {
    p.regime = DampingRegime::overdamped;
    const double s0 = std::sqrt(p.discriminant) / (2.0 * mu);
    // The smaller-magnitude root would cancel as sigma + s0; recover it from
    // the root product gamma/mu instead.
    const double r2 = p.sigma - s0;
    p.root1_re = (gamma / mu) / r2;
    p.root2_re = r2;
  } else if (p.discriminant >= -tol) {
    p.regime = DampingRegime::critical;
    p.root1_re = p.root2_re = p.sigma;
  } else {
    p.regime = DampingRegime::underdamped;
    const double wd = std::sqrt(-p.discriminant) / (2.0 * mu);
    p.root1_re = p.root2_re = p.sigma;
    p.root1_im = wd;
    p.root2_im = -wd;
  }
  return p;
}

namespace {

// Six-term series for C and S in x = q t^2; accurate to ~1e-24 relative for
// |x| < 1e-4 and sign-agnostic, which carries the evaluation smoothly through
// q = 0.
inline void series_cs(double q, double t, double& C, double& S) {
  const double x = q * t * t;
  C = 1.0 + x / 2.0 * (1.0 + x / 12.0 * (1.0 + x / 30.0 * (1.0 + x / 56.0 * (1.0 + x / 90.0))));
  S = t * (1.0 + x / 6.0 * (1.0 + x / 20.0 * (1.0 + x / 42.0 * (1.0 + x / 72.0 * (1.0 + x / 110.0)))));
}

}  // namespace

ModeValue propagate(const ModePropagator& p, double u, double v, double t) {
  if (!(t >= 0.0)) throw ConfigError("propagation time must be nonnegative");
  if (t == 0.0) return ModeValue{u, v};
  ModeValue out;
  const double sigma = p.sigma;
  const double q = p.q;
  const double x = q * t * t;
  const double a = v - sigma * u;
  if (std::abs(x) < 1e-4) {
    double C, S;
    series_cs(q, t, C, S);
    const double env = std::exp(sigma * t);
    out.f = env * (u * C + a * S);
    out.fp = sigma * out.f + env * (u * q * S + a * C);
    return out;
  }
  if (q > 0.0) {
    const double s0 = std::sqrt(q);
    if (s0 * t < 30.0) {
      const double env = std::exp(sigma * t);
      const double C = std::cosh(s0 * t);
      const double S = std::sinh(s0 * t) / s0;
      out.f = env * (u * C + a * S);
      out.fp = sigma * out.f + env * (u * q * S + a * C);
    } else {
      // Deep overdamped: the slow root dominates and the exponentials are
      // evaluated separately to dodge cosh overflow.
      const double r1 = p.root1_re, r2 = p.root2_re;
      const double d = r1 - r2;
      const double a1 = (v - r2 * u) / d;
      const double a2 = (r1 * u - v) / d;
      const double e1 = std::exp(r1 * t);
      const double e2 = std::exp(r2 * t);
      out.f = a1 * e1 + a2 * e2;
      out.fp = a1 * r1 * e1 + a2 * r2 * e2;
    }
    return out;
  }
  const double w = std::sqrt(-q);
  const double env = sigma == 0.0 ? 1.0 : std::exp(sigma * t);
  const double C = std::cos(w * t);
  const double S = std::sin(w * t) / w;
  out.f = env * (u * C + a * S);
  out.fp = sigma * out.f + env * (u * q * S + a * C);
  return out;
}

namespace {

// int_0^dt e^{rate s} ds, exact for any rate of either sign.
inline double exp_integral(double rate, double dt) {
  if (rate == 0.0) return dt;
  return std::expm1(rate * dt) / rate;
}

// int_0^dt e^{a s} cos(b s) ds.
inline double exp_cos_integral(double a, double b, double dt) {
  const double den = a * a + b * b;
  return (std::exp(a * dt) * (a * std::cos(b * dt) + b * std::sin(b * dt)) - a) / den;
}

// int_0^dt s^k e^{beta s} ds for beta <= 0.  Two complementary exact forms:
// a positive-term confluent series for moderate |beta| dt, and the finite
// incomplete-gamma complement once e^{beta dt} is negligible against it.
// Neither branch subtracts nearly-equal quantities.
double power_exp_moment(int k, double beta, double dt) {
  const double y = -beta * dt;
  if (y <= 40.0) {
    double term = 1.0 / (k + 1.0);
    double sum = term;
    for (int j = 1; j < 400; ++j) {
      term *= y / (k + 1.0 + j);
      sum += term;
      if (term < sum * 1e-18) break;
    }
    return std::pow(dt, k + 1) * std::exp(beta * dt) * sum;
  }
  double partial = 1.0, term = 1.0;  // sum_{j<=k} y^j / j!
  for (int j = 1; j <= k; ++j) {
    term *= y / j;
    partial += term;
  }
  double k_factorial = 1.0;
  for (int j = 2; j <= k; ++j) k_factorial *= j;
  const double c = -beta;
  return k_factorial / std::pow(c, k + 1) * (1.0 - std::exp(-y) * partial);
}

// int_0^dt w(s)^2 ds for the unit velocity response w(s) = f(s, 0, 1/mu).
double squared_response_integral(const ModePropagator& p, double dt) {
  const double q = p.q;
  const double sigma = p.sigma;
  const double mu = p.mu;
  if (std::abs(q) * dt * dt < 0.04) {
    // S(s)^2 = s^2 sum_m c_m (q s^2)^m with c_m = sum_{i+j=m} 1/((2i+1)!(2j+1)!).
    static constexpr double odd_factorial[6] = {1.0, 6.0, 120.0, 5040.0, 362880.0, 39916800.0};
    double sum = 0.0;
    double q_pow = 1.0;
    for (int m = 0; m <= 5; ++m) {
      double cm = 0.0;
      for (int i = 0; i <= m; ++i) cm += 1.0 / (odd_factorial[i] * odd_factorial[m - i]);
      sum += cm * q_pow * power_exp_moment(2 * m + 2, 2.0 * sigma, dt);
      q_pow *= q;
    }
    return sum / (mu * mu);
  }
  if (q > 0.0) {
    const double r1 = p.root1_re, r2 = p.root2_re;
    const double d = mu * (r1 - r2);
    return (exp_integral(2.0 * r1, dt) - 2.0 * exp_integral(r1 + r2, dt) +
            exp_integral(2.0 * r2, dt)) /
           (d * d);
  }
  const double w = std::sqrt(-q);
  return (exp_integral(2.0 * sigma, dt) - exp_cos_integral(2.0 * sigma, 2.0 * w, dt)) /
         (2.0 * mu * mu * w * w);
}

}  // namespace

StepKernel step_kernel(const ModePropagator& p, double dt) {
  if (!(dt > 0.0)) throw ConfigError("step size must be positive");
  StepKernel k;
  k.dt = dt;
  const ModeValue c0 = propagate(p, 1.0, 0.0, dt);
  const ModeValue c1 = propagate(p, 0.0, 1.0, dt);
  k.phi << c0.f, c1.f, c0.fp, c1.fp;
  const ModeValue w = propagate(p, 0.0, 1.0 / p.mu, dt);
  // int_0^dt w equals (1 - mu w'(dt) - zeta w(dt)) / gamma by integrating the
  // mode equation once; int_0^dt w' telescopes to w(dt); int_0^dt w w' to
  // w(dt)^2/2; int_0^dt w'^2 follows from the same identities.
  k.forcing[0] = (1.0 - p.mu * w.fp - p.zeta * w.f) / p.gamma;
  k.forcing[1] = w.f;
  const double cov00 = squared_response_integral(p, dt);
  const double cov01 = 0.5 * w.f * w.f;
  const double cov11 = w.f * w.fp + p.zeta * cov01 / p.mu + (p.gamma / p.mu) * cov00;
  k.noise_cov << cov00, cov01, cov01, cov11;
  return k;
}

HeatStep heat_kernel(double gamma, double dt) {
  if (!(gamma > 0.0)) throw ConfigError("stiffness must be positive");
  if (!(dt > 0.0)) throw ConfigError("step size must be positive");
  HeatStep h;
  h.decay = std::exp(-gamma * dt);
  h.forcing = -std::expm1(-gamma * dt) / gamma;
  h.noise_var = -std::expm1(-2.0 * gamma * dt) / (2.0 * gamma);
  return h;
}

int low_mode_count(const SpectralOperator& op, double mu, double lambda) {
  if (!(mu > 0.0)) throw ConfigError("mass must be positive");
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be nonnegative");
  int count = 0;
  for (int k = 1; k <= op.modes(); ++k) {
    if (1.0 - 4.0 * mu * (op.eigenvalue(k) + lambda) >= 0.0)
      count = k;
    else
      break;
  }
  return count;
}

double bound_oracle(const ModePropagator& p, double t, BoundId which, double u, double v) {
  if (!(t >= 0.0)) throw std::invalid_argument("time must be nonnegative");
  const double mu = p.mu;
  const double g = p.gamma;
  const double tol = discriminant_tolerance(mu, g);
  const bool damped = p.zeta == 1;
  const bool non_oscillatory = damped && p.discriminant >= -tol;
  const bool oscillatory = damped && p.discriminant <= tol;
  switch (which) {
    case BoundId::displacement_low_modes:
      if (!non_oscillatory)
        throw std::invalid_argument("envelope needs zeta=1 with 1-4*mu*gamma >= 0");
      return 4.0 * mu * std::abs(v) * std::exp(-g * t);
    case BoundId::velocity_low_modes:
      if (!non_oscillatory)
        throw std::invalid_argument("envelope needs zeta=1 with 1-4*mu*gamma >= 0");
      return 2.0 * std::abs(v) * std::exp(-g * t);
    case BoundId::displacement_high_modes:
      if (!oscillatory)
        throw std::invalid_argument("envelope needs zeta=1 with 1-4*mu*gamma <= 0");
      return std::sqrt(4.0 * mu) * std::abs(v) / std::sqrt(g) * std::exp(-t / (4.0 * mu));
    case BoundId::velocity_high_modes:
      if (!oscillatory)
        throw std::invalid_argument("envelope needs zeta=1 with 1-4*mu*gamma <= 0");
      return 2.0 * std::abs(v) * std::exp(-t / (4.0 * mu));
    case BoundId::displacement_undamped:
      if (damped) throw std::invalid_argument("undamped envelope needs zeta=0");
      return std::sqrt(mu) * std::abs(v) / std::sqrt(g);
    case BoundId::velocity_undamped:
      if (damped) throw std::invalid_argument("undamped envelope needs zeta=0");
      return std::abs(v);
    case BoundId::energy:
      return mu * v * v + g * u * u;
  }
  throw std::invalid_argument("unknown bound id");
}

namespace {

// Largest singular value.  The closed radical form loses ~sqrt(ulp) when the
// two singular values coincide (pure rotations); the 2x2 Jacobi SVD does not.
double spectral_norm_2x2(double a, double b, double c, double d) {
  Eigen::Matrix2d m;
  m << a, b, c, d;
  return Eigen::JacobiSVD<Eigen::Matrix2d>(m).singularValues()(0);
}

}  // namespace

NormCheck operator_norm_check(const SpectralOperator& op, double mu, double lambda, int zeta,
                              double t, OperatorBound which) {
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be nonnegative");
  if (!(t >= 0.0)) throw ConfigError("time must be nonnegative");
  const int N = op.modes();
  NormCheck out;
  const int n_low = zeta == 1 ? low_mode_count(op, mu, lambda) : 0;
  switch (which) {
    case OperatorBound::response: {
      for (int k = 1; k <= N; ++k) {
        const auto p = make_propagator(mu, zeta, op.eigenvalue(k) + lambda);
        out.computed = std::max(out.computed, std::abs(propagate(p, 0.0, 1.0 / mu, t).f));
      }
      out.bound = zeta == 1 ? 4.0 : 1.0 / std::sqrt(op.eigenvalue(1) * mu);
      return out;
    }
    case OperatorBound::position: {
      for (int k = 1; k <= N; ++k) {
        const auto p = make_propagator(mu, zeta, op.eigenvalue(k) + lambda);
        out.computed = std::max(out.computed, std::abs(propagate(p, 1.0, 0.0, t).f));
      }
      out.bound = 1.0;
      return out;
    }
    case OperatorBound::velocity_low: {
      if (zeta != 1) throw ConfigError("low-mode velocity block is defined for zeta=1 only");
      for (int k = 1; k <= n_low; ++k) {
        const auto p = make_propagator(mu, zeta, op.eigenvalue(k) + lambda);
        out.computed = std::max(out.computed, std::abs(propagate(p, 0.0, 1.0, t).f));
      }
      out.bound = 4.0 * mu;
      return out;
    }
    case OperatorBound::velocity_high:
    case OperatorBound::velocity_high_shifted: {
      const bool shifted = which == OperatorBound::velocity_high_shifted;
      const int first = zeta == 1 ? n_low + 1 : 1;
      for (int k = first; k <= N; ++k) {
        const double alpha = op.eigenvalue(k);
        const auto p = make_propagator(mu, zeta, alpha + lambda);
        const double weight = std::sqrt(shifted ? alpha + lambda : alpha);
        out.computed =
            std::max(out.computed, weight * std::abs(propagate(p, 0.0, 1.0, t).f));
      }
      out.bound = zeta == 1 ? std::sqrt(4.0 * mu) : std::sqrt(mu);
      return out;
    }
    case OperatorBound::phase_space:
    case OperatorBound::phase_space_shifted: {
      if (!(mu <= 1.0)) throw ConfigError("phase-space ceiling holds for mu <= 1");
      const bool shifted = which == OperatorBound::phase_space_shifted;
      double ratio = 0.0;
      for (int k = 1; k <= N; ++k) {
        const double alpha = op.eigenvalue(k);
        const auto p = make_propagator(mu, zeta, alpha + lambda);
        const double weight = std::sqrt(shifted ? alpha + lambda : alpha);
        const ModeValue c0 = propagate(p, 1.0, 0.0, t);
        const ModeValue c1 = propagate(p, 0.0, 1.0, t);
        out.computed = std::max(
            out.computed, spectral_norm_2x2(c0.f, weight * c1.f, c0.fp / weight, c1.fp));
        ratio = std::max(ratio, std::sqrt((alpha + lambda) / alpha));
      }
      out.bound = shifted ? 1.0 / std::sqrt(mu) : ratio / std::sqrt(mu);
      return out;
    }
  }
  throw ConfigError("unknown operator bound id");
}

double mode_limit_gap(const ModePropagator& p, double u, double v, double t0, double T,
                      ModeLimitCase which, int grid_points) {
  if (p.zeta != 1) throw ConfigError("mass limit gap is defined for the damped flow");
  if (!(t0 >= 0.0) || !(T >= t0)) throw ConfigError("need 0 <= t0 <= T");
  if (which != ModeLimitCase::initial_position && !(t0 > 0.0))
    throw ConfigError("velocity limit cases need t0 > 0");
  if (grid_points < 2) throw ConfigError("time grid needs at least two points");
  double sup = 0.0;
  for (int i = 0; i < grid_points; ++i) {
    const double t = t0 + (T - t0) * i / (grid_points - 1.0);
    double gap = 0.0;
    switch (which) {
      case ModeLimitCase::initial_position:
        gap = std::abs(propagate(p, u, 0.0, t).f - u * std::exp(-p.gamma * t));
        break;
      case ModeLimitCase::initial_velocity:
        gap = std::abs(propagate(p, 0.0, v / p.mu, t).f - v * std::exp(-p.gamma * t));
        break;
      case ModeLimitCase::velocity_decay:
        gap = std::abs(propagate(p, 0.0, v, t).fp);
        break;
    }
    sup = std::max(sup, gap);
  }
  return sup;
}

}  // namespace specwave
