#include "specwave/mode_dynamics.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "specwave/errors.hpp"

using namespace specwave;

namespace {

constexpr double kPi = std::numbers::pi;

// Inequality slack normalized by the ceiling scale, so huge-stiffness cases
// are not failed by representation noise in the ceiling itself.
double slack(double quantity, double ceiling) {
  return (ceiling - quantity) / std::max(1.0, ceiling);
}

std::vector<ModePropagator> regime_draws(int per_regime, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<ModePropagator> out;
  for (int i = 0; i < per_regime; ++i) {
    const double mu = 0.05 * std::pow(20.0, unit(rng));
    const double critical_gamma = 1.0 / (4.0 * mu);
    out.push_back(make_propagator(mu, 1, critical_gamma * (0.05 + 0.8 * unit(rng))));
    out.push_back(make_propagator(mu, 1, critical_gamma));
    out.push_back(make_propagator(mu, 1, critical_gamma * (1.3 + 6.7 * unit(rng))));
    out.push_back(make_propagator(mu, 0, 0.3 + 29.7 * unit(rng)));
  }
  return out;
}

}  // namespace

TEST_CASE("regimes follow the sign of the discriminant") {
  CHECK(make_propagator(0.1, 1, 1.0).regime == DampingRegime::overdamped);
  CHECK(make_propagator(0.5, 1, 0.5).regime == DampingRegime::critical);
  CHECK(make_propagator(1.0, 1, 1.0).regime == DampingRegime::underdamped);
  CHECK(make_propagator(1.0, 0, 1.0).regime == DampingRegime::undamped);
  // inside the tolerance band the repeated-root branch wins
  const double gamma = 0.5 * (1.0 + 1e-12);
  CHECK(make_propagator(0.5, 1, gamma).regime == DampingRegime::critical);
  CHECK(make_propagator(0.5, 1, 0.5 * (1.0 + 1e-8)).regime == DampingRegime::underdamped);
  CHECK(make_propagator(0.5, 1, 0.5 * (1.0 - 1e-8)).regime == DampingRegime::overdamped);
  CHECK_THROWS_AS(make_propagator(0.0, 1, 1.0), ConfigError);
  CHECK_THROWS_AS(make_propagator(1.0, 2, 1.0), ConfigError);
  CHECK_THROWS_AS(make_propagator(1.0, 1, 0.0), ConfigError);
}

TEST_CASE("characteristic roots satisfy their quadratic") {
  for (const auto& p : regime_draws(25, 11)) {
    if (p.regime == DampingRegime::critical) continue;
    for (const auto r : {std::complex<double>(p.root1_re, p.root1_im),
                         std::complex<double>(p.root2_re, p.root2_im)}) {
      const std::complex<double> residual = p.mu * r * r + double(p.zeta) * r + p.gamma;
      const double scale = std::max({p.mu * std::norm(r), std::abs(r), p.gamma});
      CHECK(std::abs(residual) <= 1e-12 * scale);
    }
  }
  // repeated root sits at -1/(2 mu)
  const auto c = make_propagator(0.5, 1, 0.5);
  CHECK(c.root1_re == doctest::Approx(-1.0).epsilon(1e-14));
  CHECK(c.root2_re == c.root1_re);
}

TEST_CASE("undamped mode traverses half a period of the first frequency") {
  const auto p = make_propagator(1.0, 0, kPi * kPi);
  const auto m = propagate(p, 1.0, 0.0, 1.0);
  CHECK(m.f == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(std::abs(m.fp) < 1e-9);
}

TEST_CASE("critically damped unit kick is t times the envelope") {
  const auto p = make_propagator(0.5, 1, 0.5);
  for (const double t : {0.0, 0.05, 0.3, 1.0, 4.0, 20.0}) {
    const auto m = propagate(p, 0.0, 1.0, t);
    CHECK(m.f == doctest::Approx(t * std::exp(-t)).epsilon(1e-13));
    CHECK(m.fp == doctest::Approx((1.0 - t) * std::exp(-t)).epsilon(1e-13));
  }
}

TEST_CASE("zero time returns the initial pair bit for bit") {
  for (const auto& p : regime_draws(8, 3)) {
    const auto m = propagate(p, 0.8125, -2.375, 0.0);
    CHECK(m.f == 0.8125);
    CHECK(m.fp == -2.375);
  }
  CHECK_THROWS_AS(propagate(make_propagator(1, 1, 1), 0, 1, -0.1), ConfigError);
}

TEST_CASE("closed forms track a fourth order reference integrator") {
  std::mt19937 rng(17);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (const auto& p : regime_draws(50, 29)) {
    const double u = unit(rng);
    const double v = unit(rng);
    for (const double t : {0.013, 0.19, 0.52, 1.0}) {
      const auto exact = propagate(p, u, v, t);
      const auto ref = oracle::rk4_mode(p.mu, p.zeta, p.gamma, u, v, t, 40000);
      CHECK(std::abs(exact.f - ref.f) < 1e-8);
      CHECK(std::abs(exact.fp - ref.fp) < 1e-8);
    }
  }
}

TEST_CASE("trajectories satisfy the mode equation under finite differences") {
  const double h = 5e-3;
  for (const auto& p : {make_propagator(0.8, 1, 0.25), make_propagator(0.5, 1, 0.5),
                        make_propagator(0.7, 1, 1.1), make_propagator(1.0, 0, 1.3)}) {
    for (const double t : {0.3, 0.9, 1.7}) {
      const auto at = [&](double s) { return propagate(p, 0.6, -0.4, s).f; };
      const double fm2 = at(t - 2 * h), fm1 = at(t - h), f0 = at(t);
      const double fp1 = at(t + h), fp2 = at(t + 2 * h);
      const double d2 = (-fp2 + 16 * fp1 - 30 * f0 + 16 * fm1 - fm2) / (12 * h * h);
      const double d1 = (-fp2 + 8 * fp1 - 8 * fm1 + fm2) / (12 * h);
      CHECK(std::abs(p.mu * d2 + p.zeta * d1 + p.gamma * f0) < 1e-9);
    }
  }
}

TEST_CASE("undamped trajectories conserve energy") {
  std::mt19937 rng(41);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < 40; ++i) {
    const double mu = 0.05 * std::pow(20.0, unit(rng));
    const double gamma = 0.5 * std::pow(200.0, unit(rng));
    const double u = 2.0 * unit(rng) - 1.0;
    const double v = 2.0 * unit(rng) - 1.0;
    const auto p = make_propagator(mu, 0, gamma);
    const double e0 = mu * v * v + gamma * u * u;
    for (int j = 1; j <= 64; ++j) {
      const auto m = propagate(p, u, v, 10.0 * j / 64.0);
      const double e = mu * m.fp * m.fp + gamma * m.f * m.f;
      CHECK(std::abs(e - e0) <= 1e-11 * e0);
    }
  }
}

TEST_CASE("values are continuous across the critical surface") {
  for (const double mu : {0.05, 0.4, 1.0}) {
    const double gc = 1.0 / (4.0 * mu);
    const auto lo = make_propagator(mu, 1, gc * (1.0 - 1e-9));
    const auto hi = make_propagator(mu, 1, gc * (1.0 + 1e-9));
    REQUIRE(lo.regime == DampingRegime::overdamped);
    REQUIRE(hi.regime == DampingRegime::underdamped);
    for (int i = 0; i <= 100; ++i) {
      const double t = 4.0 * i / 100.0;
      const auto a = propagate(lo, 1.0, -0.7, t);
      const auto b = propagate(hi, 1.0, -0.7, t);
      CHECK(std::abs(a.f - b.f) < 1e-8);
      CHECK(std::abs(a.fp - b.fp) < 1e-8);
    }
  }
}

TEST_CASE("no seam where the series hands over to the closed forms") {
  // q t^2 crosses the series threshold inside the scanned window
  for (const double q_sign : {1.0, -1.0}) {
    const double mu = 0.5;
    const double gamma = mu * (1.0 - q_sign * 1e-4);
    const auto p = make_propagator(mu, 1, gamma);
    double prev = propagate(p, 0.3, 1.0, 0.9).f;
    for (int i = 1; i <= 800; ++i) {
      const double t = 0.9 + 0.25e-3 * i;
      const auto m = propagate(p, 0.3, 1.0, t);
      const auto mid = propagate(p, 0.3, 1.0, t - 0.125e-3);
      CHECK(std::abs(m.f - prev - 0.25e-3 * mid.fp) < 1e-9);
      prev = m.f;
    }
  }
}

TEST_CASE("decay envelopes dominate the damped and undamped sweeps") {
  const auto op = make_operator(EigenFamily::dirichlet_laplacian, 512);
  double worst[7];
  for (double& w : worst) w = 1e300;
  const auto note = [&](BoundId id, double quantity, double ceiling) {
    double& w = worst[static_cast<int>(id)];
    w = std::min(w, slack(std::abs(quantity), ceiling));
  };
  for (const double mu : {1e-4, 1e-3, 1e-2, 1e-1, 1.0}) {
    for (const double lambda : {0.0, 1.0, 10.0, 100.0}) {
      for (int k = 1; k <= 512; ++k) {
        const double gamma = op.eigenvalue(k) + lambda;
        const auto damped = make_propagator(mu, 1, gamma);
        const auto wave = make_propagator(mu, 0, gamma);
        const double tol = discriminant_tolerance(mu, gamma);
        const bool low = damped.discriminant >= -tol;
        const bool high = damped.discriminant <= tol;
        for (int i = 0; i < 200; ++i) {
          const double t = 5.0 * i / 199.0;
          const auto kick = propagate(damped, 0.0, 1.0, t);
          if (low) {
            note(BoundId::displacement_low_modes, kick.f,
                 bound_oracle(damped, t, BoundId::displacement_low_modes));
            note(BoundId::velocity_low_modes, kick.fp,
                 bound_oracle(damped, t, BoundId::velocity_low_modes));
          }
          if (high) {
            note(BoundId::displacement_high_modes, kick.f,
                 bound_oracle(damped, t, BoundId::displacement_high_modes));
            note(BoundId::velocity_high_modes, kick.fp,
                 bound_oracle(damped, t, BoundId::velocity_high_modes));
          }
          const auto swing = propagate(wave, 0.0, 1.0, t);
          note(BoundId::displacement_undamped, swing.f,
               bound_oracle(wave, t, BoundId::displacement_undamped));
          note(BoundId::velocity_undamped, swing.fp,
               bound_oracle(wave, t, BoundId::velocity_undamped));
          const auto de = propagate(damped, 1.0, 1.0, t);
          const auto ue = propagate(wave, 1.0, 1.0, t);
          const double ceiling = bound_oracle(damped, t, BoundId::energy, 1.0, 1.0);
          note(BoundId::energy, mu * de.fp * de.fp + gamma * de.f * de.f, ceiling);
          note(BoundId::energy, mu * ue.fp * ue.fp + gamma * ue.f * ue.f, ceiling);
        }
      }
    }
  }
  for (int id = 0; id < 7; ++id) {
    CAPTURE(id);
    CHECK(worst[id] >= -1e-12);
    CHECK(worst[id] < 1e300);
  }
}

TEST_CASE("envelope requests reject the wrong regime") {
  const auto over = make_propagator(0.1, 1, 1.0);
  const auto under = make_propagator(1.0, 1, 1.0);
  const auto wave = make_propagator(1.0, 0, 1.0);
  CHECK(bound_oracle(over, 1.0, BoundId::displacement_low_modes) ==
        doctest::Approx(0.4 * std::exp(-1.0)).epsilon(1e-14));
  CHECK(bound_oracle(wave, 0.3, BoundId::displacement_undamped) ==
        doctest::Approx(1.0).epsilon(1e-14));
  CHECK(bound_oracle(wave, 7.9, BoundId::displacement_undamped) ==
        bound_oracle(wave, 0.0, BoundId::displacement_undamped));
  CHECK(bound_oracle(under, 0.5, BoundId::energy, 1.0, 1.0) ==
        doctest::Approx(2.0).epsilon(1e-14));
  CHECK_THROWS_AS(bound_oracle(under, 1.0, BoundId::displacement_low_modes),
                  std::invalid_argument);
  CHECK_THROWS_AS(bound_oracle(over, 1.0, BoundId::velocity_high_modes),
                  std::invalid_argument);
  CHECK_THROWS_AS(bound_oracle(over, 1.0, BoundId::displacement_undamped),
                  std::invalid_argument);
  CHECK_THROWS_AS(bound_oracle(wave, 1.0, BoundId::velocity_low_modes),
                  std::invalid_argument);
}

TEST_CASE("critical envelopes agree from both sides") {
  const auto p = make_propagator(0.5, 1, 0.5);
  CHECK(bound_oracle(p, 1.3, BoundId::displacement_low_modes) ==
        doctest::Approx(bound_oracle(p, 1.3, BoundId::displacement_high_modes)).epsilon(1e-13));
  CHECK(bound_oracle(p, 1.3, BoundId::velocity_low_modes) ==
        doctest::Approx(bound_oracle(p, 1.3, BoundId::velocity_high_modes)).epsilon(1e-13));
}

TEST_CASE("step kernel columns are the unit solutions") {
  for (const auto& p : regime_draws(6, 53)) {
    const auto k = step_kernel(p, 0.37);
    const auto c0 = propagate(p, 1.0, 0.0, 0.37);
    const auto c1 = propagate(p, 0.0, 1.0, 0.37);
    CHECK(k.phi(0, 0) == c0.f);
    CHECK(k.phi(1, 0) == c0.fp);
    CHECK(k.phi(0, 1) == c1.f);
    CHECK(k.phi(1, 1) == c1.fp);
    CHECK(k.dt == 0.37);
  }
  CHECK_THROWS_AS(step_kernel(make_propagator(1, 1, 1), 0.0), ConfigError);
}

TEST_CASE("step kernel integrals agree with adaptive quadrature") {
  std::vector<ModePropagator> draws = regime_draws(4, 71);
  // straddle the critical surface closely enough to force the series branch
  for (const double offset : {1e-3, 1e-7, -1e-7, -1e-3})
    draws.push_back(make_propagator(0.5, 1, 0.5 * (1.0 + offset)));
  for (const auto& p : draws) {
    for (const double dt : {0.05, 0.4, 2.0}) {
      const auto k = step_kernel(p, dt);
      const auto w = [&](double s) { return propagate(p, 0.0, 1.0 / p.mu, s); };
      const double q_f = oracle::integrate([&](double s) { return w(s).f; }, 0.0, dt);
      const double q_fp = oracle::integrate([&](double s) { return w(s).fp; }, 0.0, dt);
      const double q_00 = oracle::integrate([&](double s) { return w(s).f * w(s).f; }, 0.0, dt);
      const double q_01 = oracle::integrate([&](double s) { return w(s).f * w(s).fp; }, 0.0, dt);
      const double q_11 = oracle::integrate([&](double s) { return w(s).fp * w(s).fp; }, 0.0, dt);
      const auto close = [](double got, double want) {
        return std::abs(got - want) <= 1e-9 * std::max(1.0, std::abs(want));
      };
      CHECK(close(k.forcing[0], q_f));
      CHECK(close(k.forcing[1], q_fp));
      CHECK(close(k.noise_cov(0, 0), q_00));
      CHECK(close(k.noise_cov(0, 1), q_01));
      CHECK(close(k.noise_cov(1, 0), q_01));
      CHECK(close(k.noise_cov(1, 1), q_11));
    }
  }
}

TEST_CASE("undamped noise variance has the textbook sine integral") {
  const double gamma = kPi * kPi;
  const auto p = make_propagator(1.0, 0, gamma);
  const double dt = 0.7;
  const auto k = step_kernel(p, dt);
  const double expected =
      dt / (2.0 * gamma) - std::sin(2.0 * std::sqrt(gamma) * dt) / (4.0 * std::pow(gamma, 1.5));
  CHECK(k.noise_cov(0, 0) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("noise covariance stays positive semidefinite") {
  for (const auto& p : regime_draws(20, 83)) {
    for (const double dt : {1e-3, 0.2, 1.5, 8.0}) {
      const auto k = step_kernel(p, dt);
      CHECK(k.noise_cov(0, 0) >= 0.0);
      CHECK(k.noise_cov(1, 1) >= 0.0);
      const double det = k.noise_cov(0, 0) * k.noise_cov(1, 1) - std::pow(k.noise_cov(0, 1), 2);
      CHECK(det >= -1e-13 * k.noise_cov(0, 0) * k.noise_cov(1, 1));
    }
  }
}

TEST_CASE("vanishing step leaves the state untouched") {
  const auto p = make_propagator(0.2, 1, 3.0);
  const auto k = step_kernel(p, 1e-8);
  CHECK((k.phi - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(k.noise_cov.cwiseAbs().maxCoeff() < 1e-6);
  CHECK(k.forcing.cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("soft stiffness forcing approaches the inertial ramp") {
  for (const int zeta : {0, 1}) {
    const auto p = make_propagator(0.3, zeta, 1e-6);
    const auto k = step_kernel(p, 1e-3);
    CHECK(k.forcing[0] == doctest::Approx(1e-6 / (2.0 * 0.3)).epsilon(0.01));
  }
}

TEST_CASE("tiny mass step kernel collapses to the heat kernel") {
  const double gamma = 4.0;
  const double dt = 0.3;
  const auto heat = heat_kernel(gamma, dt);
  double previous = 1e300;
  for (const double mu : {1e-4, 1e-6, 1e-8}) {
    const auto k = step_kernel(make_propagator(mu, 1, gamma), dt);
    const double gap = std::abs(k.forcing[0] - heat.forcing) +
                       std::abs(k.phi(0, 0) - heat.decay) +
                       std::abs(k.noise_cov(0, 0) - heat.noise_var);
    CHECK(gap < 100.0 * mu + 1e-12);
    CHECK(gap < previous + 1e-15);
    previous = gap;
  }
}

TEST_CASE("heat kernel closed forms") {
  const auto h = heat_kernel(1.0, std::log(2.0));
  CHECK(h.decay == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(h.forcing == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(h.noise_var == doctest::Approx(0.375).epsilon(1e-15));

  const auto longrun = heat_kernel(2.5, 1e3);
  CHECK(longrun.forcing == doctest::Approx(1.0 / 2.5).epsilon(1e-15));
  CHECK(longrun.noise_var == doctest::Approx(1.0 / 5.0).epsilon(1e-15));

  const auto quick = heat_kernel(kPi * kPi, 1e-4);
  CHECK(quick.forcing == doctest::Approx(1e-4).epsilon(0.01));

  CHECK_THROWS_AS(heat_kernel(0.0, 0.1), ConfigError);
  CHECK_THROWS_AS(heat_kernel(1.0, 0.0), ConfigError);
}

TEST_CASE("non oscillatory mode count tracks the spectrum") {
  const auto op = make_operator(EigenFamily::dirichlet_laplacian, 32);
  CHECK(low_mode_count(op, 1.0, 0.0) == 0);
  // boundary eigenvalue counts as non oscillatory
  CHECK(low_mode_count(op, 1.0 / (4.0 * op.eigenvalue(3)), 0.0) == 3);
  CHECK(low_mode_count(op, 1.0 / (4.0 * (op.eigenvalue(2) + 7.0)), 7.0) == 2);
  CHECK(low_mode_count(op, 1e-9, 0.0) == 32);
  CHECK_THROWS_AS(low_mode_count(op, 0.0, 0.0), ConfigError);
  CHECK_THROWS_AS(low_mode_count(op, 0.1, -1.0), ConfigError);
}

TEST_CASE("operator ceilings quote the advertised constants") {
  const auto op = make_operator(EigenFamily::dirichlet_laplacian, 16);
  CHECK(operator_norm_check(op, 0.3, 0.0, 1, 0.8, OperatorBound::response).bound == 4.0);
  CHECK(operator_norm_check(op, 0.25, 0.0, 0, 0.8, OperatorBound::response).bound ==
        doctest::Approx(1.0 / std::sqrt(op.eigenvalue(1) * 0.25)).epsilon(1e-14));
  CHECK(operator_norm_check(op, 0.01, 3.0, 1, 0.8, OperatorBound::phase_space_shifted).bound ==
        doctest::Approx(10.0).epsilon(1e-14));
  CHECK(operator_norm_check(op, 0.5, 0.0, 1, 1.0, OperatorBound::position).bound == 1.0);
  CHECK(operator_norm_check(op, 0.5, 2.0, 1, 1.0, OperatorBound::velocity_low).bound == 2.0);
  CHECK(operator_norm_check(op, 0.09, 2.0, 0, 1.0, OperatorBound::velocity_high).bound ==
        doctest::Approx(0.3).epsilon(1e-14));
  CHECK_THROWS_AS(operator_norm_check(op, 0.5, 2.0, 0, 1.0, OperatorBound::velocity_low),
                  ConfigError);
  CHECK_THROWS_AS(operator_norm_check(op, 1.5, 0.0, 1, 1.0, OperatorBound::phase_space),
                  ConfigError);
}

TEST_CASE("computed operator norms stay below their ceilings") {
  const auto op = make_operator(EigenFamily::dirichlet_laplacian, 48);
  for (const double mu : {0.004, 0.1, 1.0}) {
    for (const double lambda : {0.0, 10.0}) {
      for (const int zeta : {0, 1}) {
        for (const double t : {0.0, 0.05, 0.7, 3.0}) {
          for (const auto which :
               {OperatorBound::response, OperatorBound::position, OperatorBound::velocity_low,
                OperatorBound::velocity_high, OperatorBound::velocity_high_shifted,
                OperatorBound::phase_space, OperatorBound::phase_space_shifted}) {
            if (which == OperatorBound::velocity_low && zeta == 0) continue;
            const auto check = operator_norm_check(op, mu, lambda, zeta, t, which);
            INFO("mu=" << mu << " lambda=" << lambda << " zeta=" << zeta << " t=" << t
                       << " which=" << static_cast<int>(which));
            CHECK(slack(check.computed, check.bound) >= -1e-12);
          }
        }
      }
    }
  }
}

TEST_CASE("small mass flow approaches the first order decay") {
  const double gamma = kPi * kPi;
  const auto tiny = make_propagator(1e-6, 1, gamma);
  CHECK(mode_limit_gap(tiny, 1.0, 0.0, 0.0, 1.0, ModeLimitCase::initial_position) < 1e-2);
  CHECK(mode_limit_gap(tiny, 0.0, 0.0, 0.0, 1.0, ModeLimitCase::initial_position) == 0.0);
  CHECK(mode_limit_gap(tiny, 0.0, 0.0, 0.1, 1.0, ModeLimitCase::initial_velocity) == 0.0);

  for (const auto which : {ModeLimitCase::initial_position, ModeLimitCase::initial_velocity,
                           ModeLimitCase::velocity_decay}) {
    const double t0 = which == ModeLimitCase::initial_position ? 0.0 : 0.05;
    double previous = 1e300;
    for (const double mu : {1e-2, 1e-3, 1e-4, 1e-5}) {
      const double gap =
          mode_limit_gap(make_propagator(mu, 1, gamma), 1.0, 1.0, t0, 1.0, which);
      CHECK(gap < previous);
      previous = gap;
    }
  }

  CHECK_THROWS_AS(mode_limit_gap(make_propagator(1.0, 0, 1.0), 1, 1, 0.1, 1.0,
                                 ModeLimitCase::initial_position),
                  ConfigError);
  CHECK_THROWS_AS(
      mode_limit_gap(tiny, 1, 1, 0.0, 1.0, ModeLimitCase::initial_velocity), ConfigError);
  CHECK_THROWS_AS(
      mode_limit_gap(tiny, 1, 1, 0.0, 1.0, ModeLimitCase::velocity_decay), ConfigError);
  CHECK_THROWS_AS(
      mode_limit_gap(tiny, 1, 1, 0.5, 0.4, ModeLimitCase::initial_position), ConfigError);
}
