#include "specwave/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "specwave/errors.hpp"

namespace specwave {

namespace {

long step_count(const SimConfig& cfg) {
  return std::lround(cfg.horizon / cfg.dt);
}

bool on_step_grid(double t, double dt, long* step) {
  const double s = t / dt;
  const long rounded = std::lround(s);
  *step = rounded;
  return std::abs(s - double(rounded)) <= 1e-9 * std::max(1.0, std::abs(s));
}

// Flow, forcing, and noise factor for every mode at a common step size,
// unpacked into coefficient arrays so the update stays elementwise.
struct ModeKernels {
  Eigen::ArrayXd a11, a12, a21, a22;  // entries of the 2x2 flow
  Eigen::ArrayXd f0, f1;              // integrated forcing response
};

ModeKernels wave_kernels(const SpectralOperator& op, double mu, int zeta, double shift,
                         double dt) {
  const int n = op.modes();
  ModeKernels k{Eigen::ArrayXd(n), Eigen::ArrayXd(n), Eigen::ArrayXd(n),
                Eigen::ArrayXd(n), Eigen::ArrayXd(n), Eigen::ArrayXd(n)};
  for (int i = 0; i < n; ++i) {
    const auto p = make_propagator(mu, zeta, op.eigenvalues()[i] + shift);
    const StepKernel sk = step_kernel(p, dt);
    k.a11[i] = sk.phi(0, 0);
    k.a12[i] = sk.phi(0, 1);
    k.a21[i] = sk.phi(1, 0);
    k.a22[i] = sk.phi(1, 1);
    k.f0[i] = sk.forcing[0];
    k.f1[i] = sk.forcing[1];
  }
  return k;
}

Eigen::Matrix3Xd packed_cholesky(const SpectralOperator& op, double mu, int zeta, double shift,
                                 double dt) {
  const int n = op.modes();
  Eigen::Matrix3Xd chol(3, n);
  for (int i = 0; i < n; ++i) {
    const auto p = make_propagator(mu, zeta, op.eigenvalues()[i] + shift);
    const StepKernel sk = step_kernel(p, dt);
    const double l00 = std::sqrt(sk.noise_cov(0, 0));
    const double l10 = l00 > 0.0 ? sk.noise_cov(1, 0) / l00 : 0.0;
    const double l11 = std::sqrt(std::max(0.0, sk.noise_cov(1, 1) - l10 * l10));
    chol.col(i) << l00, l10, l11;
  }
  return chol;
}

void check_state_matches(const SpectralOperator& op, const SimConfig& cfg) {
  if (op.modes() != cfg.n_modes)
    throw ConfigError("operator mode count does not match the configuration");
}

void check_finite(const Eigen::VectorXd& w, double t) {
  if (!w.allFinite())
    throw SimulationError("state left the finite range at t=" + std::to_string(t));
}

Eigen::VectorXd to_vector(const std::vector<double>& v) {
  Eigen::VectorXd out(long(v.size()));
  for (long i = 0; i < out.size(); ++i) out[i] = v[std::size_t(i)];
  return out;
}

// Shared per-step scratch space sized once per run.
struct Workspace {
  Eigen::VectorXd u_phys;     // G
  Eigen::ArrayXd u_vals;      // grid values of the state
  Eigen::ArrayXd field;       // grid values of the active coefficient
  Eigen::MatrixXd pair_spec;  // N x 2
  Eigen::MatrixXd pair_phys;  // G x 2
  Eigen::MatrixXd b_hat;      // N x 1

  Workspace(int n, int g)
      : u_phys(g), u_vals(g), field(g), pair_spec(n, 2), pair_phys(g, 2), b_hat(n, 1) {}
};

// Evaluates drift coefficients and the scaled noise pair for one state at the
// left endpoint of a step.  `raw` holds the linear increments column-wise; on
// return ws.pair_spec holds the amplitude-scaled pair and ws.b_hat the drift
// coefficients (zeroed when the drift is off).
void prepare_step(const SineTransform& tf, const Eigen::ArrayXd& x, const FieldFn& drift,
                  const FieldFn& multiplier, double t, const Eigen::VectorXd& u,
                  const Eigen::Matrix2Xd& raw, Workspace& ws) {
  if (bool(drift) || bool(multiplier)) {
    tf.to_physical(u, ws.u_phys);
    ws.u_vals = ws.u_phys.array();
  }
  if (drift) {
    drift(t, x, ws.u_vals, ws.field);
    tf.to_spectral(ws.field.matrix(), ws.b_hat);
  } else {
    ws.b_hat.setZero();
  }
  if (multiplier) {
    multiplier(t, x, ws.u_vals, ws.field);
    ws.pair_spec = raw.transpose();
    tf.to_physical(ws.pair_spec, ws.pair_phys);
    ws.pair_phys.array().colwise() *= ws.field;
    tf.to_spectral(ws.pair_phys, ws.pair_spec);
  } else {
    ws.pair_spec.setZero();
  }
}

}  // namespace

void validate(const SimConfig& cfg) {
  if (cfg.n_modes < 1) throw ConfigError("n_modes must be at least 1");
  if (cfg.grid_size < cfg.n_modes) throw ConfigError("grid_size must be at least n_modes");
  if (!(cfg.dt > 0.0)) throw ConfigError("dt must be positive");
  if (!(cfg.horizon >= cfg.dt)) throw ConfigError("horizon must cover at least one step");
  if (!(cfg.mu > 0.0)) throw ConfigError("mu must be positive");
  if (!(cfg.lambda >= 0.0)) throw ConfigError("lambda must be nonnegative");
  if (cfg.zeta != 0 && cfg.zeta != 1) throw ConfigError("zeta must be 0 or 1");
  long steps = 0;
  if (!on_step_grid(cfg.horizon, cfg.dt, &steps) || steps < 1)
    throw ConfigError("horizon must be a multiple of dt");
  double previous = -1.0;
  for (const double r : cfg.record_times) {
    if (!(r >= 0.0) || r > cfg.horizon * (1.0 + 1e-12))
      throw ConfigError("record times must lie in [0, horizon]");
    if (r <= previous) throw ConfigError("record times must be strictly increasing");
    long ignored = 0;
    if (!on_step_grid(r, cfg.dt, &ignored))
      throw ConfigError("record times must be multiples of dt");
    previous = r;
  }
}

std::vector<long> record_steps(const SimConfig& cfg) {
  validate(cfg);
  std::vector<long> steps;
  steps.reserve(cfg.record_times.size());
  for (const double r : cfg.record_times) {
    long s = 0;
    on_step_grid(r, cfg.dt, &s);
    steps.push_back(s);
  }
  return steps;
}

ExactStepNoise::ExactStepNoise(const SpectralOperator& op, const SimConfig& cfg,
                               NoiseStream stream)
    : chol_(packed_cholesky(op, cfg.mu, cfg.zeta, cfg.lambda, cfg.dt)), stream_(stream) {}

void ExactStepNoise::increments(long step, Eigen::Ref<Eigen::Matrix2Xd> out) {
  const int n = modes();
  for (int k = 0; k < n; ++k) {
    const Eigen::Vector2d z = stream_.normal_pair(k, step);
    out(0, k) = chol_(0, k) * z[0];
    out(1, k) = chol_(1, k) * z[0] + chol_(2, k) * z[1];
  }
}

RefinedStepNoise::RefinedStepNoise(const SpectralOperator& op, const SimConfig& coarse_cfg,
                                   int refine, NoiseStream stream)
    : refine_(refine), stream_(stream) {
  if (refine < 1) throw ConfigError("refinement factor must be at least 1");
  const double fine_dt = coarse_cfg.dt / refine;
  chol_fine_ = packed_cholesky(op, coarse_cfg.mu, coarse_cfg.zeta, coarse_cfg.lambda, fine_dt);
  flow_fine_.reserve(op.modes());
  for (int i = 0; i < op.modes(); ++i) {
    const auto p =
        make_propagator(coarse_cfg.mu, coarse_cfg.zeta, op.eigenvalues()[i] + coarse_cfg.lambda);
    flow_fine_.push_back(step_kernel(p, fine_dt).phi);
  }
}

void RefinedStepNoise::increments(long step, Eigen::Ref<Eigen::Matrix2Xd> out) {
  const int n = modes();
  for (int k = 0; k < n; ++k) {
    Eigen::Vector2d acc = Eigen::Vector2d::Zero();
    for (int i = 0; i < refine_; ++i) {
      const Eigen::Vector2d z = stream_.normal_pair(k, step * refine_ + i);
      Eigen::Vector2d eta;
      eta[0] = chol_fine_(0, k) * z[0];
      eta[1] = chol_fine_(1, k) * z[0] + chol_fine_(2, k) * z[1];
      acc = flow_fine_[k] * acc + eta;
    }
    out.col(k) = acc;
  }
}

WavePath simulate_wave(const SpectralOperator& op, const SimConfig& cfg, const FieldFn& drift,
                       const FieldFn& multiplier, const PhaseState& z0, WaveStepNoise& noise) {
  check_state_matches(op, cfg);
  const auto rec = record_steps(cfg);
  if (z0.u.size() != cfg.n_modes || z0.v.size() != cfg.n_modes)
    throw ConfigError("initial state size does not match n_modes");
  if (noise.modes() != cfg.n_modes)
    throw ConfigError("noise source mode count does not match the configuration");

  const int n = cfg.n_modes;
  const long steps = step_count(cfg);
  const ModeKernels K = wave_kernels(op, cfg.mu, cfg.zeta, cfg.lambda, cfg.dt);
  const SineTransform tf(n, cfg.grid_size);
  const Eigen::ArrayXd x = interior_grid(cfg.grid_size);

  WavePath path;
  path.times = to_vector(cfg.record_times);
  path.u.resize(n, long(rec.size()));
  path.v.resize(n, long(rec.size()));

  Eigen::ArrayXd u = z0.u.array();
  Eigen::ArrayXd v = z0.v.array();
  Eigen::Matrix2Xd raw(2, n);
  Workspace ws(n, cfg.grid_size);
  Eigen::ArrayXd u_next(n);

  std::size_t r = 0;
  auto record = [&](long step) {
    while (r < rec.size() && rec[r] == step) {
      path.u.col(long(r)) = u.matrix();
      path.v.col(long(r)) = v.matrix();
      check_finite(path.u.col(long(r)), double(step) * cfg.dt);
      check_finite(path.v.col(long(r)), double(step) * cfg.dt);
      ++r;
    }
  };
  record(0);

  for (long m = 0; m < steps; ++m) {
    const double t = double(m) * cfg.dt;
    if (multiplier) noise.increments(m, raw);
    prepare_step(tf, x, drift, multiplier, t, u.matrix(), raw, ws);
    u_next = K.a11 * u + K.a12 * v + K.f0 * ws.b_hat.col(0).array() +
             ws.pair_spec.col(0).array();
    v = K.a21 * u + K.a22 * v + K.f1 * ws.b_hat.col(0).array() + ws.pair_spec.col(1).array();
    u = u_next;
    record(m + 1);
  }
  return path;
}

WavePath simulate_wave(const SpectralOperator& op, const SimConfig& cfg, const FieldFn& drift,
                       const FieldFn& multiplier, const PhaseState& z0, NoiseStream stream) {
  validate(cfg);
  check_state_matches(op, cfg);
  ExactStepNoise noise(op, cfg, stream);
  return simulate_wave(op, cfg, drift, multiplier, z0, noise);
}

FieldPath simulate_heat(const SpectralOperator& op, const SimConfig& cfg, const FieldFn& drift,
                        const FieldFn& multiplier, const Eigen::VectorXd& u0,
                        NoiseStream stream) {
  check_state_matches(op, cfg);
  const auto rec = record_steps(cfg);
  if (u0.size() != cfg.n_modes) throw ConfigError("initial state size does not match n_modes");

  const int n = cfg.n_modes;
  const long steps = step_count(cfg);
  Eigen::ArrayXd decay(n), forcing(n), sd(n);
  for (int i = 0; i < n; ++i) {
    const HeatStep h = heat_kernel(op.eigenvalues()[i] + cfg.lambda, cfg.dt);
    decay[i] = h.decay;
    forcing[i] = h.forcing;
    sd[i] = std::sqrt(h.noise_var);
  }
  const SineTransform tf(n, cfg.grid_size);
  const Eigen::ArrayXd x = interior_grid(cfg.grid_size);

  FieldPath path;
  path.times = to_vector(cfg.record_times);
  path.u.resize(n, long(rec.size()));

  Eigen::ArrayXd u = u0.array();
  Eigen::MatrixXd u_phys(cfg.grid_size, 1);
  Eigen::ArrayXd field(cfg.grid_size);
  Eigen::MatrixXd eta(n, 1), eta_phys(cfg.grid_size, 1), b_hat(n, 1);

  std::size_t r = 0;
  auto record = [&](long step) {
    while (r < rec.size() && rec[r] == step) {
      path.u.col(long(r)) = u.matrix();
      check_finite(path.u.col(long(r)), double(step) * cfg.dt);
      ++r;
    }
  };
  record(0);

  for (long m = 0; m < steps; ++m) {
    const double t = double(m) * cfg.dt;
    const bool need_phys = bool(drift) || bool(multiplier);
    if (need_phys) tf.to_physical(u.matrix(), u_phys);
    if (drift) {
      drift(t, x, u_phys.col(0).array(), field);
      tf.to_spectral(field.matrix(), b_hat);
    } else {
      b_hat.setZero();
    }
    if (multiplier) {
      // Shares the first component of each wave-noise pair on this stream.
      for (int k = 0; k < n; ++k) eta(k, 0) = sd[k] * stream.normal_pair(k, m)[0];
      multiplier(t, x, u_phys.col(0).array(), field);
      tf.to_physical(eta, eta_phys);
      eta_phys.array().col(0) *= field;
      tf.to_spectral(eta_phys, eta);
    } else {
      eta.setZero();
    }
    u = decay * u + forcing * b_hat.col(0).array() + eta.col(0).array();
    record(m + 1);
  }
  return path;
}

FieldPath stochastic_convolution(const SpectralOperator& op, const SimConfig& cfg,
                                 const Eigen::VectorXd& weights, NoiseStream stream) {
  check_state_matches(op, cfg);
  const auto rec = record_steps(cfg);
  const int n = cfg.n_modes;
  if (weights.size() != 0 && weights.size() != n)
    throw ConfigError("weight vector size does not match n_modes");

  const long steps = step_count(cfg);
  const ModeKernels K = wave_kernels(op, cfg.mu, cfg.zeta, cfg.lambda, cfg.dt);
  const Eigen::Matrix3Xd chol = packed_cholesky(op, cfg.mu, cfg.zeta, cfg.lambda, cfg.dt);

  FieldPath path;
  path.times = to_vector(cfg.record_times);
  path.u.resize(n, long(rec.size()));

  Eigen::ArrayXd u = Eigen::ArrayXd::Zero(n);
  Eigen::ArrayXd v = Eigen::ArrayXd::Zero(n);
  Eigen::ArrayXd u_next(n);

  std::size_t r = 0;
  auto record = [&](long step) {
    while (r < rec.size() && rec[r] == step) {
      path.u.col(long(r)) = u.matrix();
      check_finite(path.u.col(long(r)), double(step) * cfg.dt);
      ++r;
    }
  };
  record(0);

  for (long m = 0; m < steps; ++m) {
    for (int k = 0; k < n; ++k) {
      const Eigen::Vector2d z = stream.normal_pair(k, m);
      const double w = weights.size() ? weights[k] : 1.0;
      const double eu = w * chol(0, k) * z[0];
      const double ev = w * (chol(1, k) * z[0] + chol(2, k) * z[1]);
      u_next[k] = K.a11[k] * u[k] + K.a12[k] * v[k] + eu;
      v[k] = K.a21[k] * u[k] + K.a22[k] * v[k] + ev;
    }
    u = u_next;
    record(m + 1);
  }
  return path;
}

CoupledRun simulate_controlled_pair(const SpectralOperator& op, const SimConfig& cfg,
                                    const FieldFn& drift, const FieldFn& mult,
                                    const FieldFn& mult_approx, double threshold,
                                    double lambda_control, const PhaseState& z0,
                                    NoiseStream stream) {
  check_state_matches(op, cfg);
  const auto rec = record_steps(cfg);
  if (!(threshold > 0.0)) throw ConfigError("threshold must be positive");
  if (!(lambda_control >= 0.0)) throw ConfigError("lambda_control must be nonnegative");
  if (z0.u.size() != cfg.n_modes || z0.v.size() != cfg.n_modes)
    throw ConfigError("initial state size does not match n_modes");
  if (!mult_approx) throw ConfigError("the controlled copy needs a multiplier");

  const int n = cfg.n_modes;
  const long steps = step_count(cfg);
  // Both copies run on kernels shifted by the control rate; the shift is paid
  // back through the forcing term so the pair of equations stays equivalent
  // to the unshifted system.
  const double shift = cfg.lambda + lambda_control;
  const ModeKernels K = wave_kernels(op, cfg.mu, cfg.zeta, shift, cfg.dt);
  SimConfig shifted = cfg;
  shifted.lambda = shift;
  ExactStepNoise noise(op, shifted, stream);
  const SineTransform tf(n, cfg.grid_size);
  const Eigen::ArrayXd x = interior_grid(cfg.grid_size);

  CoupledRun run;
  run.tau = cfg.horizon;
  auto init_path = [&](WavePath& p) {
    p.times = to_vector(cfg.record_times);
    p.u.resize(n, long(rec.size()));
    p.v.resize(n, long(rec.size()));
  };
  init_path(run.primary);
  init_path(run.controlled);
  run.deviation.resize(long(rec.size()));

  Eigen::ArrayXd up = z0.u.array(), vp = z0.v.array();
  Eigen::ArrayXd uc = z0.u.array(), vc = z0.v.array();
  Eigen::Matrix2Xd raw(2, n);
  Workspace wp(n, cfg.grid_size), wc(n, cfg.grid_size);
  Eigen::ArrayXd tmp(n);
  bool control_active = true;
  const double inv_weight = 1.0 / (cfg.grid_size + 1.0);

  std::size_t r = 0;
  auto record = [&](long step) {
    while (r < rec.size() && rec[r] == step) {
      run.primary.u.col(long(r)) = up.matrix();
      run.primary.v.col(long(r)) = vp.matrix();
      run.controlled.u.col(long(r)) = uc.matrix();
      run.controlled.v.col(long(r)) = vc.matrix();
      run.deviation[long(r)] = (up - uc).matrix().norm();
      check_finite(run.primary.u.col(long(r)), double(step) * cfg.dt);
      check_finite(run.controlled.u.col(long(r)), double(step) * cfg.dt);
      ++r;
    }
  };
  record(0);

  for (long m = 0; m < steps; ++m) {
    const double t = double(m) * cfg.dt;
    noise.increments(m, raw);
    prepare_step(tf, x, drift, mult, t, up.matrix(), raw, wp);
    prepare_step(tf, x, drift, mult_approx, t, uc.matrix(), raw, wc);

    if (control_active && lambda_control > 0.0) {
      // Left-point quadrature of the squared control pre-image.  wc.field
      // still holds the controlled amplitude on the grid, bounded below by
      // the multiplier floor, so the division is safe.
      const double integrand =
          ((wp.u_vals - wc.u_vals) * lambda_control / wc.field).square().sum() * inv_weight;
      run.girsanov_cost += cfg.dt * integrand;
    }

    // The primary always pays back the kernel shift on its own state; the
    // controlled copy tracks the primary while the control is on and pays
    // back on itself afterwards.
    const Eigen::ArrayXd& target = control_active ? up : uc;
    tmp = K.a11 * up + K.a12 * vp + K.f0 * (wp.b_hat.col(0).array() + lambda_control * up) +
          wp.pair_spec.col(0).array();
    vp = K.a21 * up + K.a22 * vp + K.f1 * (wp.b_hat.col(0).array() + lambda_control * up) +
         wp.pair_spec.col(1).array();
    const Eigen::ArrayXd forced = wc.b_hat.col(0).array() + lambda_control * target;
    const Eigen::ArrayXd uc_next =
        K.a11 * uc + K.a12 * vc + K.f0 * forced + wc.pair_spec.col(0).array();
    vc = K.a21 * uc + K.a22 * vc + K.f1 * forced + wc.pair_spec.col(1).array();
    uc = uc_next;
    up = tmp;

    const double dev = (up - uc).matrix().norm();
    if (control_active) {
      run.sup_deviation = std::max(run.sup_deviation, dev);
      if (dev >= threshold) {
        run.tau = double(m + 1) * cfg.dt;
        run.stopped = true;
        control_active = false;
      }
    }
    record(m + 1);
  }
  return run;
}

}  // namespace specwave
