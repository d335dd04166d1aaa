#include "specwave/coefficients.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "specwave/errors.hpp"
#include "specwave/spectral.hpp"

namespace specwave {

HolderDrift make_drift(DriftForm form, double alpha, double kappa, double offset) {
  HolderDrift b;
  b.form = form;
  switch (form) {
    case DriftForm::zero:
      b.alpha = 1.0;
      break;
    case DriftForm::signed_power:
      if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("drift exponent must lie in (0,1]");
      b.alpha = alpha;
      b.kappa = kappa;
      // sign(u)|u|^alpha is alpha-Hoelder with sharp constant 2^{1-alpha}
      b.holder_constant = std::abs(kappa) * std::pow(2.0, 1.0 - alpha);
      b.growth = std::abs(kappa);
      break;
    case DriftForm::affine:
      b.alpha = 1.0;
      b.kappa = kappa;
      b.offset = offset;
      b.holder_constant = std::abs(kappa);
      b.growth = std::max(std::abs(kappa), std::abs(offset));
      break;
  }
  return b;
}

HolderMultiplier make_multiplier(MultiplierForm form, double beta, double floor, double scale) {
  if (!(floor > 0.0)) throw ConfigError("multiplier floor must be positive");
  HolderMultiplier g;
  g.form = form;
  g.floor = floor;
  switch (form) {
    case MultiplierForm::constant:
      g.beta = 1.0;
      g.growth = floor;
      break;
    case MultiplierForm::power:
      if (!(beta > 0.75 && beta <= 1.0))
        throw ConfigError("multiplier exponent must lie in (3/4, 1]");
      if (!(scale >= 0.0)) throw ConfigError("multiplier scale must be nonnegative");
      g.beta = beta;
      g.scale = scale;
      g.holder_constant = scale;
      g.growth = floor + scale;
      break;
  }
  return g;
}

double drift_value(const HolderDrift& b, double, double, double u) {
  switch (b.form) {
    case DriftForm::zero:
      return 0.0;
    case DriftForm::signed_power:
      return b.kappa * (u < 0 ? -1.0 : u > 0 ? 1.0 : 0.0) * std::pow(std::abs(u), b.alpha);
    case DriftForm::affine:
      return b.kappa * u + b.offset;
  }
  return 0.0;
}

double multiplier_value(const HolderMultiplier& g, double, double, double u) {
  switch (g.form) {
    case MultiplierForm::constant:
      return g.floor;
    case MultiplierForm::power:
      return g.floor + g.scale * std::pow(std::abs(u), g.beta);
  }
  return g.floor;
}

Eigen::ArrayXd apply_drift(const HolderDrift& b, double t, const Eigen::ArrayXd& u_phys) {
  Eigen::ArrayXd out;
  drift_field(b)(t, interior_grid(int(u_phys.size())), u_phys, out);
  return out;
}

Eigen::ArrayXd apply_multiplier(const HolderMultiplier& g, double t,
                                const Eigen::ArrayXd& u_phys, const Eigen::ArrayXd& w_phys) {
  if (u_phys.size() != w_phys.size()) throw ConfigError("grid sizes must match");
  Eigen::ArrayXd gv;
  multiplier_field(g)(t, interior_grid(int(u_phys.size())), u_phys, gv);
  return gv * w_phys;
}

Eigen::ArrayXd inverse_multiplier(const HolderMultiplier& g, double t,
                                  const Eigen::ArrayXd& u_phys, const Eigen::ArrayXd& w_phys) {
  if (u_phys.size() != w_phys.size()) throw ConfigError("grid sizes must match");
  Eigen::ArrayXd gv;
  multiplier_field(g)(t, interior_grid(int(u_phys.size())), u_phys, gv);
  if ((gv < g.floor * (1.0 - 1e-12)).any())
    throw SimulationError("multiplier dipped below its declared floor");
  return w_phys / gv;
}

LipschitzApprox::LipschitzApprox(std::function<double(double)> base, int level)
    : base_(std::move(base)), n_(level) {
  if (n_ < 1) throw ConfigError("approximation level must be >= 1");
  if (!base_) throw ConfigError("approximation needs a base function");
  const long m = long(n_) * n_;
  values_.resize(2 * m + 1);
  for (long i = -m; i <= m; ++i) values_[i + m] = base_(double(i) / n_);
  for (long i = 0; i < 2 * m; ++i)
    lipschitz_ = std::max(lipschitz_, std::abs(values_[i + 1] - values_[i]) * n_);
  // measured sup distance on the audit grid; outside it the linear tails are
  // controlled analytically by the growth bound of the base
  const long audit = 1000L * n_;
  for (long j = -audit; j <= audit; ++j) {
    const double u = double(j) / (100.0 * n_);
    c_n_ = std::max(c_n_, std::abs((*this)(u) - base_(u)));
  }
}

double LipschitzApprox::operator()(double u) const {
  const long m = long(n_) * n_;
  const double s = u * n_;
  long i = long(std::floor(s));
  if (i < -m) i = -m;
  if (i > m - 1) i = m - 1;
  const double w = s - double(i);
  return values_[i + m] * (1.0 - w) + values_[i + m + 1] * w;
}

LipschitzApprox mollify_1d(const HolderMultiplier& g, int level) {
  return LipschitzApprox([g](double u) { return multiplier_value(g, 0.0, 0.0, u); }, level);
}

LipschitzApprox mollify_1d(const HolderDrift& b, int level) {
  return LipschitzApprox([b](double u) { return drift_value(b, 0.0, 0.0, u); }, level);
}

FieldFn zero_field() {
  return [](double, const Eigen::ArrayXd&, const Eigen::ArrayXd& u, Eigen::ArrayXd& out) {
    out.setZero(u.size());
  };
}

FieldFn constant_field(double value) {
  return [value](double, const Eigen::ArrayXd&, const Eigen::ArrayXd& u, Eigen::ArrayXd& out) {
    out.setConstant(u.size(), value);
  };
}

FieldFn drift_field(const HolderDrift& b) {
  return [b](double, const Eigen::ArrayXd&, const Eigen::ArrayXd& u, Eigen::ArrayXd& out) {
    switch (b.form) {
      case DriftForm::zero:
        out.setZero(u.size());
        break;
      case DriftForm::signed_power:
        if (b.alpha == 1.0)
          out = b.kappa * u;
        else
          out = b.kappa * u.sign() * u.abs().pow(b.alpha);
        break;
      case DriftForm::affine:
        out = b.kappa * u + b.offset;
        break;
    }
  };
}

FieldFn multiplier_field(const HolderMultiplier& g) {
  return [g](double, const Eigen::ArrayXd&, const Eigen::ArrayXd& u, Eigen::ArrayXd& out) {
    switch (g.form) {
      case MultiplierForm::constant:
        out.setConstant(u.size(), g.floor);
        break;
      case MultiplierForm::power:
        if (g.beta == 1.0)
          out = g.floor + g.scale * u.abs();
        else
          out = g.floor + g.scale * u.abs().pow(g.beta);
        break;
    }
  };
}

FieldFn approx_field(const LipschitzApprox& a) {
  return [a](double, const Eigen::ArrayXd&, const Eigen::ArrayXd& u, Eigen::ArrayXd& out) {
    out.resize(u.size());
    for (Eigen::Index j = 0; j < u.size(); ++j) out[j] = a(u[j]);
  };
}

GridInterpolant::GridInterpolant(std::function<double(const Eigen::VectorXd&)> f, int dims,
                                 int level)
    : f_(std::move(f)), d_(dims), n_(level) {
  if (!f_) throw ConfigError("interpolant needs a base function");
  if (d_ < 1 || d_ > 3) throw ConfigError("interpolation dimension must lie in [1,3]");
  if (n_ < 1) throw ConfigError("interpolation level must be >= 1");
}

double GridInterpolant::operator()(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (x.size() < d_) throw ConfigError("input has fewer coordinates than the interpolant");
  long cell[3] = {0, 0, 0};
  double frac[3] = {0.0, 0.0, 0.0};
  for (int j = 0; j < d_; ++j) {
    const double s = x[j] * n_;
    cell[j] = long(std::floor(s));
    frac[j] = s - double(cell[j]);
  }
  double total = 0.0;
  Eigen::VectorXd vertex(d_);
  for (int corner = 0; corner < (1 << d_); ++corner) {
    double weight = 1.0;
    for (int j = 0; j < d_; ++j) {
      const int bit = (corner >> j) & 1;
      weight *= bit ? frac[j] : 1.0 - frac[j];
      vertex[j] = double(cell[j] + bit) / n_;
    }
    if (weight == 0.0) continue;
    const double value = std::clamp(f_(vertex), -double(n_), double(n_));
    total += weight * value;
  }
  return total;
}

GridInterpolant grid_approximate(std::function<double(const Eigen::VectorXd&)> f, int dims,
                                 int level) {
  return GridInterpolant(std::move(f), dims, level);
}

}  // namespace specwave
