#pragma once

#include <functional>

#include <Eigen/Dense>

namespace specwave {

/*
 * Nemytskii coefficient fields: a scalar profile applied pointwise on the
 * physical grid, out[j] = value(t, x[j], u[j]).  The shipped profiles are
 * x- and t-homogeneous; the signatures carry (t, x) so user-defined fields
 * can depend on both.
 */

// Vectorized pointwise evaluation over a grid.
using FieldFn = std::function<void(double t, const Eigen::ArrayXd& x, const Eigen::ArrayXd& u,
                                   Eigen::ArrayXd& out)>;

enum class DriftForm {
  zero,          // b = 0
  signed_power,  // b(u) = kappa sign(u) |u|^alpha
  affine,        // b(u) = kappa u + offset
};

struct HolderDrift {
  DriftForm form = DriftForm::zero;
  double alpha = 1.0;   // Hoelder exponent in (0, 1]
  double kappa = 0.0;
  double offset = 0.0;
  // |b(u) - b(w)| <= holder_constant |u - w|^alpha for |u - w| <= 1,
  // |b(u)| <= growth (1 + |u|); both hold analytically for every form above.
  double holder_constant = 0.0;
  double growth = 0.0;
};

HolderDrift make_drift(DriftForm form, double alpha = 1.0, double kappa = 0.0,
                       double offset = 0.0);

enum class MultiplierForm {
  constant,  // g = floor
  power,     // g(u) = floor + scale |u|^beta
};

struct HolderMultiplier {
  MultiplierForm form = MultiplierForm::constant;
  double beta = 1.0;   // Hoelder exponent in (3/4, 1]
  double floor = 1.0;  // uniform nondegeneracy: g >= floor > 0
  double scale = 0.0;
  double holder_constant = 0.0;
  double growth = 0.0;  // g(u) <= growth (1 + |u|)
};

HolderMultiplier make_multiplier(MultiplierForm form, double beta = 1.0, double floor = 1.0,
                                 double scale = 0.0);

double drift_value(const HolderDrift& b, double t, double x, double u);
double multiplier_value(const HolderMultiplier& g, double t, double x, double u);

// Pointwise grid operations; x is derived from the vector length via the
// interior-grid convention.
Eigen::ArrayXd apply_drift(const HolderDrift& b, double t, const Eigen::ArrayXd& u_phys);
Eigen::ArrayXd apply_multiplier(const HolderMultiplier& g, double t,
                                const Eigen::ArrayXd& u_phys, const Eigen::ArrayXd& w_phys);
// w / g(u); the floor makes this total, and it inverts apply_multiplier.
Eigen::ArrayXd inverse_multiplier(const HolderMultiplier& g, double t,
                                  const Eigen::ArrayXd& u_phys, const Eigen::ArrayXd& w_phys);

// Piecewise-linear interpolation of a scalar profile on the knots i/n,
// i in [-n^2, n^2], extended linearly with the boundary slopes.  Globally
// Lipschitz for any continuous base; the distance to the base is measured on
// an audit grid of spacing 1/(100 n) over [-10, 10] at construction.
class LipschitzApprox {
 public:
  LipschitzApprox(std::function<double(double)> base, int level);

  double operator()(double u) const;
  int level() const { return n_; }
  double error_bound() const { return c_n_; }
  double lipschitz_constant() const { return lipschitz_; }
  double min_value() const { return values_.minCoeff(); }
  const std::function<double(double)>& base() const { return base_; }

 private:
  std::function<double(double)> base_;
  int n_;
  double c_n_ = 0.0;
  double lipschitz_ = 0.0;
  Eigen::ArrayXd values_;  // knot values, index i+n^2 for knot i/n
};

LipschitzApprox mollify_1d(const HolderMultiplier& g, int level);
LipschitzApprox mollify_1d(const HolderDrift& b, int level);

// Field adapters for the steppers.
FieldFn zero_field();
FieldFn constant_field(double value);
FieldFn drift_field(const HolderDrift& b);
FieldFn multiplier_field(const HolderMultiplier& g);
FieldFn approx_field(const LipschitzApprox& a);

// Multilinear interpolation of a scalar function of dims <= 3 coordinates on
// the lattice (Z/level)^dims, with vertex values clamped to [-level, level].
// Input vectors longer than dims are projected onto their leading block.
class GridInterpolant {
 public:
  GridInterpolant(std::function<double(const Eigen::VectorXd&)> f, int dims, int level);

  double operator()(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  int dims() const { return d_; }
  int level() const { return n_; }

 private:
  std::function<double(const Eigen::VectorXd&)> f_;
  int d_;
  int n_;
};

GridInterpolant grid_approximate(std::function<double(const Eigen::VectorXd&)> f, int dims,
                                 int level);

}  // namespace specwave
