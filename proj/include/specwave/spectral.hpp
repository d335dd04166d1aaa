#pragma once

#include <Eigen/Dense>

namespace specwave {

// Diagonalized second-order elliptic operators on (0,1) with Dirichlet
// boundary, represented by their eigenvalue sequence against the orthonormal
// sine basis e_k(x) = sqrt(2) sin(k pi x).  A mode vector is the coefficient
// expansion of a function (or velocity) against that basis, so every norm in
// this library is a weighted coefficient sum.

enum class EigenFamily {
  dirichlet_laplacian,  // alpha_k = (k pi)^2
  bilaplacian_1d,       // alpha_k = (k pi)^4
  power_law,            // alpha_k = scale * k^{1/(1-eta0)}
};

class SpectralOperator {
 public:
  SpectralOperator(EigenFamily family, Eigen::ArrayXd eigenvalues, double eta0);

  EigenFamily family() const { return family_; }
  int modes() const { return static_cast<int>(alpha_.size()); }
  // Trace exponent: sum_k alpha_k^{-(1-eta)} stays bounded for every eta < eta0.
  double eta0() const { return eta0_; }
  const Eigen::ArrayXd& eigenvalues() const { return alpha_; }
  double eigenvalue(int k) const { return alpha_[k - 1]; }  // 1-based mode index

 private:
  EigenFamily family_;
  Eigen::ArrayXd alpha_;
  double eta0_;
};

// eta0 and scale only steer the power_law family; dirichlet_laplacian pins
// eta0 = 1/2 and bilaplacian_1d pins 3/4.  Throws ConfigError on bad input.
SpectralOperator make_operator(EigenFamily family, int n_modes, double eta0 = 0.5,
                               double scale = 1.0);

// Partial sum  sum_{k<=N} alpha_k^{-(1-delta)};  finite-N proxy for the trace
// condition, monotone in N and bounded whenever delta < eta0.
double eigenvalue_tail_sum(const SpectralOperator& op, double delta);

// Shifted interpolation-space norm  |v|^2 = sum_k (alpha_k + lambda)^delta c_k^2.
struct NormSpec {
  double delta = 0.0;
  double lambda = 0.0;
};

double sobolev_norm(const Eigen::Ref<const Eigen::VectorXd>& coeffs, const NormSpec& spec,
                    const SpectralOperator& op);

// Physical grid: interior Dirichlet points x_j = j/(G+1), j = 1..G.  The
// discrete sine vectors are exactly orthogonal on that grid, so to_spectral
// inverts to_physical whenever the grid resolves every stored mode (G >= N).
Eigen::ArrayXd interior_grid(int grid_size);
Eigen::VectorXd to_physical(const Eigen::Ref<const Eigen::VectorXd>& coeffs, int grid_size);
Eigen::VectorXd to_spectral(const Eigen::Ref<const Eigen::VectorXd>& samples, int n_modes);

// Cached basis matrix for the hot loops in simulate: one G x N matrix shared
// by both directions, applied to one or more columns at a time.
class SineTransform {
 public:
  SineTransform(int n_modes, int grid_size);

  int modes() const { return n_modes_; }
  int grid() const { return grid_size_; }

  Eigen::MatrixXd to_physical(const Eigen::Ref<const Eigen::MatrixXd>& coeffs) const;
  Eigen::MatrixXd to_spectral(const Eigen::Ref<const Eigen::MatrixXd>& samples) const;

  // In-place variants so steppers can keep preallocated workspaces.
  void to_physical(const Eigen::Ref<const Eigen::MatrixXd>& coeffs,
                   Eigen::Ref<Eigen::MatrixXd> out) const;
  void to_spectral(const Eigen::Ref<const Eigen::MatrixXd>& samples,
                   Eigen::Ref<Eigen::MatrixXd> out) const;

 private:
  int n_modes_;
  int grid_size_;
  Eigen::MatrixXd basis_;  // basis_(j, k) = sqrt(2) sin((k+1) pi x_j)
};

}  // namespace specwave
