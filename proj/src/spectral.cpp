#include "specwave/spectral.hpp"

#include <cmath>
#include <numbers>

#include "specwave/errors.hpp"

namespace specwave {

namespace {
constexpr double kPi = std::numbers::pi;
}

SpectralOperator::SpectralOperator(EigenFamily family, Eigen::ArrayXd eigenvalues, double eta0)
    : family_(family), alpha_(std::move(eigenvalues)), eta0_(eta0) {
  if (alpha_.size() == 0) throw ConfigError("operator needs at least one mode");
  if (!(eta0_ > 0.0 && eta0_ < 1.0)) throw ConfigError("eta0 must lie in (0,1)");
  double prev = 0.0;
  for (double a : alpha_) {
    if (!(a > 0.0) || a < prev) throw ConfigError("eigenvalues must be positive and ascending");
    prev = a;
  }
}

SpectralOperator make_operator(EigenFamily family, int n_modes, double eta0, double scale) {
  if (n_modes < 1) throw ConfigError("mode count must be >= 1");
  if (!(eta0 > 0.0 && eta0 < 1.0)) throw ConfigError("eta0 must lie in (0,1)");
  if (!(scale > 0.0)) throw ConfigError("eigenvalue scale must be positive");
  Eigen::ArrayXd alpha(n_modes);
  switch (family) {
    case EigenFamily::dirichlet_laplacian:
      for (int k = 1; k <= n_modes; ++k) alpha[k - 1] = (k * kPi) * (k * kPi);
      eta0 = 0.5;
      break;
    case EigenFamily::bilaplacian_1d:
      for (int k = 1; k <= n_modes; ++k) {
        double kp = k * kPi;
        alpha[k - 1] = kp * kp * kp * kp;
      }
      eta0 = 0.75;
      break;
    case EigenFamily::power_law: {
      double expo = 1.0 / (1.0 - eta0);
      for (int k = 1; k <= n_modes; ++k) alpha[k - 1] = scale * std::pow(double(k), expo);
      break;
    }
  }
  return SpectralOperator(family, std::move(alpha), eta0);
}

double eigenvalue_tail_sum(const SpectralOperator& op, double delta) {
  if (!(delta < op.eta0())) throw ConfigError("tail sum diverges for delta >= eta0");
  double s = 0.0;
  for (double a : op.eigenvalues()) s += std::pow(a, delta - 1.0);
  return s;
}

double sobolev_norm(const Eigen::Ref<const Eigen::VectorXd>& coeffs, const NormSpec& spec,
                    const SpectralOperator& op) {
  if (coeffs.size() > op.modes()) throw ConfigError("coefficient vector exceeds operator modes");
  if (coeffs.size() == 0) return 0.0;
  if (spec.delta == 0.0) return coeffs.norm();
  const auto& alpha = op.eigenvalues().head(coeffs.size());
  return std::sqrt(((alpha + spec.lambda).pow(spec.delta) * coeffs.array().square()).sum());
}

namespace {

Eigen::MatrixXd sine_basis(int n_modes, int grid_size) {
  Eigen::MatrixXd basis(grid_size, n_modes);
  const double h = 1.0 / (grid_size + 1);
  for (int k = 0; k < n_modes; ++k)
    for (int j = 0; j < grid_size; ++j)
      basis(j, k) = std::numbers::sqrt2 * std::sin((k + 1) * kPi * (j + 1) * h);
  return basis;
}

}  // namespace

Eigen::ArrayXd interior_grid(int grid_size) {
  if (grid_size < 1) throw ConfigError("grid size must be >= 1");
  return Eigen::ArrayXd::LinSpaced(grid_size, 1.0, double(grid_size)) / (grid_size + 1.0);
}

Eigen::VectorXd to_physical(const Eigen::Ref<const Eigen::VectorXd>& coeffs, int grid_size) {
  if (grid_size < 1) throw ConfigError("grid size must be >= 1");
  return sine_basis(static_cast<int>(coeffs.size()), grid_size) * coeffs;
}

Eigen::VectorXd to_spectral(const Eigen::Ref<const Eigen::VectorXd>& samples, int n_modes) {
  const int grid_size = static_cast<int>(samples.size());
  if (grid_size < 1) throw ConfigError("grid size must be >= 1");
  if (n_modes < 1) throw ConfigError("mode count must be >= 1");
  return sine_basis(n_modes, grid_size).transpose() * samples / (grid_size + 1);
}

SineTransform::SineTransform(int n_modes, int grid_size)
    : n_modes_(n_modes), grid_size_(grid_size) {
  if (n_modes < 1) throw ConfigError("mode count must be >= 1");
  if (grid_size < n_modes) throw ConfigError("grid must resolve every mode (G >= N)");
  basis_ = sine_basis(n_modes, grid_size);
}

Eigen::MatrixXd SineTransform::to_physical(const Eigen::Ref<const Eigen::MatrixXd>& coeffs) const {
  return basis_ * coeffs;
}

Eigen::MatrixXd SineTransform::to_spectral(const Eigen::Ref<const Eigen::MatrixXd>& samples) const {
  return basis_.transpose() * samples / (grid_size_ + 1);
}

void SineTransform::to_physical(const Eigen::Ref<const Eigen::MatrixXd>& coeffs,
                                Eigen::Ref<Eigen::MatrixXd> out) const {
  out.noalias() = basis_ * coeffs;
}

void SineTransform::to_spectral(const Eigen::Ref<const Eigen::MatrixXd>& samples,
                                Eigen::Ref<Eigen::MatrixXd> out) const {
  out.noalias() = basis_.transpose() * samples / (grid_size_ + 1);
}

}  // namespace specwave
