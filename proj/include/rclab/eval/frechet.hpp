#pragma once

#include <span>

#include <Eigen/Dense>

namespace rclab::eval {

struct GaussianStats {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;

  Eigen::Index dim() const noexcept { return mean.size(); }
};

// Mean and unbiased covariance of `rows` (row-major, `dim` columns),
// symmetrized. Needs at least two rows.
GaussianStats fit_gaussian(std::span<const double> rows, std::size_t dim);

// Squared 2-Wasserstein distance between Gaussians:
//   |mu_a - mu_b|^2 + tr(S_a + S_b - 2 (S_a^1/2 S_b S_a^1/2)^1/2)
// Square roots use a symmetric eigendecomposition with negative eigenvalues
// clamped to zero.
double frechet(const GaussianStats& a, const GaussianStats& b);

// Symmetric KL divergence KL(a||b) + KL(b||a) between Gaussians.
double symmetric_kl(const GaussianStats& a, const GaussianStats& b);

}  // namespace rclab::eval
