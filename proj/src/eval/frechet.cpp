#include "rclab/eval/frechet.hpp"

#include <cmath>

#include "rclab/errors.hpp"

namespace rclab::eval {

namespace {

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
  const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

void require_same_dim(const GaussianStats& a, const GaussianStats& b) {
  if (a.dim() != b.dim() || a.cov.rows() != a.dim() || b.cov.rows() != b.dim()) {
    throw ArgumentError("Gaussian statistics have mismatched dimensions (" + std::to_string(a.dim()) + " vs " +
                        std::to_string(b.dim()) + ")");
  }
}

double kl(const GaussianStats& p, const GaussianStats& q) {
  const Eigen::LDLT<Eigen::MatrixXd> qf(q.cov);
  const Eigen::VectorXd d = q.mean - p.mean;
  const double trace = qf.solve(p.cov).trace();
  const double maha = d.dot(qf.solve(d));
  const double logdet = std::log(q.cov.determinant()) - std::log(p.cov.determinant());
  return 0.5 * (trace + maha - double(p.dim()) + logdet);
}

}  // namespace

GaussianStats fit_gaussian(std::span<const double> rows, std::size_t dim) {
  if (dim == 0 || rows.size() % dim != 0) throw ArgumentError("fit_gaussian: data is not a whole number of rows");
  const std::size_t n = rows.size() / dim;
  if (n < 2) throw ArgumentError("fit_gaussian: need at least two samples");
  const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> x(
      rows.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  GaussianStats s;
  s.mean = x.colwise().mean().transpose();
  const Eigen::MatrixXd centered = x.rowwise() - s.mean.transpose();
  s.cov = (centered.transpose() * centered) / double(n - 1);
  s.cov = 0.5 * (s.cov + s.cov.transpose());
  return s;
}

double frechet(const GaussianStats& a, const GaussianStats& b) {
  require_same_dim(a, b);
  const Eigen::MatrixXd ra = psd_sqrt(a.cov);
  const Eigen::MatrixXd inner = ra * b.cov * ra;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (inner + inner.transpose()), Eigen::EigenvaluesOnly);
  const double cross = es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  const double d = (a.mean - b.mean).squaredNorm() + a.cov.trace() + b.cov.trace() - 2.0 * cross;
  return std::max(d, 0.0);
}

double symmetric_kl(const GaussianStats& a, const GaussianStats& b) {
  require_same_dim(a, b);
  return kl(a, b) + kl(b, a);
}

}  // namespace rclab::eval
