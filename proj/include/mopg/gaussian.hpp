#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "mopg/errors.hpp"
#include "mopg/rng.hpp"

namespace mopg {

inline constexpr double kTwoPi = 6.283185307179586476925;

/// Symmetrizes and floors the eigenvalues at 1e-12 * trace / dim. Used after
/// Jacobian covariance propagation, where finite-difference noise can leave
/// tiny negative eigenvalues.
inline Eigen::MatrixXd repair_spd(const Eigen::MatrixXd& m) {
  Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  const double floor =
      1e-12 * std::abs(sym.trace()) / static_cast<double>(sym.rows());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  if (eig.eigenvalues().minCoeff() >= floor) return sym;
  Eigen::VectorXd vals = eig.eigenvalues().cwiseMax(floor);
  return eig.eigenvectors() * vals.asDiagonal() * eig.eigenvectors().transpose();
}

/// Plain multivariate Gaussian on a chart, used by the divergence machinery.
struct GaussianKernel {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;

  GaussianKernel() = default;
  GaussianKernel(Eigen::VectorXd mu, Eigen::MatrixXd sigma)
      : mean(std::move(mu)), cov(std::move(sigma)) {
    if (cov.rows() != cov.cols() || cov.rows() != mean.size()) {
      throw ValidationError("GaussianKernel: dimension mismatch");
    }
    if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-10) {
      throw ValidationError("GaussianKernel: covariance not symmetric");
    }
    cov = 0.5 * (cov + cov.transpose());
  }

  Eigen::Index dim() const { return mean.size(); }
};

inline double log_density(const GaussianKernel& g, const Eigen::VectorXd& x) {
  Eigen::LLT<Eigen::MatrixXd> llt(g.cov);
  if (llt.info() != Eigen::Success) {
    throw NumericError("log_density: covariance not positive definite");
  }
  const Eigen::VectorXd diff = x - g.mean;
  const Eigen::VectorXd half = llt.matrixL().solve(diff);
  double log_det = 0.0;
  for (Eigen::Index i = 0; i < g.dim(); ++i) {
    log_det += std::log(llt.matrixL()(i, i));
  }
  return -0.5 * half.squaredNorm() - log_det -
         0.5 * static_cast<double>(g.dim()) * std::log(kTwoPi);
}

inline double density(const GaussianKernel& g, const Eigen::VectorXd& x) {
  return std::exp(log_density(g, x));
}

/// Symmetrized Kullback-Leibler divergence of two Gaussians,
///   1/2 tr(S2^-1 S1 + S1^-1 S2 + (S1^-1 + S2^-1) dd^T) - d,
/// the form in which the log-determinants cancel.
inline double skl_divergence(const GaussianKernel& g1,
                             const GaussianKernel& g2) {
  if (g1.dim() != g2.dim()) {
    throw ValidationError("skl_divergence: dimension mismatch");
  }
  Eigen::LLT<Eigen::MatrixXd> llt1(g1.cov);
  Eigen::LLT<Eigen::MatrixXd> llt2(g2.cov);
  if (llt1.info() != Eigen::Success || llt2.info() != Eigen::Success) {
    throw NumericError("skl_divergence: covariance not positive definite");
  }
  const Eigen::VectorXd diff = g1.mean - g2.mean;
  const double tr12 = llt2.solve(g1.cov).trace();
  const double tr21 = llt1.solve(g2.cov).trace();
  const double maha =
      diff.dot(llt1.solve(diff)) + diff.dot(llt2.solve(diff));
  return 0.5 * (tr12 + tr21 + maha) - static_cast<double>(g1.dim());
}

/// Moment-preserving merge of two weighted Gaussians. With w_i the pair
/// weights normalized to sum 1, the merged moments are
///   mu = w1 mu1 + w2 mu2,
///   cov = w1 S1 + w2 S2 + w1 w2 (mu1-mu2)(mu1-mu2)^T,
/// which matches the pooled zeroth/first/second moments exactly.
inline GaussianKernel moment_merge(const GaussianKernel& g1,
                                   const GaussianKernel& g2, double lambda1,
                                   double lambda2) {
  if (!(lambda1 > 0.0) || !(lambda2 > 0.0)) {
    throw ValidationError("moment_merge: weights must be positive");
  }
  if (g1.dim() != g2.dim()) {
    throw ValidationError("moment_merge: dimension mismatch");
  }
  const double w1 = lambda1 / (lambda1 + lambda2);
  const double w2 = lambda2 / (lambda1 + lambda2);
  const Eigen::VectorXd diff = g1.mean - g2.mean;
  GaussianKernel merged;
  merged.mean = w1 * g1.mean + w2 * g2.mean;
  merged.cov = w1 * g1.cov + w2 * g2.cov + (w1 * w2) * (diff * diff.transpose());
  return merged;
}

/// Upper bound B_s(i,j) on the whole-mixture sKL change caused by merging
/// two components: lambda_i * sKL(g_i, g_ij) + lambda_j * sKL(g_j, g_ij).
inline double skl_merge_bound(const GaussianKernel& gi,
                              const GaussianKernel& gj, double lambda_i,
                              double lambda_j) {
  const GaussianKernel merged = moment_merge(gi, gj, lambda_i, lambda_j);
  return lambda_i * skl_divergence(gi, merged) +
         lambda_j * skl_divergence(gj, merged);
}

/// Draws from N(mean, cov) through an eigenvalue square root, so positive
/// semidefinite covariances (including exactly zero) are handled.
class GaussianSampler {
 public:
  GaussianSampler(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov)
      : mean_(mean) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(
        0.5 * (cov + cov.transpose()));
    const double scale = std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff());
    if (eig.eigenvalues().minCoeff() < -1e-10 * scale) {
      throw ValidationError("GaussianSampler: covariance is not PSD");
    }
    root_ = eig.eigenvectors() *
            eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  }

  Eigen::VectorXd draw(RngStream& rng) const {
    Eigen::VectorXd z(mean_.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
    return mean_ + root_ * z;
  }

 private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd root_;
};

}  // namespace mopg
