#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "mopg/errors.hpp"
#include "mopg/gaussian.hpp"
#include "mopg/rng.hpp"
#include "mopg/tangent_space.hpp"

namespace mopg {

/// Default sample count for Monte Carlo normalization-mass estimates.
inline constexpr int kDefaultMassSamples = 2000;

/// Surface-measure correction of the central-projection parametrization:
/// 1/(1 + u^2 + v^2 + w^2)^2.
inline double correction_weight(const Vector3d& r) {
  const double den = 1.0 + r.squaredNorm();
  return 1.0 / (den * den);
}

/// Monte Carlo estimate of the normalization mass E[w(r)] with r the
/// rotation block of draws from N(mean, cov). Deterministic given the seed.
inline double estimate_mass(const Vector6d& mean, const Matrix6d& cov,
                            std::int64_t n, std::uint64_t seed) {
  if (n < 1) throw ValidationError("estimate_mass: n must be >= 1");
  GaussianSampler sampler(mean, cov);
  RngStream rng(seed);
  double sum = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const Eigen::VectorXd x = sampler.draw(rng);
    sum += correction_weight(x.head<3>());
  }
  return sum / static_cast<double>(n);
}

/// Projected-Gaussian base element: a 6-D Gaussian over a tangent chart of
/// S3 x R3 whose rotation block is pushed onto the sphere by central
/// projection. `mass` is the Monte Carlo normalization estimate E[w];
/// `compat` accumulates the fusion compatibility weight.
struct ProjectedGaussian {
  TangentSpace ts;
  Vector6d mean = Vector6d::Zero();
  Matrix6d cov = Matrix6d::Identity();
  double mass = 1.0;
  double compat = 1.0;

  ProjectedGaussian(TangentSpace space, const Vector6d& mu, const Matrix6d& sigma,
                    double mass_, double compat_ = 1.0)
      : ts(std::move(space)), mean(mu), mass(mass_), compat(compat_) {
    if (!mu.allFinite() || !sigma.allFinite()) {
      throw ValidationError("ProjectedGaussian: non-finite parameters");
    }
    if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-10) {
      throw ValidationError("ProjectedGaussian: covariance not symmetric");
    }
    cov = 0.5 * (sigma + sigma.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix6d> eig(cov);
    const double scale = std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff());
    if (eig.eigenvalues().minCoeff() < -1e-10 * scale) {
      throw ValidationError("ProjectedGaussian: covariance is not PSD");
    }
    if (!(mass > 0.0) || mass > 1.0 + 1e-12) {
      throw ValidationError("ProjectedGaussian: mass must lie in (0, 1]");
    }
    if (!(compat > 0.0) || compat > 1.0 + 1e-12) {
      throw ValidationError("ProjectedGaussian: compat must lie in (0, 1]");
    }
  }
};

inline double estimate_mass(const ProjectedGaussian& pg, std::int64_t n,
                            std::uint64_t seed) {
  return estimate_mass(pg.mean, pg.cov, n, seed);
}

/// Builds an element and estimates its mass from (n, seed).
inline ProjectedGaussian make_projected_gaussian(
    TangentSpace ts, const Vector6d& mean, const Matrix6d& cov,
    std::int64_t n = kDefaultMassSamples, std::uint64_t seed = 0) {
  const double mass = estimate_mass(mean, cov, n, seed);
  return ProjectedGaussian(std::move(ts), mean, cov, mass);
}

/// Precomputed density evaluation state for one element; shared by the
/// public density function and the EM E-step.
class DensityEvaluator {
 public:
  explicit DensityEvaluator(const ProjectedGaussian& pg)
      : ts_(pg.ts), mean_(pg.mean), llt_(pg.cov), mass_(pg.mass) {
    if (llt_.info() != Eigen::Success) {
      throw NumericError("density: covariance not positive definite");
    }
    log_norm_ = -3.0 * std::log(kTwoPi);
    for (int i = 0; i < 6; ++i) log_norm_ -= std::log(llt_.matrixL()(i, i));
  }

  /// Normalized density at a 7-vector on S3 x R3; zero inside the equator
  /// band. The denominator 2*mass covers both hemispheres of the double
  /// cover, so the density integrates to 1 over all of S3 x R3.
  double operator()(const Vector7d& q) const {
    Vector6d x;
    try {
      x = sphere_to_tangent(ts_, q);
    } catch (const ProjectionAtInfinity&) {
      return 0.0;
    }
    const Vector6d diff = x - mean_;
    const double quad = llt_.matrixL().solve(diff).squaredNorm();
    return std::exp(log_norm_ - 0.5 * quad) / (2.0 * mass_);
  }

 private:
  TangentSpace ts_;
  Vector6d mean_;
  Eigen::LLT<Matrix6d> llt_;
  double mass_;
  double log_norm_ = 0.0;
};

inline double density(const ProjectedGaussian& pg, const Vector7d& q) {
  if (std::abs(q.head<4>().norm() - 1.0) > kUnitNormTol) {
    throw ValidationError("density: sphere part is not unit-norm");
  }
  return DensityEvaluator(pg)(q);
}

/// Draws n samples: chart draws from N(mean, cov) pushed through the central
/// projection. Deterministic given the seed.
inline std::vector<Vector7d> sample(const ProjectedGaussian& pg, std::int64_t n,
                                    std::uint64_t seed) {
  if (n < 0) throw ValidationError("sample: n must be >= 0");
  GaussianSampler sampler(pg.mean, pg.cov);
  RngStream rng(seed);
  std::vector<Vector7d> out;
  out.reserve(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    out.push_back(tangent_to_sphere(pg.ts, sampler.draw(rng)));
  }
  return out;
}

/// exp(-1/2 (mu1-mu2)^T (S1+S2)^-1 (mu1-mu2)) for two elements that already
/// share a tangent chart.
inline double mahalanobis_weight(const ProjectedGaussian& a,
                                 const ProjectedGaussian& b) {
  if (!same_chart(a.ts, b.ts, 1e-9)) {
    throw ValidationError("mahalanobis_weight: elements on different charts");
  }
  const Matrix6d sum = a.cov + b.cov;
  Eigen::LLT<Matrix6d> llt(sum);
  if (llt.info() != Eigen::Success) {
    throw NumericError("mahalanobis_weight: singular covariance sum");
  }
  const Vector6d diff = a.mean - b.mean;
  return std::exp(-0.5 * diff.dot(llt.solve(diff)));
}

/// Re-expresses chart moments in another chart: the mean through the double
/// projection, the covariance through the numeric Jacobian, followed by the
/// SPD repair. Identity when the charts coincide.
inline std::pair<Vector6d, Matrix6d> reexpress_moments(
    const TangentSpace& src, const Vector6d& mean, const Matrix6d& cov,
    const TangentSpace& dst, double step = kChartJacobianStep) {
  if (same_chart(src, dst)) return {mean, cov};
  const Vector6d mean_new = change_tangent_space(src, mean, dst);
  const Matrix6d jac = chart_change_jacobian(src, dst, mean, step);
  const Matrix6d cov_new = repair_spd(jac * cov * jac.transpose());
  return {mean_new, cov_new};
}

/// Moves an element to another chart, re-estimating its mass there.
inline ProjectedGaussian change_chart(const ProjectedGaussian& pg,
                                      const TangentSpace& dst,
                                      std::int64_t mass_samples = kDefaultMassSamples,
                                      std::uint64_t seed = 0) {
  if (same_chart(pg.ts, dst)) return pg;
  const auto [mean_new, cov_new] = reexpress_moments(pg.ts, pg.mean, pg.cov, dst);
  const double mass = estimate_mass(mean_new, cov_new, mass_samples, seed);
  return ProjectedGaussian(dst, mean_new, cov_new, mass, pg.compat);
}

/// Midpoint chart between two tangent points, the second sign-aligned onto
/// the hemisphere of the first.
inline TangentSpace midpoint_chart(const Vector4d& p1, const Vector4d& p2) {
  const Vector4d q2 = (p1.dot(p2) < 0.0) ? Vector4d(-p2) : p2;
  const Vector4d sum = p1 + q2;
  const double n = sum.norm();
  if (n < 1e-9) {
    throw ValidationError("midpoint_chart: tangent points are antipodal");
  }
  return TangentSpace::canonical(sum / n);
}

namespace detail {

/// Recenters the chart to the projected rotation mean and re-expresses the
/// moments there.
inline void recenter_to_mean(TangentSpace& ts, Vector6d& mean, Matrix6d& cov) {
  const Vector7d projected = tangent_to_sphere(ts, mean);
  const TangentSpace centered = TangentSpace::canonical(projected.head<4>());
  if (same_chart(ts, centered)) return;
  const auto [m, c] = reexpress_moments(ts, mean, cov, centered);
  ts = centered;
  mean = m;
  cov = c;
}

}  // namespace detail

/// Bayesian fusion of two base elements on the midpoint chart:
///   cov = S1 (S1+S2)^-1 S2,   mean = S2 (S1+S2)^-1 mu1 + S1 (S1+S2)^-1 mu2.
/// The result's compat is the Mahalanobis weight of the re-expressed pair.
/// With `recenter`, the chart moves to the projected fused rotation mean.
inline ProjectedGaussian fuse(const ProjectedGaussian& a,
                              const ProjectedGaussian& b, bool recenter = true,
                              std::int64_t mass_samples = kDefaultMassSamples,
                              std::uint64_t seed = 0) {
  TangentSpace mid = midpoint_chart(a.ts.point, b.ts.point);
  auto [mu1, s1] = reexpress_moments(a.ts, a.mean, a.cov, mid);
  auto [mu2, s2] = reexpress_moments(b.ts, b.mean, b.cov, mid);
  const Matrix6d sum = s1 + s2;
  Eigen::LLT<Matrix6d> llt(sum);
  if (llt.info() != Eigen::Success) {
    throw NumericError("fuse: singular covariance sum");
  }
  const Matrix6d fused_cov_raw = s1 * llt.solve(s2);
  Matrix6d fused_cov = 0.5 * (fused_cov_raw + fused_cov_raw.transpose());
  Vector6d fused_mean = s2 * llt.solve(mu1) + s1 * llt.solve(mu2);
  const Vector6d diff = mu1 - mu2;
  const double delta = std::exp(-0.5 * diff.dot(llt.solve(diff)));
  if (recenter) detail::recenter_to_mean(mid, fused_mean, fused_cov);
  const double mass = estimate_mass(fused_mean, fused_cov, mass_samples, seed);
  return ProjectedGaussian(mid, fused_mean, fused_cov, mass,
                           std::max(delta, 1e-300));
}

/// Moment-preserving merge of two weighted base elements on the midpoint
/// chart. The merged mixture weight is lambda1 + lambda2 (handled by the
/// mixture layer).
inline ProjectedGaussian merge(const ProjectedGaussian& a,
                               const ProjectedGaussian& b, double lambda1,
                               double lambda2, bool recenter = false,
                               std::int64_t mass_samples = kDefaultMassSamples,
                               std::uint64_t seed = 0) {
  if (!(lambda1 > 0.0) || !(lambda2 > 0.0)) {
    throw ValidationError("merge: weights must be positive");
  }
  TangentSpace mid = midpoint_chart(a.ts.point, b.ts.point);
  auto [mu1, s1] = reexpress_moments(a.ts, a.mean, a.cov, mid);
  auto [mu2, s2] = reexpress_moments(b.ts, b.mean, b.cov, mid);
  const double w1 = lambda1 / (lambda1 + lambda2);
  const double w2 = lambda2 / (lambda1 + lambda2);
  const Vector6d diff = mu1 - mu2;
  Vector6d merged_mean = w1 * mu1 + w2 * mu2;
  Matrix6d merged_cov =
      w1 * s1 + w2 * s2 + (w1 * w2) * (diff * diff.transpose());
  if (recenter) detail::recenter_to_mean(mid, merged_mean, merged_cov);
  const double mass = estimate_mass(merged_mean, merged_cov, mass_samples, seed);
  return ProjectedGaussian(mid, merged_mean, merged_cov, mass);
}

/// Uncertainty-propagating composition: the means are lifted to dual
/// quaternions and composed (motion on the left); the covariance is pushed
/// through the 6x12 central-difference Jacobian of the composition map.
inline ProjectedGaussian compose(const ProjectedGaussian& pose,
                                 const ProjectedGaussian& motion,
                                 std::int64_t mass_samples = kDefaultMassSamples,
                                 std::uint64_t seed = 0,
                                 double step = kPoseJacobianStep) {
  const Vector7d p = tangent_to_sphere(pose.ts, pose.mean);
  const Vector7d m = tangent_to_sphere(motion.ts, motion.mean);
  const DualQuaternion dq_pose = pose_to_dq(
      Quaternion{p(0), p(1), p(2), p(3)}, Quaternion::imaginary(p.tail<3>()));
  const DualQuaternion dq_motion = pose_to_dq(
      Quaternion{m(0), m(1), m(2), m(3)}, Quaternion::imaginary(m.tail<3>()));
  const auto [qr, qt] = dq_to_pose(transform_pose(dq_pose, dq_motion));
  const TangentSpace ts_out = TangentSpace::canonical(normalized(qr).vec());
  Vector7d composed;
  composed.head<4>() = normalized(qr).vec();
  composed.tail<3>() = qt.imag();
  const Vector6d mean_out = sphere_to_tangent(ts_out, composed);
  const Eigen::Matrix<double, 6, 12> jac = pose_composition_jacobian(
      pose.ts, motion.ts, ts_out, pose.mean, motion.mean, step);
  Eigen::Matrix<double, 12, 12> joint = Eigen::Matrix<double, 12, 12>::Zero();
  joint.topLeftCorner<6, 6>() = pose.cov;
  joint.bottomRightCorner<6, 6>() = motion.cov;
  const Matrix6d cov_out = repair_spd(jac * joint * jac.transpose());
  const double mass = estimate_mass(mean_out, cov_out, mass_samples, seed);
  return ProjectedGaussian(ts_out, mean_out, cov_out, mass);
}

/// B_s(i,j) for two weighted elements sharing a chart.
inline double skl_merge_bound(const ProjectedGaussian& a,
                              const ProjectedGaussian& b, double lambda1,
                              double lambda2) {
  if (!same_chart(a.ts, b.ts, 1e-9)) {
    throw ValidationError("skl_merge_bound: elements on different charts");
  }
  return skl_merge_bound(GaussianKernel(a.mean, a.cov),
                         GaussianKernel(b.mean, b.cov), lambda1, lambda2);
}

}  // namespace mopg
