#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <utility>

#include "mopg/errors.hpp"
#include "mopg/quaternion.hpp"

namespace mopg {

using Vector3d = Eigen::Vector3d;
using Vector4d = Eigen::Vector4d;
using Vector6d = Eigen::Matrix<double, 6, 1>;
using Vector7d = Eigen::Matrix<double, 7, 1>;
using Matrix6d = Eigen::Matrix<double, 6, 6>;
using Basis43 = Eigen::Matrix<double, 4, 3>;

/// Points whose angle to the tangent point is within this band of pi/2 count
/// as "at infinity": the inverse central projection is rejected there.
/// Density callers convert the rejection to a zero density.
inline constexpr double kEquatorTol = 1e-7;

/// Default central-difference steps. Pose composition runs through a longer
/// chain of roundings than a plain chart change, hence the larger step.
inline constexpr double kChartJacobianStep = 1e-6;
inline constexpr double kPoseJacobianStep = 1e-3;

/// Canonical tangent basis at q0: columns are the quaternion products
/// q0*e2, q0*e3, q0*e4. For unit q0 the columns are orthonormal, orthogonal
/// to q0, and continuous (and equivariant) in q0.
inline Basis43 canonical_basis(const Vector4d& q0) {
  if (std::abs(q0.norm() - 1.0) > kUnitNormTol) {
    throw ValidationError("canonical_basis: tangent point is not unit-norm");
  }
  const double c1 = q0(0), c2 = q0(1), c3 = q0(2), c4 = q0(3);
  Basis43 b;
  b << -c2, -c3, -c4,  //
      c1, -c4, c3,     //
      c4, c1, -c2,     //
      -c3, c2, c1;
  return b;
}

/// A tangent space of S3: unit point q0 and a 4x3 basis with orthonormal
/// columns orthogonal to q0.
struct TangentSpace {
  Vector4d point;
  Basis43 basis;

  static TangentSpace canonical(const Vector4d& q0) {
    TangentSpace ts;
    ts.point = q0;
    ts.basis = canonical_basis(q0);
    return ts;
  }

  static TangentSpace with_basis(const Vector4d& q0, const Basis43& b) {
    if (std::abs(q0.norm() - 1.0) > kUnitNormTol) {
      throw ValidationError("TangentSpace: point is not unit-norm");
    }
    Eigen::Matrix4d full;
    full.col(0) = q0;
    full.rightCols<3>() = b;
    const Eigen::Matrix4d defect =
        full.transpose() * full - Eigen::Matrix4d::Identity();
    if (defect.cwiseAbs().maxCoeff() > 1e-10) {
      throw ValidationError("TangentSpace: [q0|B] is not orthogonal");
    }
    return TangentSpace{q0, b};
  }
};

inline bool same_chart(const TangentSpace& a, const TangentSpace& b,
                       double tol = 1e-12) {
  return (a.point - b.point).cwiseAbs().maxCoeff() <= tol &&
         (a.basis - b.basis).cwiseAbs().maxCoeff() <= tol;
}

/// Central projection of a chart point onto S3 x R3. The sphere part is
/// (q0 + B*r)/||q0 + B*r||; the translation part passes through unchanged.
inline Vector7d tangent_to_sphere(const TangentSpace& ts, const Vector6d& x) {
  const Vector4d v = ts.point + ts.basis * x.head<3>();
  Vector7d out;
  out.head<4>() = v / v.norm();
  out.tail<3>() = x.tail<3>();
  return out;
}

/// Inverse central projection: r = B^T (q/<q,q0> - q0). Antipodal inputs map
/// to the same chart point. Throws ProjectionAtInfinity within the equator
/// band.
inline Vector6d sphere_to_tangent(const TangentSpace& ts, const Vector7d& q) {
  const double dot = q.head<4>().dot(ts.point);
  const double angle = std::acos(std::clamp(dot, -1.0, 1.0));
  if (std::abs(angle - 1.5707963267948966) <= kEquatorTol) {
    throw ProjectionAtInfinity("sphere_to_tangent: point at equator");
  }
  Vector6d out;
  out.head<3>() = ts.basis.transpose() * (q.head<4>() / dot - ts.point);
  out.tail<3>() = q.tail<3>();
  return out;
}

/// Double projection: central projection from src followed by the inverse
/// projection into dst.
inline Vector6d change_tangent_space(const TangentSpace& src, const Vector6d& x,
                                     const TangentSpace& dst) {
  return sphere_to_tangent(dst, tangent_to_sphere(src, x));
}

/// Lifts pose and motion chart vectors to dual quaternions, left-multiplies
/// the motion, and projects the composed pose into ts_out.
inline Vector6d pose_transformation_ts(const Vector6d& pose_x,
                                       const Vector6d& motion_x,
                                       const TangentSpace& ts_pose,
                                       const TangentSpace& ts_motion,
                                       const TangentSpace& ts_out) {
  const Vector7d p = tangent_to_sphere(ts_pose, pose_x);
  const Vector7d m = tangent_to_sphere(ts_motion, motion_x);
  const DualQuaternion dq_pose =
      pose_to_dq(Quaternion{p(0), p(1), p(2), p(3)},
                 Quaternion::imaginary(p.tail<3>()));
  const DualQuaternion dq_motion =
      pose_to_dq(Quaternion{m(0), m(1), m(2), m(3)},
                 Quaternion::imaginary(m.tail<3>()));
  const auto [qr, qt] = dq_to_pose(transform_pose(dq_pose, dq_motion));
  Vector7d out;
  out.head<4>() = qr.vec();
  out.tail<3>() = qt.imag();
  return sphere_to_tangent(ts_out, out);
}

/// Central-difference Jacobian, column j = (f(x+h e_j) - f(x-h e_j))/(2h).
/// Equator rejections during probing propagate as errors.
template <typename F>
Eigen::MatrixXd numeric_jacobian(F&& f, const Eigen::VectorXd& x,
                                 double step) {
  if (!(step > 0.0)) throw ValidationError("numeric_jacobian: step <= 0");
  const Eigen::Index n = x.size();
  Eigen::MatrixXd jac;
  for (Eigen::Index j = 0; j < n; ++j) {
    Eigen::VectorXd xp = x;
    Eigen::VectorXd xm = x;
    xp(j) += step;
    xm(j) -= step;
    const Eigen::VectorXd col = (f(xp) - f(xm)) / (2.0 * step);
    if (jac.size() == 0) jac.resize(col.size(), n);
    jac.col(j) = col;
  }
  return jac;
}

/// 6x6 Jacobian of the chart change src -> dst at x.
inline Matrix6d chart_change_jacobian(const TangentSpace& src,
                                      const TangentSpace& dst,
                                      const Vector6d& x,
                                      double step = kChartJacobianStep) {
  const auto f = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
    return change_tangent_space(src, Vector6d(v), dst);
  };
  return numeric_jacobian(f, x, step);
}

/// 6x12 Jacobian of pose_transformation_ts: the first six columns vary the
/// pose coordinates, the last six the motion coordinates.
inline Eigen::Matrix<double, 6, 12> pose_composition_jacobian(
    const TangentSpace& ts_pose, const TangentSpace& ts_motion,
    const TangentSpace& ts_out, const Vector6d& pose_x, const Vector6d& motion_x,
    double step = kPoseJacobianStep) {
  Eigen::Matrix<double, 12, 1> joint;
  joint << pose_x, motion_x;
  const auto f = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
    return pose_transformation_ts(v.head<6>(), v.tail<6>(), ts_pose, ts_motion,
                                  ts_out);
  };
  return numeric_jacobian(f, joint, step);
}

}  // namespace mopg
