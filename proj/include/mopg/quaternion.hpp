#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "mopg/errors.hpp"

namespace mopg {

/// Tolerance for treating a quaternion as unit-norm. Violations are errors
/// rather than silent renormalizations so drift is caught early in composed
/// pipelines.
inline constexpr double kUnitNormTol = 1e-9;

/// Quaternion a + b*i + c*j + d*k.
struct Quaternion {
  double a = 1.0, b = 0.0, c = 0.0, d = 0.0;

  Quaternion() = default;
  Quaternion(double a_, double b_, double c_, double d_)
      : a(a_), b(b_), c(c_), d(d_) {}

  static Quaternion identity() { return {1.0, 0.0, 0.0, 0.0}; }
  static Quaternion imaginary(const Eigen::Vector3d& v) {
    return {0.0, v.x(), v.y(), v.z()};
  }

  Eigen::Vector4d vec() const { return {a, b, c, d}; }
  Eigen::Vector3d imag() const { return {b, c, d}; }
};

inline Quaternion operator+(const Quaternion& p, const Quaternion& q) {
  return {p.a + q.a, p.b + q.b, p.c + q.c, p.d + q.d};
}

inline Quaternion operator-(const Quaternion& q) {
  return {-q.a, -q.b, -q.c, -q.d};
}

inline Quaternion operator*(double s, const Quaternion& q) {
  return {s * q.a, s * q.b, s * q.c, s * q.d};
}

/// Quaternionic product from the imaginary-unit relations.
inline Quaternion operator*(const Quaternion& p, const Quaternion& q) {
  return {p.a * q.a - p.b * q.b - p.c * q.c - p.d * q.d,
          p.a * q.b + p.b * q.a + p.c * q.d - p.d * q.c,
          p.a * q.c - p.b * q.d + p.c * q.a + p.d * q.b,
          p.a * q.d + p.b * q.c - p.c * q.b + p.d * q.a};
}

inline Quaternion conj(const Quaternion& q) {
  return {q.a, -q.b, -q.c, -q.d};
}

inline double norm2(const Quaternion& q) {
  return q.a * q.a + q.b * q.b + q.c * q.c + q.d * q.d;
}

inline double norm(const Quaternion& q) { return std::sqrt(norm2(q)); }

inline bool is_unit(const Quaternion& q, double tol = kUnitNormTol) {
  return std::abs(norm(q) - 1.0) <= tol;
}

inline Quaternion inverse(const Quaternion& q) {
  const double n2 = norm2(q);
  if (n2 == 0.0) throw ValidationError("inverse of zero quaternion");
  return (1.0 / n2) * conj(q);
}

inline Quaternion normalized(const Quaternion& q) {
  const double n = norm(q);
  if (n == 0.0) throw ValidationError("cannot normalize zero quaternion");
  return (1.0 / n) * q;
}

/// Flips the sign so the first component larger than 1e-12 in magnitude is
/// positive. Emitted unit quaternions use this convention so file round
/// trips are stable despite the double cover.
inline Quaternion canonical_sign(const Quaternion& q) {
  for (double x : {q.a, q.b, q.c, q.d}) {
    if (x > 1e-12) return q;
    if (x < -1e-12) return -q;
  }
  return q;
}

/// q = [cos(theta/2), axis*sin(theta/2)], axis normalized internally.
inline Quaternion from_axis_angle(double theta, const Eigen::Vector3d& axis) {
  const double n = axis.norm();
  if (n == 0.0) {
    if (theta == 0.0) return Quaternion::identity();
    throw ValidationError("from_axis_angle: zero axis with nonzero angle");
  }
  const double s = std::sin(theta / 2.0) / n;
  return {std::cos(theta / 2.0), s * axis.x(), s * axis.y(), s * axis.z()};
}

/// Rotates the imaginary quaternion p by the unit quaternion q: q*p*conj(q).
inline Quaternion rotate_point(const Quaternion& q, const Quaternion& p) {
  if (!is_unit(q)) throw ValidationError("rotate_point: q is not unit-norm");
  if (std::abs(p.a) > kUnitNormTol) {
    throw ValidationError("rotate_point: p is not an imaginary quaternion");
  }
  return q * p * conj(q);
}

inline Eigen::Matrix3d to_rotation_matrix(const Quaternion& q) {
  const double a = q.a, b = q.b, c = q.c, d = q.d;
  Eigen::Matrix3d r;
  r << 1 - 2 * (c * c + d * d), 2 * (b * c - a * d), 2 * (b * d + a * c),
      2 * (b * c + a * d), 1 - 2 * (b * b + d * d), 2 * (c * d - a * b),
      2 * (b * d - a * c), 2 * (c * d + a * b), 1 - 2 * (b * b + c * c);
  return r;
}

/// Branch-stable quaternion extraction from a rotation matrix: the largest
/// of a^2, b^2, c^2, d^2 is computed first (threshold 0.25), the remaining
/// components follow from off-diagonal sums. The result carries the
/// canonical sign.
inline Quaternion rotmat_to_quat(const Eigen::Matrix3d& r) {
  const Eigen::Matrix3d defect =
      r * r.transpose() - Eigen::Matrix3d::Identity();
  if (defect.cwiseAbs().maxCoeff() > 1e-4 ||
      std::abs(r.determinant() - 1.0) > 1e-4) {
    throw ValidationError("rotmat_to_quat: input is not a rotation matrix");
  }
  constexpr double kMin = 0.25;
  double a, b, c, d;
  const double a2 = (1.0 + r(0, 0) + r(1, 1) + r(2, 2)) / 4.0;
  if (a2 >= kMin) {
    a = std::sqrt(a2);
    b = 0.25 * (r(2, 1) - r(1, 2)) / a;
    c = 0.25 * (r(0, 2) - r(2, 0)) / a;
    d = 0.25 * (r(1, 0) - r(0, 1)) / a;
  } else {
    const double b2 = a2 - 0.5 * (r(1, 1) + r(2, 2));
    if (b2 >= kMin) {
      b = std::sqrt(b2);
      a = 0.25 * (r(2, 1) - r(1, 2)) / b;
      c = 0.25 * (r(0, 1) + r(1, 0)) / b;
      d = 0.25 * (r(0, 2) + r(2, 0)) / b;
    } else {
      const double c2 = a2 - 0.5 * (r(0, 0) + r(2, 2));
      if (c2 >= kMin) {
        c = std::sqrt(c2);
        a = 0.25 * (r(0, 2) - r(2, 0)) / c;
        b = 0.25 * (r(0, 1) + r(1, 0)) / c;
        d = 0.25 * (r(1, 2) + r(2, 1)) / c;
      } else {
        const double d2 = a2 - 0.5 * (r(0, 0) + r(1, 1));
        d = std::sqrt(d2);
        a = 0.25 * (r(1, 0) - r(0, 1)) / d;
        b = 0.25 * (r(0, 2) + r(2, 0)) / d;
        c = 0.25 * (r(1, 2) + r(2, 1)) / d;
      }
    }
  }
  return canonical_sign(normalized(Quaternion{a, b, c, d}));
}

/// Dual quaternion real + epsilon*dual with epsilon^2 = 0. A pose with unit
/// rotation q_r and imaginary translation q_t has dual part 0.5*q_t*q_r.
struct DualQuaternion {
  Quaternion real;
  Quaternion dual{0.0, 0.0, 0.0, 0.0};

  static DualQuaternion identity() {
    return {Quaternion::identity(), {0.0, 0.0, 0.0, 0.0}};
  }
};

inline DualQuaternion operator*(const DualQuaternion& p,
                                const DualQuaternion& q) {
  return {p.real * q.real, p.real * q.dual + p.dual * q.real};
}

inline DualQuaternion dq_conj_quaternion(const DualQuaternion& dq) {
  return {conj(dq.real), conj(dq.dual)};
}

inline DualQuaternion dq_conj_dual(const DualQuaternion& dq) {
  return {dq.real, -dq.dual};
}

inline DualQuaternion dq_conj_total(const DualQuaternion& dq) {
  return {conj(dq.real), -conj(dq.dual)};
}

/// dq^-1 = r^-1 - eps * r^-1 * d * r^-1; requires an invertible real part.
inline DualQuaternion dq_inverse(const DualQuaternion& dq) {
  if (norm2(dq.real) == 0.0) {
    throw ValidationError("dq_inverse: zero real part");
  }
  const Quaternion ri = inverse(dq.real);
  return {ri, -(ri * dq.dual * ri)};
}

/// Builds the pose dual quaternion q_r + eps*0.5*q_t*q_r.
inline DualQuaternion pose_to_dq(const Quaternion& q_r,
                                 const Quaternion& q_t) {
  if (!is_unit(q_r)) throw ValidationError("pose_to_dq: rotation not unit");
  if (std::abs(q_t.a) > kUnitNormTol) {
    throw ValidationError("pose_to_dq: translation not imaginary");
  }
  return {q_r, 0.5 * (q_t * q_r)};
}

/// Recovers (q_r, q_t) with q_t = 2 * dual * conj(real).
inline std::pair<Quaternion, Quaternion> dq_to_pose(const DualQuaternion& dq) {
  return {dq.real, 2.0 * (dq.dual * conj(dq.real))};
}

/// Applies a rigid motion to a pose: motion ** pose.
inline DualQuaternion transform_pose(const DualQuaternion& pose,
                                     const DualQuaternion& motion) {
  return motion * pose;
}

/// Rotation-matrix-plus-translation form of a pose dual quaternion.
inline std::pair<Eigen::Matrix3d, Eigen::Vector3d> dq_to_matrix(
    const DualQuaternion& dq) {
  const auto [qr, qt] = dq_to_pose(dq);
  return {to_rotation_matrix(qr), qt.imag()};
}

}  // namespace mopg
