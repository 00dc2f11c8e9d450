// Copyright 2026 The icpx Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Rigid-body geometry on SE(3): hat/vee operators, closed-form exponential
// and logarithm maps, and concentrated-Gaussian pose sampling.
//
// Tangent vectors are laid out rotation first, xi = [delta; rho], and every
// 6x6 covariance in the library follows the same ordering.

#ifndef ICPX_SE3_HPP
#define ICPX_SE3_HPP

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <numbers>
#include <random>

#include "icpx/errors.hpp"

namespace icpx {

template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;
template <typename Scalar>
using Matrix4 = Eigen::Matrix<Scalar, 4, 4>;

/// se(3) coordinates [delta; rho]: rotation (rad) then translation (m).
template <typename Scalar>
using Tangent = Eigen::Matrix<Scalar, 6, 1>;

/// Covariance over Tangent coordinates, same [delta; rho] ordering.
template <typename Scalar>
using PoseCovariance = Eigen::Matrix<Scalar, 6, 6>;

using Tangentd = Tangent<double>;
using PoseCovarianced = PoseCovariance<double>;

template <typename Derived>
auto rotation_part(const Eigen::MatrixBase<Derived>& xi) {
  return xi.template head<3>();
}

template <typename Derived>
auto translation_part(const Eigen::MatrixBase<Derived>& xi) {
  return xi.template tail<3>();
}

template <typename Scalar>
Tangent<Scalar> make_tangent(const Vector3<Scalar>& delta, const Vector3<Scalar>& rho) {
  Tangent<Scalar> xi;
  xi << delta, rho;
  return xi;
}

/// Skew-symmetric matrix with hat3(a) * b = a x b.
template <typename Derived>
Matrix3<typename Derived::Scalar> hat3(const Eigen::MatrixBase<Derived>& delta) {
  using Scalar = typename Derived::Scalar;
  Matrix3<Scalar> m;
  // clang-format off
  m << Scalar(0),  -delta(2),  delta(1),
       delta(2),   Scalar(0), -delta(0),
      -delta(1),   delta(0),   Scalar(0);
  // clang-format on
  return m;
}

template <typename Derived>
Vector3<typename Derived::Scalar> vee3(const Eigen::MatrixBase<Derived>& m) {
  return {m(2, 1), m(0, 2), m(1, 0)};
}

template <typename Derived>
Matrix4<typename Derived::Scalar> hat6(const Eigen::MatrixBase<Derived>& xi) {
  using Scalar = typename Derived::Scalar;
  Matrix4<Scalar> m = Matrix4<Scalar>::Zero();
  m.template topLeftCorner<3, 3>() = hat3(rotation_part(xi));
  m.template topRightCorner<3, 1>() = translation_part(xi);
  return m;
}

template <typename Derived>
Tangent<typename Derived::Scalar> vee6(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  return make_tangent<Scalar>(vee3(m.template topLeftCorner<3, 3>()),
                              m.template topRightCorner<3, 1>());
}

/// Element of SE(3) stored as a rotation matrix and a translation vector.
template <typename Scalar>
class RigidTransform {
 public:
  using Matrix3Type = Matrix3<Scalar>;
  using Vector3Type = Vector3<Scalar>;
  using Matrix4Type = Matrix4<Scalar>;

  RigidTransform() : rotation_(Matrix3Type::Identity()), translation_(Vector3Type::Zero()) {}
  RigidTransform(const Matrix3Type& rotation, const Vector3Type& translation)
      : rotation_(rotation), translation_(translation) {}

  static RigidTransform Identity() { return RigidTransform(); }

  static RigidTransform from_matrix(const Matrix4Type& m) {
    return RigidTransform(m.template topLeftCorner<3, 3>(), m.template topRightCorner<3, 1>());
  }

  static RigidTransform from_translation(const Vector3Type& t) {
    return RigidTransform(Matrix3Type::Identity(), t);
  }

  const Matrix3Type& rotation() const { return rotation_; }
  const Vector3Type& translation() const { return translation_; }

  Matrix4Type matrix() const {
    Matrix4Type m = Matrix4Type::Identity();
    m.template topLeftCorner<3, 3>() = rotation_;
    m.template topRightCorner<3, 1>() = translation_;
    return m;
  }

  RigidTransform inverse() const {
    Matrix3Type rt = rotation_.transpose();
    return RigidTransform(rt, -(rt * translation_));
  }

  RigidTransform operator*(const RigidTransform& other) const {
    return RigidTransform(rotation_ * other.rotation_, rotation_ * other.translation_ + translation_);
  }

  Vector3Type operator*(const Vector3Type& p) const { return rotation_ * p + translation_; }

  /// Orthonormality and unit determinant within `tol`.
  bool is_valid(Scalar tol = Scalar(1e-9)) const {
    if (!rotation_.allFinite() || !translation_.allFinite()) return false;
    Scalar ortho = (rotation_.transpose() * rotation_ - Matrix3Type::Identity()).norm();
    return ortho <= tol && std::abs(rotation_.determinant() - Scalar(1)) <= tol;
  }

  template <typename NewScalar>
  RigidTransform<NewScalar> cast() const {
    return RigidTransform<NewScalar>(rotation_.template cast<NewScalar>(),
                                     translation_.template cast<NewScalar>());
  }

 private:
  Matrix3Type rotation_;
  Vector3Type translation_;
};

using RigidTransformd = RigidTransform<double>;

template <typename Scalar>
RigidTransform<Scalar> compose(const RigidTransform<Scalar>& a, const RigidTransform<Scalar>& b) {
  return a * b;
}

template <typename Scalar>
RigidTransform<Scalar> inverse(const RigidTransform<Scalar>& a) {
  return a.inverse();
}

namespace detail {

// Below kSeriesAngle the exp/Jacobian coefficients are evaluated by Taylor
// series (truncation O(theta^6), under 1e-16 there); the closed forms lose
// digits to cancellation for small theta. so3_log switches at kSmallAngle,
// where theta / sin(theta) = 1 + theta^2 / 6 is still exact to 1e-17.
template <typename Scalar>
constexpr Scalar kSeriesAngle = Scalar(1e-2);
template <typename Scalar>
constexpr Scalar kSmallAngle = Scalar(1e-4);

// Coefficients of exp(hat(w)) = I + a*W + b*W^2 and of the left Jacobian
// V = I + b*W + c*W^2, with W = hat3(w) and theta = |w|.
template <typename Scalar>
struct So3Coefficients {
  Scalar a, b, c;
};

template <typename Scalar>
So3Coefficients<Scalar> so3_coefficients(Scalar theta) {
  Scalar t2 = theta * theta;
  if (theta < kSeriesAngle<Scalar>) {
    return {Scalar(1) - t2 / Scalar(6) + t2 * t2 / Scalar(120),
            Scalar(0.5) - t2 / Scalar(24) + t2 * t2 / Scalar(720),
            Scalar(1) / Scalar(6) - t2 / Scalar(120) + t2 * t2 / Scalar(5040)};
  }
  Scalar half_sin = std::sin(theta / Scalar(2));
  return {std::sin(theta) / theta, Scalar(2) * half_sin * half_sin / t2,
          (theta - std::sin(theta)) / (t2 * theta)};
}

// Rotation angle and axis*angle of a rotation matrix. Uses the antisymmetric
// part away from pi and the symmetric part near pi, where sin(theta) -> 0.
template <typename Scalar>
Vector3<Scalar> so3_log(const Matrix3<Scalar>& r, Scalar* angle) {
  Vector3<Scalar> axis_sin = vee3(r - r.transpose()) / Scalar(2);  // sin(theta) * axis
  Scalar s = axis_sin.norm();
  Scalar c = (r.trace() - Scalar(1)) / Scalar(2);
  Scalar theta = std::atan2(s, c);
  *angle = theta;
  if (theta < kSmallAngle<Scalar>) {
    // theta / sin(theta) ~ 1 + theta^2 / 6
    return (Scalar(1) + theta * theta / Scalar(6)) * axis_sin;
  }
  if (theta < Scalar(2.5)) return theta / s * axis_sin;

  // (R + R^T)/2 - cos(theta) I = (1 - cos(theta)) a a^T
  Matrix3<Scalar> aat = ((r + r.transpose()) / Scalar(2) - c * Matrix3<Scalar>::Identity()) /
                        (Scalar(1) - c);
  Eigen::Index k;
  aat.diagonal().maxCoeff(&k);
  Vector3<Scalar> axis = aat.col(k) / std::sqrt(aat(k, k));
  axis.normalize();
  if (axis.dot(axis_sin) < Scalar(0)) axis = -axis;
  return theta * axis;
}

}  // namespace detail

/// Rodrigues rotation for axis*angle `delta`.
template <typename Derived>
Matrix3<typename Derived::Scalar> exp_so3(const Eigen::MatrixBase<Derived>& delta) {
  using Scalar = typename Derived::Scalar;
  auto k = detail::so3_coefficients<Scalar>(delta.norm());
  Matrix3<Scalar> w = hat3(delta);
  return Matrix3<Scalar>::Identity() + k.a * w + k.b * w * w;
}

/// Left Jacobian V(delta) of SO(3); t = V(delta) * rho in exp_se3.
template <typename Derived>
Matrix3<typename Derived::Scalar> left_jacobian(const Eigen::MatrixBase<Derived>& delta) {
  using Scalar = typename Derived::Scalar;
  auto k = detail::so3_coefficients<Scalar>(delta.norm());
  Matrix3<Scalar> w = hat3(delta);
  return Matrix3<Scalar>::Identity() + k.b * w + k.c * w * w;
}

template <typename Derived>
Matrix3<typename Derived::Scalar> left_jacobian_inverse(const Eigen::MatrixBase<Derived>& delta) {
  using Scalar = typename Derived::Scalar;
  Scalar theta = delta.norm();
  Matrix3<Scalar> w = hat3(delta);
  Scalar d;
  Scalar t2 = theta * theta;
  if (theta < detail::kSeriesAngle<Scalar>) {
    d = Scalar(1) / Scalar(12) + t2 / Scalar(720) + t2 * t2 / Scalar(30240);
  } else {
    // theta sin(theta) / (2 (1 - cos(theta))) = (theta/2) cot(theta/2)
    Scalar half = theta / Scalar(2);
    d = (Scalar(1) - half * std::cos(half) / std::sin(half)) / t2;
  }
  return Matrix3<Scalar>::Identity() - Scalar(0.5) * w + d * w * w;
}

template <typename Derived>
RigidTransform<typename Derived::Scalar> exp_se3(const Eigen::MatrixBase<Derived>& xi) {
  using Scalar = typename Derived::Scalar;
  Vector3<Scalar> delta = rotation_part(xi);
  Vector3<Scalar> rho = translation_part(xi);
  auto k = detail::so3_coefficients<Scalar>(delta.norm());
  Matrix3<Scalar> w = hat3(delta);
  Matrix3<Scalar> w2 = w * w;
  Matrix3<Scalar> rotation = Matrix3<Scalar>::Identity() + k.a * w + k.b * w2;
  Matrix3<Scalar> v = Matrix3<Scalar>::Identity() + k.b * w + k.c * w2;
  return RigidTransform<Scalar>(rotation, v * rho);
}

/// Rotation angle of a transform, in [0, pi].
template <typename Scalar>
Scalar rotation_angle(const RigidTransform<Scalar>& t) {
  Scalar angle;
  detail::so3_log<Scalar>(t.rotation(), &angle);
  return angle;
}

/// Guard distance from pi inside which log_se3 refuses to answer.
template <typename Scalar>
constexpr Scalar kLogPiGuard = Scalar(1e-6);

/// Inverse of exp_se3. Throws AngleNearPi when the rotation angle is within
/// 1e-6 rad of pi, where the axis sign is ill-conditioned.
template <typename Scalar>
Tangent<Scalar> log_se3(const RigidTransform<Scalar>& t) {
  Scalar angle;
  Vector3<Scalar> delta = detail::so3_log<Scalar>(t.rotation(), &angle);
  if (std::numbers::pi_v<Scalar> - angle < kLogPiGuard<Scalar>) {
    throw AngleNearPi("log_se3: rotation angle within 1e-6 rad of pi");
  }
  return make_tangent<Scalar>(delta, left_jacobian_inverse(delta) * t.translation());
}

/// Symmetric within 1e-12 and all eigenvalues >= -1e-10.
template <typename Scalar>
bool is_valid_covariance(const PoseCovariance<Scalar>& cov) {
  if (!cov.allFinite()) return false;
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > Scalar(1e-12)) return false;
  Eigen::SelfAdjointEigenSolver<PoseCovariance<Scalar>> eig(cov, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff() >= Scalar(-1e-10);
}

/// Returns A with A * A^T = cov. Cholesky when cov is positive definite,
/// otherwise an eigendecomposition with negative eigenvalues clamped to zero.
template <typename Scalar>
PoseCovariance<Scalar> covariance_factor(const PoseCovariance<Scalar>& cov) {
  Eigen::LLT<PoseCovariance<Scalar>> llt(cov);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::SelfAdjointEigenSolver<PoseCovariance<Scalar>> eig(cov);
  Tangent<Scalar> root = eig.eigenvalues().cwiseMax(Scalar(0)).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal();
}

/// Draws xi ~ N(0, scale * cov) given a factor of cov, with six standard
/// normal draws taken from `rng` in coordinate order.
template <typename Scalar, typename Generator>
Tangent<Scalar> sample_tangent(const PoseCovariance<Scalar>& factor, Scalar scale,
                               Generator& rng) {
  std::normal_distribution<Scalar> normal(Scalar(0), Scalar(1));
  Tangent<Scalar> z;
  for (int i = 0; i < 6; ++i) z(i) = normal(rng);
  return std::sqrt(scale) * (factor * z);
}

/// Concentrated-Gaussian perturbation: base * exp(xi), xi ~ N(0, scale * cov).
template <typename Scalar, typename Generator>
RigidTransform<Scalar> sample_pose_perturbation(const RigidTransform<Scalar>& base,
                                                const PoseCovariance<Scalar>& cov, Scalar scale,
                                                Generator& rng) {
  require(scale > Scalar(0), "sample_pose_perturbation: scale must be positive");
  return base * exp_se3(sample_tangent(covariance_factor(cov), scale, rng));
}

/// Default initial-pose covariance diag(sr^2 I3, st^2 I3).
template <typename Scalar = double>
PoseCovariance<Scalar> diagonal_pose_covariance(Scalar sigma_rotation = Scalar(0.02),
                                                Scalar sigma_translation = Scalar(0.05)) {
  Tangent<Scalar> d;
  d << Vector3<Scalar>::Constant(sigma_rotation * sigma_rotation),
      Vector3<Scalar>::Constant(sigma_translation * sigma_translation);
  return d.asDiagonal();
}

}  // namespace icpx

#endif  // ICPX_SE3_HPP
