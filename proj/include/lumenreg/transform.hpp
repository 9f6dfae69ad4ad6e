#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>

namespace lumenreg {

/// 6-DoF rigid parameters: Euler angles in radians, translation in millimeters.
///
/// Rotation convention is intrinsic Z-Y-X: the rotation is applied about z by
/// `gamma`, then about the new y by `beta`, then about the new x by `alpha`,
/// i.e. R = Rz(gamma) * Ry(beta) * Rx(alpha).
struct TransformParams {
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
  double tx = 0.0;
  double ty = 0.0;
  double tz = 0.0;

  static TransformParams from_array(const std::array<double, 6>& a) {
    return {a[0], a[1], a[2], a[3], a[4], a[5]};
  }
  static TransformParams from_vector(const Eigen::Matrix<double, 6, 1>& v) {
    return {v[0], v[1], v[2], v[3], v[4], v[5]};
  }
  std::array<double, 6> to_array() const { return {alpha, beta, gamma, tx, ty, tz}; }
  Eigen::Matrix<double, 6, 1> to_vector() const {
    Eigen::Matrix<double, 6, 1> v;
    v << alpha, beta, gamma, tx, ty, tz;
    return v;
  }
  bool finite() const;

  friend TransformParams operator+(const TransformParams& a, const TransformParams& b) {
    return {a.alpha + b.alpha, a.beta + b.beta, a.gamma + b.gamma,
            a.tx + b.tx,       a.ty + b.ty,     a.tz + b.tz};
  }
  bool operator==(const TransformParams&) const = default;
};

/// Rigid transform in homogeneous 4x4 form. The rotation block is orthonormal
/// with determinant +1 and the last row is exactly [0 0 0 1].
class HomogeneousTransform {
 public:
  HomogeneousTransform() : m_(Eigen::Matrix4d::Identity()) {}

  /// Validates orthonormality (1e-9) and the last row; throws InvalidArgument.
  static HomogeneousTransform from_matrix(const Eigen::Matrix4d& m, double tol = 1e-9);
  static HomogeneousTransform from_row_major(const std::array<double, 16>& v, double tol = 1e-9);
  static HomogeneousTransform from_rt(const Eigen::Matrix3d& r, const Eigen::Vector3d& t);
  static HomogeneousTransform translation(const Eigen::Vector3d& t);
  static HomogeneousTransform identity() { return {}; }

  const Eigen::Matrix4d& matrix() const { return m_; }
  Eigen::Matrix3d rotation() const { return m_.topLeftCorner<3, 3>(); }
  Eigen::Vector3d translation() const { return m_.topRightCorner<3, 1>(); }
  std::array<double, 16> row_major() const;

  HomogeneousTransform inverse() const;
  Eigen::Vector3d apply_point(const Eigen::Vector3d& p) const {
    return m_.topLeftCorner<3, 3>() * p + m_.topRightCorner<3, 1>();
  }
  Eigen::Vector3d apply_direction(const Eigen::Vector3d& d) const {
    return m_.topLeftCorner<3, 3>() * d;
  }

  friend HomogeneousTransform operator*(const HomogeneousTransform& a,
                                        const HomogeneousTransform& b);

 private:
  explicit HomogeneousTransform(const Eigen::Matrix4d& m) : m_(m) {}
  Eigen::Matrix4d m_;
};

Eigen::Matrix3d euler_to_rotation(double alpha, double beta, double gamma);

/// Throws InvalidArgument on non-finite input.
HomogeneousTransform params_to_transform(const TransformParams& p);

/// Inverse of params_to_transform. Throws DegenerateDecomposition when
/// |cos(beta)| <= 1e-9.
TransformParams transform_to_params(const HomogeneousTransform& t);

/// Geodesic angle of a rotation matrix, radians in [0, pi].
double rotation_angle(const Eigen::Matrix3d& r);

/// Projects a near-rotation onto SO(3) (SVD, determinant fixed to +1).
Eigen::Matrix3d orthonormalize(const Eigen::Matrix3d& r);

}  // namespace lumenreg
