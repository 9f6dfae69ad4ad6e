#include "lumenreg/transform.hpp"

#include "lumenreg/errors.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

namespace lumenreg {

bool TransformParams::finite() const {
  const auto a = to_array();
  return std::all_of(a.begin(), a.end(), [](double x) { return std::isfinite(x); });
}

HomogeneousTransform HomogeneousTransform::from_matrix(const Eigen::Matrix4d& m, double tol) {
  if (!m.allFinite()) throw InvalidArgument("transform has non-finite entries");
  if (m(3, 0) != 0.0 || m(3, 1) != 0.0 || m(3, 2) != 0.0 || m(3, 3) != 1.0)
    throw InvalidArgument("transform last row must be exactly [0 0 0 1]");
  const Eigen::Matrix3d r = m.topLeftCorner<3, 3>();
  const double ortho = (r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  if (ortho > tol) throw InvalidArgument("rotation block is not orthonormal");
  if (std::abs(r.determinant() - 1.0) > tol)
    throw InvalidArgument("rotation block determinant is not +1");
  return HomogeneousTransform(m);
}

HomogeneousTransform HomogeneousTransform::from_row_major(const std::array<double, 16>& v,
                                                          double tol) {
  Eigen::Matrix4d m;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) m(r, c) = v[static_cast<std::size_t>(r * 4 + c)];
  return from_matrix(m, tol);
}

HomogeneousTransform HomogeneousTransform::from_rt(const Eigen::Matrix3d& r,
                                                   const Eigen::Vector3d& t) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = r;
  m.topRightCorner<3, 1>() = t;
  return from_matrix(m);
}

HomogeneousTransform HomogeneousTransform::translation(const Eigen::Vector3d& t) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topRightCorner<3, 1>() = t;
  return HomogeneousTransform(m);
}

std::array<double, 16> HomogeneousTransform::row_major() const {
  std::array<double, 16> v{};
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) v[static_cast<std::size_t>(r * 4 + c)] = m_(r, c);
  return v;
}

HomogeneousTransform HomogeneousTransform::inverse() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  const Eigen::Matrix3d rt = rotation().transpose();
  m.topLeftCorner<3, 3>() = rt;
  m.topRightCorner<3, 1>() = -rt * translation();
  return HomogeneousTransform(m);
}

HomogeneousTransform operator*(const HomogeneousTransform& a, const HomogeneousTransform& b) {
  Eigen::Matrix4d m = a.m_ * b.m_;
  m.row(3) << 0.0, 0.0, 0.0, 1.0;
  return HomogeneousTransform(m);
}

Eigen::Matrix3d euler_to_rotation(double alpha, double beta, double gamma) {
  const double ca = std::cos(alpha), sa = std::sin(alpha);
  const double cb = std::cos(beta), sb = std::sin(beta);
  const double cg = std::cos(gamma), sg = std::sin(gamma);
  Eigen::Matrix3d r;
  r << cg * cb, cg * sb * sa - sg * ca, cg * sb * ca + sg * sa,
       sg * cb, sg * sb * sa + cg * ca, sg * sb * ca - cg * sa,
       -sb,     cb * sa,                cb * ca;
  return r;
}

HomogeneousTransform params_to_transform(const TransformParams& p) {
  if (!p.finite()) throw InvalidArgument("transform parameters must be finite");
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = euler_to_rotation(p.alpha, p.beta, p.gamma);
  m.topRightCorner<3, 1>() = Eigen::Vector3d(p.tx, p.ty, p.tz);
  return HomogeneousTransform::from_matrix(m, 1e-12);
}

TransformParams transform_to_params(const HomogeneousTransform& t) {
  const Eigen::Matrix3d r = t.rotation();
  const double sb = std::clamp(-r(2, 0), -1.0, 1.0);
  const double cb = std::hypot(r(0, 0), r(1, 0));
  if (cb <= 1e-9) throw DegenerateDecomposition("Euler decomposition at gimbal lock (|cos beta| <= 1e-9)");
  TransformParams p;
  p.beta = std::atan2(sb, cb);
  p.alpha = std::atan2(r(2, 1), r(2, 2));
  p.gamma = std::atan2(r(1, 0), r(0, 0));
  const Eigen::Vector3d tr = t.translation();
  p.tx = tr.x();
  p.ty = tr.y();
  p.tz = tr.z();
  return p;
}

double rotation_angle(const Eigen::Matrix3d& r) {
  return Eigen::AngleAxisd(r).angle();
}

Eigen::Matrix3d orthonormalize(const Eigen::Matrix3d& r) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  d(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0 ? -1.0 : 1.0;
  return svd.matrixU() * d * svd.matrixV().transpose();
}

}  // namespace lumenreg
