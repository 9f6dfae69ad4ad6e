#include "lumenreg/errors.hpp"
#include "lumenreg/transform.hpp"

#include <gtest/gtest.h>

#include <Eigen/Geometry>

#include <cmath>
#include <random>

namespace lumenreg {
namespace {

constexpr double kPi = 3.14159265358979323846;

TransformParams random_params(std::mt19937_64& rng, double beta_limit = 1.4) {
  std::uniform_real_distribution<double> ang(-kPi, kPi), beta(-beta_limit, beta_limit), t(-100.0, 100.0);
  return {ang(rng), beta(rng), ang(rng), t(rng), t(rng), t(rng)};
}

TEST(Transform, EulerMatchesAxisAngleComposition) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 200; ++i) {
    const auto p = random_params(rng);
    const Eigen::Matrix3d expected = (Eigen::AngleAxisd(p.gamma, Eigen::Vector3d::UnitZ()) *
                                      Eigen::AngleAxisd(p.beta, Eigen::Vector3d::UnitY()) *
                                      Eigen::AngleAxisd(p.alpha, Eigen::Vector3d::UnitX()))
                                         .toRotationMatrix();
    EXPECT_LT((euler_to_rotation(p.alpha, p.beta, p.gamma) - expected).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(Transform, ParamsRoundTrip) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 1000; ++i) {
    const auto p = random_params(rng);
    const auto q = transform_to_params(params_to_transform(p));
    const Eigen::Matrix<double, 6, 1> d = p.to_vector() - q.to_vector();
    EXPECT_LT(d.head<3>().cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT(d.tail<3>().cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Transform, GimbalLockIsReported) {
  const auto t = params_to_transform({0.3, kPi / 2, -0.2, 1, 2, 3});
  EXPECT_THROW(transform_to_params(t), DegenerateDecomposition);
}

TEST(Transform, NonFiniteParamsRejected) {
  EXPECT_THROW(params_to_transform({NAN, 0, 0, 0, 0, 0}), InvalidArgument);
  EXPECT_THROW(params_to_transform({0, 0, 0, 0, INFINITY, 0}), InvalidArgument);
}

TEST(Transform, InverseAndComposition) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 100; ++i) {
    const auto a = params_to_transform(random_params(rng));
    const auto b = params_to_transform(random_params(rng));
    const Eigen::Matrix4d id = (a * a.inverse()).matrix();
    EXPECT_LT((id - Eigen::Matrix4d::Identity()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT(((a * b).matrix() - a.matrix() * b.matrix()).cwiseAbs().maxCoeff(), 1e-12);
    const Eigen::Vector3d p(1.5, -2.0, 7.0);
    EXPECT_LT(((a * b).apply_point(p) - a.apply_point(b.apply_point(p))).norm(), 1e-11);
  }
}

TEST(Transform, CompositionKeepsExactLastRow) {
  std::mt19937_64 rng(8);
  HomogeneousTransform acc;
  for (int i = 0; i < 50; ++i) acc = acc * params_to_transform(random_params(rng));
  const Eigen::RowVector4d last = acc.matrix().row(3);
  EXPECT_EQ(last, Eigen::RowVector4d(0, 0, 0, 1));
}

TEST(Transform, FromMatrixValidates) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m(0, 1) = 1e-3;
  EXPECT_THROW(HomogeneousTransform::from_matrix(m), InvalidArgument);
  m = Eigen::Matrix4d::Identity();
  m(3, 0) = 0.5;
  EXPECT_THROW(HomogeneousTransform::from_matrix(m), InvalidArgument);
  m = Eigen::Matrix4d::Identity();
  m(2, 2) = -1.0;  // reflection
  EXPECT_THROW(HomogeneousTransform::from_matrix(m), InvalidArgument);
}

TEST(Transform, RowMajorRoundTrip) {
  const auto t = params_to_transform({0.1, -0.2, 0.3, 4, 5, 6});
  const auto back = HomogeneousTransform::from_row_major(t.row_major());
  EXPECT_EQ(back.matrix(), t.matrix());
  EXPECT_EQ(t.row_major()[3], 4.0);
  EXPECT_EQ(t.row_major()[15], 1.0);
}

TEST(Transform, RotationAngleMatchesAxisAngle) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> ang(0.0, kPi), c(-1.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    const double theta = ang(rng);
    const Eigen::Vector3d axis = Eigen::Vector3d(c(rng), c(rng), c(rng)).normalized();
    EXPECT_NEAR(rotation_angle(Eigen::AngleAxisd(theta, axis).toRotationMatrix()), theta, 1e-7);
  }
  EXPECT_EQ(rotation_angle(Eigen::Matrix3d::Identity()), 0.0);
}

TEST(Transform, OrthonormalizeProjectsOntoRotations) {
  Eigen::Matrix3d r = euler_to_rotation(0.2, 0.1, -0.4);
  r(0, 0) += 1e-4;
  r(1, 2) -= 2e-4;
  const Eigen::Matrix3d q = orthonormalize(r);
  EXPECT_LT((q.transpose() * q - Eigen::Matrix3d::Identity()).norm(), 1e-14);
  EXPECT_NEAR(q.determinant(), 1.0, 1e-14);
  EXPECT_LT((q - r).norm(), 1e-3);
}

}  // namespace
}  // namespace lumenreg
