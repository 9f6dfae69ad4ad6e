#include "lumenreg/bvh.hpp"
#include "lumenreg/errors.hpp"
#include "lumenreg/mesh.hpp"
#include "lumenreg/synthetic.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

namespace lumenreg {
namespace {

std::shared_ptr<const TriangleMesh> share(TriangleMesh m) {
  return std::make_shared<const TriangleMesh>(std::move(m));
}

// Rays from random points in a box toward random directions.
void check_against_brute_force(const TriangleMesh& mesh, const HomogeneousTransform& model,
                               const Eigen::Vector3d& lo, const Eigen::Vector3d& hi, int rays,
                               std::uint64_t seed) {
  const AccelStructure accel(std::make_shared<const TriangleMesh>(mesh));
  ASSERT_TRUE(accel.validate());
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> n(0.0, 1.0);
  int hits = 0;
  for (int i = 0; i < rays; ++i) {
    const Eigen::Vector3d o = lo + (hi - lo).cwiseProduct(Eigen::Vector3d(u(rng), u(rng), u(rng)));
    const Eigen::Vector3d d = Eigen::Vector3d(n(rng), n(rng), n(rng)).normalized();
    const auto a = intersect(accel, model, o, d);
    const auto b = intersect_brute_force(mesh, model, o, d);
    ASSERT_EQ(a.has_value(), b.has_value()) << "ray " << i;
    if (!a) continue;
    ++hits;
    EXPECT_EQ(a->face, b->face) << "ray " << i;
    EXPECT_LE(std::abs(a->t - b->t), 1e-9 * std::max(1.0, b->t)) << "ray " << i;
    EXPECT_LT((a->position - (o + a->t * d)).norm(), 1e-9 * std::max(1.0, a->t));
  }
  EXPECT_GT(hits, rays / 10);
}

TEST(Bvh, MatchesBruteForceOnCube) {
  check_against_brute_force(shapes::unit_cube(), HomogeneousTransform{}, Eigen::Vector3d::Constant(-1.0),
                            Eigen::Vector3d::Constant(2.0), 5000, 1);
}

TEST(Bvh, MatchesBruteForceOnSpheresUnderModelTransform) {
  const auto mesh = shapes::merge({shapes::icosphere({0, 0, 0}, 5.0, 3), shapes::icosphere({7, 1, 2}, 3.0, 2),
                                   shapes::plane_z(-6.0, 20.0)});
  const auto model = params_to_transform({0.3, -0.4, 1.1, 2.0, -3.0, 5.0});
  check_against_brute_force(mesh, model, Eigen::Vector3d::Constant(-15.0), Eigen::Vector3d::Constant(15.0), 5000,
                            2);
}

TEST(Bvh, MatchesBruteForceInsideTube) {
  TubeSpec spec;
  spec.length = 60.0;
  spec.ring_spacing = 1.0;
  spec.segments = 36;
  const TubePhantom tube(spec);
  check_against_brute_force(*tube.mesh(), HomogeneousTransform{}, Eigen::Vector3d(-4, -4, -20),
                            Eigen::Vector3d(4, 4, 20), 3000, 3);
}

TEST(Bvh, HitReportsBarycentricsAndNormal) {
  const AccelStructure accel(share(shapes::plane_z(10.0, 5.0)));
  const auto hit = intersect(accel, HomogeneousTransform{}, {1.0, 2.0, 0.0}, {0.0, 0.0, 1.0});
  ASSERT_TRUE(hit.has_value());
  EXPECT_NEAR(hit->t, 10.0, 1e-12);
  EXPECT_NEAR(std::abs(hit->normal.z()), 1.0, 1e-12);
  const auto& f = accel.mesh().faces()[static_cast<std::size_t>(hit->face)];
  const auto& v = accel.mesh().vertices();
  const Eigen::Vector3d p = hit->b0() * v[f[0]] + hit->b1 * v[f[1]] + hit->b2 * v[f[2]];
  EXPECT_LT((p - Eigen::Vector3d(1.0, 2.0, 10.0)).norm(), 1e-12);
}

TEST(Bvh, RespectsMinimumDistance) {
  const AccelStructure accel(share(shapes::merge({shapes::plane_z(1.0, 5.0), shapes::plane_z(3.0, 5.0)})));
  const HomogeneousTransform id;
  const auto first = intersect(accel, id, {0.2, 0.1, 0.0}, {0, 0, 1});
  ASSERT_TRUE(first);
  EXPECT_NEAR(first->t, 1.0, 1e-12);
  const auto second = intersect(accel, id, {0.2, 0.1, 0.0}, {0, 0, 1}, first->t + kRayEpsilon);
  ASSERT_TRUE(second);
  EXPECT_NEAR(second->t, 3.0, 1e-12);
  EXPECT_FALSE(intersect(accel, id, {0.2, 0.1, 0.0}, {0, 0, -1}));
}

TEST(Bvh, RayTriangleEdgeCases) {
  const Eigen::Vector3d v0(0, 0, 0), e1(1, 0, 0), e2(0, 1, 0);
  double t, b1, b2;
  EXPECT_TRUE(ray_triangle({0.25, 0.25, -1}, {0, 0, 1}, v0, e1, e2, t, b1, b2));
  EXPECT_NEAR(t, 1.0, 1e-15);
  EXPECT_NEAR(b1, 0.25, 1e-15);
  EXPECT_NEAR(b2, 0.25, 1e-15);
  EXPECT_FALSE(ray_triangle({0.75, 0.75, -1}, {0, 0, 1}, v0, e1, e2, t, b1, b2));
  EXPECT_FALSE(ray_triangle({0.25, 0.25, -1}, {1, 0, 0}, v0, e1, e2, t, b1, b2));  // parallel
}

TEST(Mesh, RejectsBadInput) {
  EXPECT_THROW(TriangleMesh({{0, 0, 0}, {1, 0, 0}}, {{0, 1, 2}}), InvalidArgument);
  EXPECT_THROW(TriangleMesh({{0, 0, 0}, {1, 0, 0}, {2, 0, 0}}, {{0, 1, 2}}), InvalidArgument);
}

TEST(Mesh, ObjRoundTripAndErrors) {
  const auto dir = std::filesystem::temp_directory_path() / "lumenreg_mesh_test";
  std::filesystem::create_directories(dir);
  const auto cube = shapes::unit_cube();
  save_mesh(cube, dir / "cube.obj");
  const auto back = load_mesh(dir / "cube.obj");
  ASSERT_EQ(back.face_count(), cube.face_count());
  for (std::size_t i = 0; i < cube.vertex_count(); ++i)
    EXPECT_LT((back.vertices()[i] - cube.vertices()[i]).norm(), 1e-12);
  EXPECT_EQ(back.faces(), cube.faces());

  {
    std::ofstream f(dir / "quad.obj");
    f << "# quad\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvt 0 0\nf 1/1 2/1 3/1 4/1\n";
  }
  EXPECT_EQ(load_mesh(dir / "quad.obj").face_count(), 2u);
  {
    std::ofstream f(dir / "bad.obj");
    f << "v 0 0 0\nv 1 0 0\nv 1 1 0\nf 1 2 9\n";
  }
  try {
    load_mesh(dir / "bad.obj");
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_EQ(e.line(), 4u);
  }
  std::filesystem::remove_all(dir);
}

TEST(Mesh, ClosedShapesHaveOutwardNormals) {
  const auto s = shapes::icosphere({1, 2, 3}, 4.0, 2);
  for (std::size_t i = 0; i < s.face_count(); ++i) {
    const auto& f = s.faces()[i];
    const Eigen::Vector3d c = (s.vertices()[f[0]] + s.vertices()[f[1]] + s.vertices()[f[2]]) / 3.0;
    EXPECT_GT(s.face_normals()[i].dot(c - Eigen::Vector3d(1, 2, 3)), 0.0);
  }
}

}  // namespace
}  // namespace lumenreg
