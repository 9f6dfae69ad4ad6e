#pragma once

#include "lumenreg/mesh.hpp"
#include "lumenreg/transform.hpp"

#include <Eigen/Core>

#include <limits>
#include <memory>
#include <optional>
#include <vector>

namespace lumenreg {

/// Hits closer than this along the ray (mm) are ignored.
inline constexpr double kRayEpsilon = 1e-4;

struct Ray {
  Eigen::Vector3d origin;
  Eigen::Vector3d direction;  // unit norm
};

struct Hit {
  double t = 0.0;                 // ray parameter, mm
  int face = -1;
  double b1 = 0.0, b2 = 0.0;      // barycentrics of vertices 1 and 2 of the face
  Eigen::Vector3d position;       // world space, mm
  Eigen::Vector3d normal;         // world space geometric normal (winding order)

  double b0() const { return 1.0 - b1 - b2; }
};

struct Aabb {
  Eigen::Vector3d lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
  Eigen::Vector3d hi = Eigen::Vector3d::Constant(-std::numeric_limits<double>::infinity());

  void grow(const Eigen::Vector3d& p) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  void grow(const Aabb& b) {
    lo = lo.cwiseMin(b.lo);
    hi = hi.cwiseMax(b.hi);
  }
  bool contains(const Aabb& b) const {
    return (lo.array() <= b.lo.array()).all() && (hi.array() >= b.hi.array()).all();
  }
  double half_area() const {
    const Eigen::Vector3d d = hi - lo;
    return d.x() * d.y() + d.y() * d.z() + d.z() * d.x();
  }
};

struct BvhNode {
  Aabb bounds;
  int first = 0;  // leaf: first triangle slot; interior: left child index (right = first + 1)
  int count = 0;  // > 0 for leaves

  bool leaf() const { return count > 0; }
};

/// SAH-binned bounding volume hierarchy over a TriangleMesh. Immutable after
/// construction; queries are safe from any number of threads. The model
/// transform is applied to rays, so one hierarchy serves every candidate pose.
class AccelStructure {
 public:
  explicit AccelStructure(std::shared_ptr<const TriangleMesh> mesh);

  const TriangleMesh& mesh() const { return *mesh_; }
  std::shared_ptr<const TriangleMesh> mesh_ptr() const { return mesh_; }
  const std::vector<BvhNode>& nodes() const { return nodes_; }
  /// Face index stored in each leaf slot.
  const std::vector<int>& leaf_faces() const { return face_of_slot_; }

  /// Nearest hit in model space with t > t_min. Ties in t resolve to the
  /// smaller face index.
  std::optional<Hit> intersect_local(const Ray& model_ray, double t_min = kRayEpsilon) const;

  /// Checks containment and that every face sits in exactly one leaf.
  bool validate() const;

 private:
  struct Triangle {
    Eigen::Vector3d v0, e1, e2;
  };
  void build(int node, int begin, int end, const std::vector<Aabb>& tri_bounds,
             const std::vector<Eigen::Vector3d>& centroids);

  std::shared_ptr<const TriangleMesh> mesh_;
  std::vector<BvhNode> nodes_;
  std::vector<int> face_of_slot_;
  std::vector<Triangle> tris_;
};

/// Nearest hit of a world-space ray against the mesh placed by
/// `model_transform` (model -> world). Position and normal are world space.
std::optional<Hit> intersect(const AccelStructure& accel, const HomogeneousTransform& model_transform,
                             const Eigen::Vector3d& origin, const Eigen::Vector3d& direction,
                             double t_min = kRayEpsilon);

/// Same query by testing every triangle. Reference for the hierarchy.
std::optional<Hit> intersect_brute_force(const TriangleMesh& mesh,
                                         const HomogeneousTransform& model_transform,
                                         const Eigen::Vector3d& origin,
                                         const Eigen::Vector3d& direction,
                                         double t_min = kRayEpsilon);

/// Moller-Trumbore. Returns t (and barycentrics) when the ray crosses the
/// triangle; no range test on t.
bool ray_triangle(const Eigen::Vector3d& o, const Eigen::Vector3d& d, const Eigen::Vector3d& v0,
                  const Eigen::Vector3d& e1, const Eigen::Vector3d& e2, double& t, double& b1,
                  double& b2);

}  // namespace lumenreg
