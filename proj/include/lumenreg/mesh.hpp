#pragma once

#include <Eigen/Core>

#include <array>
#include <filesystem>
#include <vector>

namespace lumenreg {

using Face = std::array<int, 3>;

/// Triangle surface in millimeters. Construction validates indices and
/// rejects degenerate faces (area <= 1e-12 mm^2).
class TriangleMesh {
 public:
  TriangleMesh() = default;
  TriangleMesh(std::vector<Eigen::Vector3d> vertices, std::vector<Face> faces);

  const std::vector<Eigen::Vector3d>& vertices() const { return vertices_; }
  const std::vector<Face>& faces() const { return faces_; }
  /// Unit geometric normal per face, oriented by winding (right hand).
  const std::vector<Eigen::Vector3d>& face_normals() const { return normals_; }

  std::size_t vertex_count() const { return vertices_.size(); }
  std::size_t face_count() const { return faces_.size(); }
  double face_area(std::size_t i) const;

 private:
  std::vector<Eigen::Vector3d> vertices_;
  std::vector<Face> faces_;
  std::vector<Eigen::Vector3d> normals_;
};

/// Reads `v` and `f` records of a Wavefront OBJ; polygons are fan-triangulated,
/// vt/vn references ignored. Throws FormatError (with line) or InvalidArgument
/// for an empty mesh.
TriangleMesh load_mesh(const std::filesystem::path& path);
void save_mesh(const TriangleMesh& mesh, const std::filesystem::path& path);

namespace shapes {

/// Axis-aligned cube [0,1]^3, 8 vertices and 12 outward-facing triangles.
TriangleMesh unit_cube();
/// Square in the plane z = z0 spanning [-half, half]^2, two triangles,
/// winding gives normal +z.
TriangleMesh plane_z(double z0, double half);
/// Disc of radius r in the plane z = z0 (triangle fan, normal +z).
TriangleMesh disc_z(double z0, double r, int segments = 64);
/// Subdivided icosahedron of radius r around center, outward normals.
TriangleMesh icosphere(const Eigen::Vector3d& center, double r, int subdivisions);
/// Closed cylinder along z (side wall plus end caps), outward normals.
TriangleMesh closed_cylinder(double radius, double z0, double z1, int segments, int rings);
/// Merges meshes into one; face order is the concatenation order.
TriangleMesh merge(const std::vector<TriangleMesh>& parts);

}  // namespace shapes

}  // namespace lumenreg
