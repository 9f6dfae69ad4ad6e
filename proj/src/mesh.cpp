#include "lumenreg/mesh.hpp"

#include "lumenreg/errors.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <sstream>
#include <string>

namespace lumenreg {

TriangleMesh::TriangleMesh(std::vector<Eigen::Vector3d> vertices, std::vector<Face> faces)
    : vertices_(std::move(vertices)), faces_(std::move(faces)) {
  const auto n = static_cast<int>(vertices_.size());
  normals_.reserve(faces_.size());
  for (std::size_t i = 0; i < faces_.size(); ++i) {
    for (int idx : faces_[i])
      if (idx < 0 || idx >= n)
        throw InvalidArgument("face " + std::to_string(i) + " references missing vertex " +
                              std::to_string(idx));
    const Eigen::Vector3d c = (vertices_[faces_[i][1]] - vertices_[faces_[i][0]])
                                  .cross(vertices_[faces_[i][2]] - vertices_[faces_[i][0]]);
    if (0.5 * c.norm() <= 1e-12)
      throw InvalidArgument("face " + std::to_string(i) + " is degenerate");
    normals_.push_back(c.normalized());
  }
}

double TriangleMesh::face_area(std::size_t i) const {
  const Face& f = faces_.at(i);
  return 0.5 * (vertices_[f[1]] - vertices_[f[0]]).cross(vertices_[f[2]] - vertices_[f[0]]).norm();
}

namespace {

int parse_index(const std::string& token, int vertex_count, const std::string& where,
                std::size_t line) {
  const std::string head = token.substr(0, token.find('/'));
  int idx = 0;
  const auto [ptr, ec] = std::from_chars(head.data(), head.data() + head.size(), idx);
  if (ec != std::errc() || ptr != head.data() + head.size() || idx == 0)
    throw FormatError(where, line, "malformed face index '" + token + "'");
  const int resolved = idx > 0 ? idx - 1 : vertex_count + idx;
  if (resolved < 0 || resolved >= vertex_count)
    throw FormatError(where, line, "face index " + head + " out of range");
  return resolved;
}

}  // namespace

TriangleMesh load_mesh(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open mesh file " + path.string());
  const std::string where = path.string();

  std::vector<Eigen::Vector3d> vertices;
  std::vector<Face> faces;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    std::istringstream ls(text);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      Eigen::Vector3d p;
      if (!(ls >> p.x() >> p.y() >> p.z()) || !p.allFinite())
        throw FormatError(where, line, "malformed vertex record");
      vertices.push_back(p);
    } else if (tag == "f") {
      std::vector<int> poly;
      std::string tok;
      while (ls >> tok) poly.push_back(parse_index(tok, static_cast<int>(vertices.size()), where, line));
      if (poly.size() < 3) throw FormatError(where, line, "face needs at least 3 vertices");
      for (std::size_t i = 1; i + 1 < poly.size(); ++i) {
        const Face f{poly[0], poly[i], poly[i + 1]};
        const double area = 0.5 * (vertices[f[1]] - vertices[f[0]])
                                      .cross(vertices[f[2]] - vertices[f[0]])
                                      .norm();
        if (area <= 1e-12) throw FormatError(where, line, "degenerate face");
        faces.push_back(f);
      }
    }
  }
  if (faces.empty()) throw InvalidArgument("mesh " + where + " contains no faces");
  return TriangleMesh(std::move(vertices), std::move(faces));
}

void save_mesh(const TriangleMesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw WriteError("cannot write mesh file " + path.string());
  out << std::setprecision(10);
  for (const auto& v : mesh.vertices()) out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  for (const auto& f : mesh.faces()) out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
  if (!out) throw WriteError("failed writing mesh file " + path.string());
}

namespace shapes {

TriangleMesh unit_cube() {
  std::vector<Eigen::Vector3d> v;
  for (int i = 0; i < 8; ++i) v.emplace_back(i & 1, (i >> 1) & 1, (i >> 2) & 1);
  // Outward winding per face.
  std::vector<Face> f = {{0, 2, 1}, {1, 2, 3}, {4, 5, 6}, {5, 7, 6},   // z=0, z=1
                         {0, 1, 4}, {1, 5, 4}, {2, 6, 3}, {3, 6, 7},   // y=0, y=1
                         {0, 4, 2}, {2, 4, 6}, {1, 3, 5}, {3, 7, 5}};  // x=0, x=1
  return TriangleMesh(std::move(v), std::move(f));
}

TriangleMesh plane_z(double z0, double half) {
  std::vector<Eigen::Vector3d> v = {{-half, -half, z0}, {half, -half, z0},
                                    {half, half, z0},   {-half, half, z0}};
  return TriangleMesh(std::move(v), {{0, 1, 2}, {0, 2, 3}});
}

TriangleMesh disc_z(double z0, double r, int segments) {
  std::vector<Eigen::Vector3d> v = {{0.0, 0.0, z0}};
  std::vector<Face> f;
  for (int i = 0; i < segments; ++i) {
    const double a = 2.0 * std::numbers::pi * i / segments;
    v.emplace_back(r * std::cos(a), r * std::sin(a), z0);
  }
  for (int i = 0; i < segments; ++i) f.push_back({0, 1 + i, 1 + (i + 1) % segments});
  return TriangleMesh(std::move(v), std::move(f));
}

TriangleMesh icosphere(const Eigen::Vector3d& center, double r, int subdivisions) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Eigen::Vector3d> v = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0},
                                    {0, -1, t}, {0, 1, t}, {0, -1, -t}, {0, 1, -t},
                                    {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (auto& p : v) p.normalize();
  std::vector<Face> f = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                         {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                         {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                         {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7}, {9, 8, 1}};
  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<int, int>, int> mid;
    const auto midpoint = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      if (auto it = mid.find(key); it != mid.end()) return it->second;
      v.push_back((v[a] + v[b]).normalized());
      return mid[key] = static_cast<int>(v.size()) - 1;
    };
    std::vector<Face> next;
    next.reserve(f.size() * 4);
    for (const Face& tri : f) {
      const int ab = midpoint(tri[0], tri[1]);
      const int bc = midpoint(tri[1], tri[2]);
      const int ca = midpoint(tri[2], tri[0]);
      next.push_back({tri[0], ab, ca});
      next.push_back({tri[1], bc, ab});
      next.push_back({tri[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    f = std::move(next);
  }
  for (auto& p : v) p = center + r * p;
  return TriangleMesh(std::move(v), std::move(f));
}

TriangleMesh closed_cylinder(double radius, double z0, double z1, int segments, int rings) {
  std::vector<Eigen::Vector3d> v;
  std::vector<Face> f;
  for (int j = 0; j <= rings; ++j) {
    const double z = z0 + (z1 - z0) * j / rings;
    for (int i = 0; i < segments; ++i) {
      const double a = 2.0 * std::numbers::pi * i / segments;
      v.emplace_back(radius * std::cos(a), radius * std::sin(a), z);
    }
  }
  const auto at = [&](int j, int i) { return j * segments + (i % segments); };
  for (int j = 0; j < rings; ++j)
    for (int i = 0; i < segments; ++i) {
      f.push_back({at(j, i), at(j, i + 1), at(j + 1, i + 1)});
      f.push_back({at(j, i), at(j + 1, i + 1), at(j + 1, i)});
    }
  const int c0 = static_cast<int>(v.size());
  v.emplace_back(0.0, 0.0, z0);
  const int c1 = static_cast<int>(v.size());
  v.emplace_back(0.0, 0.0, z1);
  for (int i = 0; i < segments; ++i) {
    f.push_back({c0, at(0, i + 1), at(0, i)});
    f.push_back({c1, at(rings, i), at(rings, i + 1)});
  }
  return TriangleMesh(std::move(v), std::move(f));
}

TriangleMesh merge(const std::vector<TriangleMesh>& parts) {
  std::vector<Eigen::Vector3d> v;
  std::vector<Face> f;
  for (const auto& m : parts) {
    const int base = static_cast<int>(v.size());
    v.insert(v.end(), m.vertices().begin(), m.vertices().end());
    for (const Face& tri : m.faces()) f.push_back({tri[0] + base, tri[1] + base, tri[2] + base});
  }
  return TriangleMesh(std::move(v), std::move(f));
}

}  // namespace shapes

}  // namespace lumenreg
