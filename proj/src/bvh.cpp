#include "lumenreg/bvh.hpp"

#include "lumenreg/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

namespace lumenreg {

namespace {

constexpr int kBins = 16;
constexpr int kMaxLeaf = 4;
constexpr double kTraversalCost = 1.0;
constexpr double kIntersectCost = 1.5;
// Barycentric slack so rays through shared edges cannot slip between faces.
constexpr double kEdgeSlack = 1e-10;

struct ModelRay {
  Eigen::Vector3d o, d, inv;
};

ModelRay prepare(const Ray& r) {
  ModelRay m{r.origin, r.direction, {}};
  for (int a = 0; a < 3; ++a) {
    const double c = r.direction[a];
    m.inv[a] = c != 0.0 ? 1.0 / c : (std::signbit(c) ? -1e300 : 1e300);
  }
  return m;
}

inline bool slab(const Aabb& b, const ModelRay& r, double t_min, double t_max, double& t_near) {
  double lo = t_min, hi = t_max;
  for (int a = 0; a < 3; ++a) {
    const double t0 = (b.lo[a] - r.o[a]) * r.inv[a];
    const double t1 = (b.hi[a] - r.o[a]) * r.inv[a];
    lo = std::max(lo, std::min(t0, t1));
    hi = std::min(hi, std::max(t0, t1));
  }
  t_near = lo;
  return lo <= hi;
}

Aabb padded(Aabb b) {
  const double pad = 1e-9 * (1.0 + (b.hi - b.lo).cwiseAbs().maxCoeff()) + 1e-9;
  b.lo.array() -= pad;
  b.hi.array() += pad;
  return b;
}

}  // namespace

bool ray_triangle(const Eigen::Vector3d& o, const Eigen::Vector3d& d, const Eigen::Vector3d& v0,
                  const Eigen::Vector3d& e1, const Eigen::Vector3d& e2, double& t, double& b1,
                  double& b2) {
  const Eigen::Vector3d p = d.cross(e2);
  const double det = e1.dot(p);
  if (std::abs(det) < 1e-300) return false;
  const double inv = 1.0 / det;
  const Eigen::Vector3d s = o - v0;
  const double u = s.dot(p) * inv;
  if (u < -kEdgeSlack || u > 1.0 + kEdgeSlack) return false;
  const Eigen::Vector3d q = s.cross(e1);
  const double v = d.dot(q) * inv;
  if (v < -kEdgeSlack || u + v > 1.0 + kEdgeSlack) return false;
  t = e2.dot(q) * inv;
  b1 = u;
  b2 = v;
  return true;
}

AccelStructure::AccelStructure(std::shared_ptr<const TriangleMesh> mesh) : mesh_(std::move(mesh)) {
  if (!mesh_ || mesh_->face_count() == 0) throw InvalidArgument("cannot build hierarchy over an empty mesh");
  const auto& v = mesh_->vertices();
  const auto& faces = mesh_->faces();
  const int n = static_cast<int>(faces.size());

  std::vector<Aabb> tri_bounds(faces.size());
  std::vector<Eigen::Vector3d> centroids(faces.size());
  for (int i = 0; i < n; ++i) {
    for (int k : faces[i]) tri_bounds[i].grow(v[k]);
    centroids[i] = (v[faces[i][0]] + v[faces[i][1]] + v[faces[i][2]]) / 3.0;
  }
  face_of_slot_.resize(faces.size());
  std::iota(face_of_slot_.begin(), face_of_slot_.end(), 0);
  nodes_.reserve(2 * faces.size());
  nodes_.emplace_back();
  build(0, 0, n, tri_bounds, centroids);

  tris_.reserve(faces.size());
  for (int f : face_of_slot_) {
    const Face& tri = faces[f];
    tris_.push_back({v[tri[0]], v[tri[1]] - v[tri[0]], v[tri[2]] - v[tri[0]]});
  }
}

void AccelStructure::build(int node, int begin, int end, const std::vector<Aabb>& tri_bounds,
                           const std::vector<Eigen::Vector3d>& centroids) {
  Aabb bounds, cbounds;
  for (int i = begin; i < end; ++i) {
    bounds.grow(tri_bounds[face_of_slot_[i]]);
    cbounds.grow(centroids[face_of_slot_[i]]);
  }
  nodes_[node].bounds = padded(bounds);
  const int count = end - begin;
  if (count <= 1) {
    nodes_[node].first = begin;
    nodes_[node].count = count;
    return;
  }

  // Binned SAH over the centroid extent on every axis.
  double best_cost = std::numeric_limits<double>::infinity();
  int best_axis = -1, best_split = -1;
  for (int axis = 0; axis < 3; ++axis) {
    const double lo = cbounds.lo[axis], hi = cbounds.hi[axis];
    if (!(hi > lo)) continue;
    const double scale = kBins / (hi - lo);
    std::array<Aabb, kBins> bin_bounds;
    std::array<int, kBins> bin_count{};
    for (int i = begin; i < end; ++i) {
      const int f = face_of_slot_[i];
      const int b = std::min(kBins - 1, static_cast<int>((centroids[f][axis] - lo) * scale));
      ++bin_count[b];
      bin_bounds[b].grow(tri_bounds[f]);
    }
    std::array<double, kBins - 1> left_area{}, right_area{};
    std::array<int, kBins - 1> left_count{}, right_count{};
    Aabb acc;
    int n = 0;
    for (int b = 0; b < kBins - 1; ++b) {
      acc.grow(bin_bounds[b]);
      n += bin_count[b];
      left_count[b] = n;
      left_area[b] = n ? acc.half_area() : 0.0;
    }
    acc = Aabb{};
    n = 0;
    for (int b = kBins - 1; b > 0; --b) {
      acc.grow(bin_bounds[b]);
      n += bin_count[b];
      right_count[b - 1] = n;
      right_area[b - 1] = n ? acc.half_area() : 0.0;
    }
    for (int b = 0; b < kBins - 1; ++b) {
      if (left_count[b] == 0 || right_count[b] == 0) continue;
      const double cost = left_count[b] * left_area[b] + right_count[b] * right_area[b];
      if (cost < best_cost) {
        best_cost = cost;
        best_axis = axis;
        best_split = b;
      }
    }
  }

  int mid = begin;
  if (best_axis >= 0) {
    const double leaf_cost = kIntersectCost * count;
    const double split_cost =
        kTraversalCost + kIntersectCost * best_cost / std::max(bounds.half_area(), 1e-300);
    if (count <= kMaxLeaf && leaf_cost <= split_cost) {
      nodes_[node].first = begin;
      nodes_[node].count = count;
      return;
    }
    const double lo = cbounds.lo[best_axis];
    const double scale = kBins / (cbounds.hi[best_axis] - lo);
    const auto it = std::stable_partition(
        face_of_slot_.begin() + begin, face_of_slot_.begin() + end, [&](int f) {
          const int b = std::min(kBins - 1, static_cast<int>((centroids[f][best_axis] - lo) * scale));
          return b <= best_split;
        });
    mid = static_cast<int>(it - face_of_slot_.begin());
  } else {
    // Coincident centroids: leaf if small, otherwise split by slot order.
    if (count <= kMaxLeaf) {
      nodes_[node].first = begin;
      nodes_[node].count = count;
      return;
    }
    mid = begin + count / 2;
  }

  const int left = static_cast<int>(nodes_.size());
  nodes_.emplace_back();
  nodes_.emplace_back();
  nodes_[node].first = left;
  nodes_[node].count = 0;
  build(left, begin, mid, tri_bounds, centroids);
  build(left + 1, mid, end, tri_bounds, centroids);
}

std::optional<Hit> AccelStructure::intersect_local(const Ray& model_ray, double t_min) const {
  const ModelRay r = prepare(model_ray);
  double best_t = std::numeric_limits<double>::infinity();
  int best_slot = -1, best_face = std::numeric_limits<int>::max();
  double best_b1 = 0.0, best_b2 = 0.0;

  struct Entry {
    int node;
    double t_near;
  };
  std::array<Entry, 128> stack;
  int sp = 0;
  double t_root = 0.0;
  if (!slab(nodes_[0].bounds, r, t_min, best_t, t_root)) return std::nullopt;
  stack[sp++] = {0, t_root};
  while (sp > 0) {
    const Entry e = stack[--sp];
    // A closer hit found since the push makes this subtree irrelevant.
    if (e.t_near > best_t) continue;
    const BvhNode& nd = nodes_[e.node];
    if (nd.leaf()) {
      for (int s = nd.first; s < nd.first + nd.count; ++s) {
        const Triangle& tri = tris_[s];
        double t, b1, b2;
        if (!ray_triangle(r.o, r.d, tri.v0, tri.e1, tri.e2, t, b1, b2) || !(t > t_min)) continue;
        const int f = face_of_slot_[s];
        if (t < best_t || (t == best_t && f < best_face)) {
          best_t = t;
          best_face = f;
          best_slot = s;
          best_b1 = b1;
          best_b2 = b2;
        }
      }
      continue;
    }
    // Equal entry distance must still be visited (tie-break by face index).
    double tl, tr;
    const bool hl = slab(nodes_[nd.first].bounds, r, t_min, best_t, tl);
    const bool hr = slab(nodes_[nd.first + 1].bounds, r, t_min, best_t, tr);
    if (hl && hr) {
      if (tl <= tr) {
        stack[sp++] = {nd.first + 1, tr};
        stack[sp++] = {nd.first, tl};
      } else {
        stack[sp++] = {nd.first, tl};
        stack[sp++] = {nd.first + 1, tr};
      }
    } else if (hl) {
      stack[sp++] = {nd.first, tl};
    } else if (hr) {
      stack[sp++] = {nd.first + 1, tr};
    }
  }
  if (best_slot < 0) return std::nullopt;

  Hit h;
  h.t = best_t;
  h.face = best_face;
  h.b1 = std::clamp(best_b1, 0.0, 1.0);
  h.b2 = std::clamp(best_b2, 0.0, 1.0 - h.b1);
  h.position = r.o + best_t * r.d;
  h.normal = mesh_->face_normals()[best_face];
  return h;
}

bool AccelStructure::validate() const {
  std::vector<int> seen(mesh_->face_count(), 0);
  const auto& v = mesh_->vertices();
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const BvhNode& nd = nodes_[i];
    if (nd.leaf()) {
      for (int s = nd.first; s < nd.first + nd.count; ++s) {
        const int f = face_of_slot_[s];
        ++seen[f];
        Aabb tb;
        for (int k : mesh_->faces()[f]) tb.grow(v[k]);
        if (!nd.bounds.contains(tb)) return false;
      }
    } else {
      if (nd.first <= static_cast<int>(i) || nd.first + 1 >= static_cast<int>(nodes_.size())) return false;
      if (!nd.bounds.contains(nodes_[nd.first].bounds) || !nd.bounds.contains(nodes_[nd.first + 1].bounds))
        return false;
    }
  }
  return std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; });
}

namespace {

Hit to_world(Hit h, const HomogeneousTransform& model_transform, const Eigen::Vector3d& origin,
             const Eigen::Vector3d& direction) {
  h.position = origin + h.t * direction;
  h.normal = model_transform.apply_direction(h.normal);
  return h;
}

Ray to_model(const HomogeneousTransform& model_transform, const Eigen::Vector3d& origin,
             const Eigen::Vector3d& direction) {
  const Eigen::Matrix3d rt = model_transform.rotation().transpose();
  return {rt * (origin - model_transform.translation()), rt * direction};
}

}  // namespace

std::optional<Hit> intersect(const AccelStructure& accel, const HomogeneousTransform& model_transform,
                             const Eigen::Vector3d& origin, const Eigen::Vector3d& direction,
                             double t_min) {
  auto h = accel.intersect_local(to_model(model_transform, origin, direction), t_min);
  if (!h) return std::nullopt;
  return to_world(*h, model_transform, origin, direction);
}

std::optional<Hit> intersect_brute_force(const TriangleMesh& mesh,
                                         const HomogeneousTransform& model_transform,
                                         const Eigen::Vector3d& origin,
                                         const Eigen::Vector3d& direction, double t_min) {
  const Ray r = to_model(model_transform, origin, direction);
  const auto& v = mesh.vertices();
  std::optional<Hit> best;
  for (std::size_t f = 0; f < mesh.face_count(); ++f) {
    const Face& tri = mesh.faces()[f];
    double t, b1, b2;
    if (!ray_triangle(r.origin, r.direction, v[tri[0]], v[tri[1]] - v[tri[0]], v[tri[2]] - v[tri[0]], t, b1, b2) ||
        !(t > t_min))
      continue;
    if (!best || t < best->t) {
      Hit h;
      h.t = t;
      h.face = static_cast<int>(f);
      h.b1 = std::clamp(b1, 0.0, 1.0);
      h.b2 = std::clamp(b2, 0.0, 1.0 - h.b1);
      h.normal = mesh.face_normals()[f];
      best = h;
    }
  }
  if (!best) return std::nullopt;
  return to_world(*best, model_transform, origin, direction);
}

}  // namespace lumenreg
