#include "lumenreg/render.hpp"

#include <algorithm>
#include <cmath>

namespace lumenreg {

CameraRays::CameraRays(const CameraIntrinsics& k) : k_(k) {
  k_.validate();
  dirs_.resize(static_cast<std::size_t>(k_.width) * k_.height);
  for (int y = 0; y < k_.height; ++y)
    for (int x = 0; x < k_.width; ++x)
      dirs_[static_cast<std::size_t>(y) * k_.width + x] = pixel_to_ray_unnormalized(k_, x, y).normalized();
}

namespace {

// Rays of one camera pose expressed in model space.
struct PoseRays {
  Eigen::Matrix3d cam_to_model;
  Eigen::Vector3d origin_model;

  PoseRays(const HomogeneousTransform& model, const HomogeneousTransform& pose) {
    const Eigen::Matrix3d rt = model.rotation().transpose();
    cam_to_model = rt * pose.rotation();
    origin_model = rt * (pose.translation() - model.translation());
  }
  Ray ray(const Eigen::Vector3d& cam_dir) const { return {origin_model, cam_to_model * cam_dir}; }
};

}  // namespace

DepthFrame render_depth(const AccelStructure& accel, const HomogeneousTransform& model,
                        const CameraRays& rays, const HomogeneousTransform& pose) {
  const int w = rays.width(), h = rays.height();
  DepthFrame out(w, h);
  const PoseRays pr(model, pose);
#pragma omp parallel for schedule(dynamic, 8)
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const Eigen::Vector3d& d = rays.at(x, y);
      if (auto hit = accel.intersect_local(pr.ray(d))) {
        out.depth(x, y) = std::max(0.0, hit->t * d.z());
        out.hit(x, y) = 1;
      }
    }
  }
  return out;
}

DepthFrame render_depth(const AccelStructure& accel, const HomogeneousTransform& model,
                        const CameraIntrinsics& k, const HomogeneousTransform& pose, int scale) {
  return render_depth(accel, model, CameraRays(k.downsampled(scale)), pose);
}

NormalFrame render_normals(const AccelStructure& accel, const HomogeneousTransform& model,
                           const CameraIntrinsics& k, const HomogeneousTransform& pose, int scale) {
  const CameraRays rays(k.downsampled(scale));
  const int w = rays.width(), h = rays.height();
  NormalFrame out(w, h);
  const PoseRays pr(model, pose);
  // Face normals live in model space; camera frame = pose^-1 * model.
  const Eigen::Matrix3d model_to_cam = pr.cam_to_model.transpose();
  const auto& normals = accel.mesh().face_normals();
#pragma omp parallel for schedule(dynamic, 8)
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const Eigen::Vector3d& d = rays.at(x, y);
      if (auto hit = accel.intersect_local(pr.ray(d))) {
        Eigen::Vector3d n = model_to_cam * normals[hit->face];
        if (n.dot(d) > 0.0) n = -n;
        out.normal(x, y) = n.normalized();
        out.hit(x, y) = 1;
      }
    }
  }
  return out;
}

OcclusionFrame render_occlusion(const AccelStructure& accel, const HomogeneousTransform& model,
                                const CameraIntrinsics& k, const HomogeneousTransform& pose,
                                int scale) {
  const CameraRays rays(k.downsampled(scale));
  const int w = rays.width(), h = rays.height();
  OcclusionFrame out(w, h, 0);
  const PoseRays pr(model, pose);
#pragma omp parallel for schedule(dynamic, 8)
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const Eigen::Vector3d& d = rays.at(x, y);
      const Ray r = pr.ray(d);
      const auto first = accel.intersect_local(r);
      if (!first) continue;
      const auto second = accel.intersect_local(r, first->t + kRayEpsilon);
      if (second && second->t * d.z() <= kFarClampMm) out(x, y) = 1;
    }
  }
  return out;
}

std::optional<Eigen::Vector2d> flow_at_pixel(const AccelStructure& accel,
                                             const HomogeneousTransform& model,
                                             const CameraIntrinsics& k,
                                             const HomogeneousTransform& pose_from,
                                             const HomogeneousTransform& pose_to, double u, double v) {
  const Eigen::Vector3d d = pixel_to_ray_unnormalized(k, u, v).normalized();
  const auto hit = intersect(accel, model, pose_from.translation(), pose_from.apply_direction(d));
  if (!hit) return std::nullopt;

  const Eigen::Vector3d to_origin = pose_to.translation();
  const Eigen::Vector3d delta = hit->position - to_origin;
  const double dist = delta.norm();
  if (!(dist > kRayEpsilon)) return std::nullopt;
  const Eigen::Vector3d world_dir = delta / dist;

  const auto px = try_ray_to_pixel(k, pose_to.rotation().transpose() * world_dir);
  if (!px || px->u < 0.0 || px->u > k.width - 1 || px->v < 0.0 || px->v > k.height - 1)
    return std::nullopt;

  const auto blocker = intersect(accel, model, to_origin, world_dir);
  if (!blocker || blocker->t < dist - (1e-3 + 1e-5 * dist)) return std::nullopt;
  return Eigen::Vector2d(px->u - u, px->v - v);
}

FlowFrame render_flow(const AccelStructure& accel, const HomogeneousTransform& model,
                      const CameraIntrinsics& k, const HomogeneousTransform& pose_prev,
                      const HomogeneousTransform& pose_curr, int scale) {
  const CameraIntrinsics ks = k.downsampled(scale);
  ks.validate();
  FlowFrame out(ks.width, ks.height);
#pragma omp parallel for schedule(dynamic, 8)
  for (int y = 0; y < ks.height; ++y) {
    for (int x = 0; x < ks.width; ++x) {
      if (auto f = flow_at_pixel(accel, model, ks, pose_prev, pose_curr, x, y)) {
        out.flow(x, y) = *f;
        out.valid(x, y) = 1;
      }
    }
  }
  return out;
}

CoverageMap accumulate_coverage(const AccelStructure& accel, const HomogeneousTransform& model,
                                const CameraIntrinsics& k,
                                std::span<const HomogeneousTransform> poses, int scale) {
  CoverageMap observed(accel.mesh().face_count(), 0);
  if (poses.empty()) return observed;
  const CameraRays rays(k.downsampled(scale));
  for (const auto& pose : poses) {
    const PoseRays pr(model, pose);
    // Per-row face lists keep the parallel loop free of shared writes.
    std::vector<std::vector<int>> seen(static_cast<std::size_t>(rays.height()));
#pragma omp parallel for schedule(dynamic, 8)
    for (int y = 0; y < rays.height(); ++y)
      for (int x = 0; x < rays.width(); ++x)
        if (auto hit = accel.intersect_local(pr.ray(rays.at(x, y)))) seen[y].push_back(hit->face);
    for (const auto& row : seen)
      for (int f : row) observed[static_cast<std::size_t>(f)] = 1;
  }
  return observed;
}

}  // namespace lumenreg
