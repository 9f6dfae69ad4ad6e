#pragma once

#include "lumenreg/bvh.hpp"
#include "lumenreg/camera.hpp"
#include "lumenreg/frames.hpp"
#include "lumenreg/transform.hpp"

#include <optional>
#include <span>
#include <vector>

namespace lumenreg {

/// Depth range encoded in exported frames and the occlusion reach, mm.
inline constexpr double kFarClampMm = 100.0;

/// Per-pixel unit ray directions in the camera frame for one intrinsics grid.
class CameraRays {
 public:
  explicit CameraRays(const CameraIntrinsics& k);

  const CameraIntrinsics& intrinsics() const { return k_; }
  int width() const { return k_.width; }
  int height() const { return k_.height; }
  const Eigen::Vector3d& at(int x, int y) const {
    return dirs_[static_cast<std::size_t>(y) * k_.width + x];
  }

 private:
  CameraIntrinsics k_;
  std::vector<Eigen::Vector3d> dirs_;
};

/// Camera poses map camera coordinates to world coordinates; the model
/// transform maps model coordinates to world coordinates.
///
/// Hits behind the image plane (possible beyond a 180 degree field of view)
/// report depth 0.
DepthFrame render_depth(const AccelStructure& accel, const HomogeneousTransform& model,
                        const CameraRays& rays, const HomogeneousTransform& pose);
DepthFrame render_depth(const AccelStructure& accel, const HomogeneousTransform& model,
                        const CameraIntrinsics& k, const HomogeneousTransform& pose, int scale = 1);

NormalFrame render_normals(const AccelStructure& accel, const HomogeneousTransform& model,
                           const CameraIntrinsics& k, const HomogeneousTransform& pose, int scale = 1);

/// 1 where a continuation of the primary ray past the first hit strikes
/// another face whose camera-frame z is at most kFarClampMm.
OcclusionFrame render_occlusion(const AccelStructure& accel, const HomogeneousTransform& model,
                                const CameraIntrinsics& k, const HomogeneousTransform& pose,
                                int scale = 1);

/// Flow of a single (possibly fractional) pixel of the `from` view into the
/// `to` view. Empty on a miss, when the point leaves the field of view or
/// image, or when it is hidden in the `to` view.
std::optional<Eigen::Vector2d> flow_at_pixel(const AccelStructure& accel,
                                             const HomogeneousTransform& model,
                                             const CameraIntrinsics& k,
                                             const HomogeneousTransform& pose_from,
                                             const HomogeneousTransform& pose_to, double u, double v);

FlowFrame render_flow(const AccelStructure& accel, const HomogeneousTransform& model,
                      const CameraIntrinsics& k, const HomogeneousTransform& pose_prev,
                      const HomogeneousTransform& pose_curr, int scale = 1);

/// Faces that are the nearest hit of at least one pixel in at least one pose.
CoverageMap accumulate_coverage(const AccelStructure& accel, const HomogeneousTransform& model,
                                const CameraIntrinsics& k,
                                std::span<const HomogeneousTransform> poses, int scale = 1);

}  // namespace lumenreg
