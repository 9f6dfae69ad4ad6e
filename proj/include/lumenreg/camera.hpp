#pragma once

#include <Eigen/Core>

#include <optional>

namespace lumenreg {

struct Pixel {
  double u = 0.0;
  double v = 0.0;
};

/// Omnidirectional (spherical polynomial) camera.
///
/// A pixel (u, v) is shifted to the optical center and unskewed by the stretch
/// matrix A = [[e, f], [g, 1]]:  (u', v') = A^-1 (u - cx, v - cy).
/// The ray is (u', v', poly(rho)) with rho = |(u', v')| and
/// poly(rho) = a0 + a2 rho^2 + a3 rho^3 + a4 rho^4 (no linear term).
/// The camera looks along +z.
struct CameraIntrinsics {
  int width = 0;
  int height = 0;
  double cx = 0.0;
  double cy = 0.0;
  double a0 = 0.0;
  double a2 = 0.0;
  double a3 = 0.0;
  double a4 = 0.0;
  double e = 1.0;
  double f = 0.0;
  double g = 0.0;

  /// Olympus CF-HQ190L calibration (1350 x 1080).
  static CameraIntrinsics colonoscope_reference();

  /// Throws InvalidIntrinsics on a violated invariant.
  void validate() const;

  double poly(double rho) const { return a0 + rho * rho * (a2 + rho * (a3 + rho * a4)); }
  double stretch_det() const { return e - f * g; }

  /// Integer decimation: pixel i of the result samples the center of the
  /// factor x factor block i of this grid. factor must be 1, 2 or 4.
  CameraIntrinsics downsampled(int factor) const;

  /// Largest rho considered by the inverse projection: the farthest image
  /// corner in unskewed coordinates plus 5 %.
  double rho_max() const;
};

/// Unnormalized ray (u', v', poly(rho)).
Eigen::Vector3d pixel_to_ray_unnormalized(const CameraIntrinsics& k, double u, double v);

/// Unit ray direction in the camera frame. Throws InvalidIntrinsics for a
/// singular stretch matrix and InvalidArgument for pixels outside the image.
Eigen::Vector3d pixel_to_ray(const CameraIntrinsics& k, double u, double v);

/// Inverse projection. Empty when the direction has no preimage with
/// rho in [0, rho_max].
std::optional<Pixel> try_ray_to_pixel(const CameraIntrinsics& k, const Eigen::Vector3d& d);

/// Throws OutOfFov when try_ray_to_pixel is empty.
Pixel ray_to_pixel(const CameraIntrinsics& k, const Eigen::Vector3d& d);

}  // namespace lumenreg
