#include "lumenreg/camera.hpp"

#include "lumenreg/errors.hpp"

#include <algorithm>
#include <cmath>

namespace lumenreg {

CameraIntrinsics CameraIntrinsics::colonoscope_reference() {
  CameraIntrinsics k;
  k.width = 1350;
  k.height = 1080;
  k.cx = 679.54;
  k.cy = 543.98;
  k.a0 = 769.24;
  k.a2 = -8.13e-4;
  k.a3 = -6.26e-7;
  k.a4 = -1.20e-9;
  k.e = 0.9999;
  k.f = 2.88e-3;
  k.g = -2.96e-3;
  return k;
}

void CameraIntrinsics::validate() const {
  if (width <= 0 || height <= 0) throw InvalidIntrinsics("image size must be positive");
  if (!(cx > 0.0 && cx < width)) throw InvalidIntrinsics("cx must lie inside (0, width)");
  if (!(cy > 0.0 && cy < height)) throw InvalidIntrinsics("cy must lie inside (0, height)");
  for (double x : {a0, a2, a3, a4, e, f, g})
    if (!std::isfinite(x)) throw InvalidIntrinsics("non-finite intrinsic coefficient");
  if (std::abs(stretch_det()) <= 1e-6) throw InvalidIntrinsics("stretch matrix is singular");
}

CameraIntrinsics CameraIntrinsics::downsampled(int factor) const {
  if (factor != 1 && factor != 2 && factor != 4)
    throw InvalidArgument("downsample factor must be 1, 2 or 4");
  if (factor == 1) return *this;
  const double s = factor;
  CameraIntrinsics k = *this;
  k.width = width / factor;
  k.height = height / factor;
  k.cx = (cx - 0.5 * (s - 1.0)) / s;
  k.cy = (cy - 0.5 * (s - 1.0)) / s;
  k.a0 = a0 / s;
  k.a2 = a2 * s;
  k.a3 = a3 * s * s;
  k.a4 = a4 * s * s * s;
  return k;
}

double CameraIntrinsics::rho_max() const {
  // Farthest image corner after centering and unskewing, with some slack.
  const double inv_det = 1.0 / stretch_det();
  double r = 0.0;
  for (double u : {-0.5, width - 0.5})
    for (double v : {-0.5, height - 0.5}) {
      const double du = u - cx, dv = v - cy;
      r = std::max(r, std::hypot(inv_det * (du - f * dv), inv_det * (-g * du + e * dv)));
    }
  return 1.05 * r;
}

Eigen::Vector3d pixel_to_ray_unnormalized(const CameraIntrinsics& k, double u, double v) {
  const double du = u - k.cx;
  const double dv = v - k.cy;
  const double inv_det = 1.0 / k.stretch_det();
  const double up = inv_det * (du - k.f * dv);
  const double vp = inv_det * (-k.g * du + k.e * dv);
  const double rho = std::hypot(up, vp);
  return {up, vp, k.poly(rho)};
}

Eigen::Vector3d pixel_to_ray(const CameraIntrinsics& k, double u, double v) {
  k.validate();
  if (!(u >= 0.0 && u < k.width && v >= 0.0 && v < k.height))
    throw InvalidArgument("pixel outside the image");
  return pixel_to_ray_unnormalized(k, u, v).normalized();
}

std::optional<Pixel> try_ray_to_pixel(const CameraIntrinsics& k, const Eigen::Vector3d& d) {
  const double r = std::hypot(d.x(), d.y());
  if (!(r >= 0.0) || !std::isfinite(d.z())) return std::nullopt;
  if (r == 0.0) {
    if (d.z() > 0.0) return Pixel{k.cx, k.cy};
    return std::nullopt;
  }
  // Solve poly(rho) - q * rho = 0, q = dz / r. g(0) = a0 > 0; a root exists
  // in the bracket when g(rho_max) <= 0.
  const double q = d.z() / r;
  const auto g = [&](double rho) { return k.poly(rho) - q * rho; };
  const auto dg = [&](double rho) {
    return rho * (2.0 * k.a2 + rho * (3.0 * k.a3 + rho * 4.0 * k.a4)) - q;
  };
  double lo = 0.0;
  double hi = k.rho_max();
  if (g(lo) <= 0.0 || g(hi) > 0.0) return std::nullopt;

  double rho = 0.5 * (lo + hi);
  for (int it = 0; it < 100; ++it) {
    const double gv = g(rho);
    if (gv > 0.0) lo = rho; else hi = rho;
    if (gv == 0.0 || hi - lo < 1e-13 * k.rho_max()) break;
    const double slope = dg(rho);
    double next = slope != 0.0 ? rho - gv / slope : lo - 1.0;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (next == rho) break;
    rho = next;
  }
  const double up = rho * d.x() / r;
  const double vp = rho * d.y() / r;
  return Pixel{k.cx + k.e * up + k.f * vp, k.cy + k.g * up + vp};
}

Pixel ray_to_pixel(const CameraIntrinsics& k, const Eigen::Vector3d& d) {
  k.validate();
  if (auto p = try_ray_to_pixel(k, d)) return *p;
  throw OutOfFov("direction outside the calibrated field of view");
}

}  // namespace lumenreg
