#pragma once

#include "lumenreg/camera.hpp"
#include "lumenreg/mesh.hpp"
#include "lumenreg/registration.hpp"
#include "lumenreg/transform.hpp"

#include <cstdint>
#include <memory>
#include <string_view>
#include <vector>

namespace lumenreg {

/// Procedural colon-like tube: a centerline bent on a circle in the x-z
/// plane, haustral folds, a twisting elliptical cross-section and random
/// wall bumps. The centerline passes through the origin heading +z.
struct TubeSpec {
  double bend_radius = 80.0;     // mm
  double length = 220.0;         // arc length, centered on the origin
  double radius = 12.0;
  double ellipticity = 0.12;     // relative radius modulation, cos(2 phi)
  double twist = 0.05;           // rad per mm of arc length
  double fold_period = 14.0;
  double fold_depth = 0.28;      // relative lumen narrowing at a crest
  double fold_width = 1.2;       // Gaussian sigma, mm
  int bumps = 30;
  double bump_height = 1.5;      // mm, signed at random
  double ring_spacing = 0.4;
  int segments = 72;
  std::uint64_t seed = 7;
};

class TubePhantom {
 public:
  explicit TubePhantom(const TubeSpec& spec = {});

  const TubeSpec& spec() const { return spec_; }
  std::shared_ptr<const TriangleMesh> mesh() const { return mesh_; }

  Eigen::Vector3d centerline(double s) const;
  Eigen::Vector3d tangent(double s) const;
  Eigen::Vector3d normal(double s) const;    // in-plane, toward the bend center at s = 0
  Eigen::Vector3d binormal(double s) const;  // +y
  /// Wall distance from the centerline at arc length s and angle phi.
  double wall_radius(double s, double phi) const;
  /// Distance from p to the centerline and the clearance to the wall along
  /// that radial direction (negative outside).
  double clearance(const Eigen::Vector3d& p) const;

 private:
  struct Bump {
    double s, phi, height;
  };
  TubeSpec spec_;
  std::vector<Bump> bumps_;
  std::shared_ptr<const TriangleMesh> mesh_;
};

enum class TrajectoryKind { Simple, Moderate, Complex };

TrajectoryKind parse_trajectory_kind(std::string_view name);
std::string_view trajectory_name(TrajectoryKind k);

struct SyntheticOptions {
  int frames = 200;
  double travel = 40.0;            // mm of arc length covered by the trajectory
  double helix_radius = 3.0;       // moderate and complex
  double helix_turns = 2.0;
  double orientation_amplitude = 0.15;  // rad, complex only
  double wall_margin = 2.0;        // minimum clearance of every pose
  double gt_translation = 50.0;    // |T_gt translation| components, mm
  double perturbation_fraction = 1.0;   // of the registration bounds
  int keyframes = 5;
  double depth_noise_sigma = 0.0;  // mm, applied to target depth
  double scale_jitter = 0.0;       // per-frame multiplicative depth scale in [1-j, 1+j]
};

struct SyntheticCase {
  TrajectoryKind kind = TrajectoryKind::Simple;
  std::vector<HomogeneousTransform> model_trajectory;  // camera -> model
  std::vector<HomogeneousTransform> trajectory;        // camera -> world
  HomogeneousTransform t_gt;                           // model -> world
  HomogeneousTransform t_initial;
  TransformParams perturbation;                        // T_initial = T_gt P(p)^-1
  std::vector<Keyframe> keyframes;
};

/// Trajectory inside the phantom in model coordinates. Throws GenerationError
/// when a pose comes closer to the wall than the margin.
std::vector<HomogeneousTransform> phantom_trajectory(const TubePhantom& phantom, TrajectoryKind kind,
                                                     const SyntheticOptions& opt);

/// Random T_gt, a perturbed T_initial within the bounds and rendered targets
/// at the sampled keyframes (at the resolution of `k`).
SyntheticCase generate_synthetic_case(const TubePhantom& phantom, const AccelStructure& accel,
                                      const CameraIntrinsics& k, TrajectoryKind kind, std::uint64_t seed,
                                      const SyntheticOptions& opt = {},
                                      const BoundsSpec& bounds = BoundsSpec::registration());

/// Uniformly distributed random rotation.
Eigen::Matrix3d random_rotation(std::uint64_t seed);

}  // namespace lumenreg
