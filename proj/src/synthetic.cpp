#include "lumenreg/synthetic.hpp"

#include "lumenreg/errors.hpp"
#include "lumenreg/poses.hpp"
#include "lumenreg/render.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <numbers>
#include <random>
#include <string>

namespace lumenreg {

namespace {

constexpr double kPi = std::numbers::pi;

double wrap_angle(double a) { return std::remainder(a, 2.0 * kPi); }

}  // namespace

TubePhantom::TubePhantom(const TubeSpec& spec) : spec_(spec) {
  if (!(spec.bend_radius > spec.radius && spec.radius > 0.0 && spec.length > 0.0 && spec.ring_spacing > 0.0 &&
        spec.segments >= 8 && spec.fold_period > 0.0 && spec.fold_width > 0.0))
    throw InvalidArgument("invalid tube specification");
  if (spec.length / spec.bend_radius >= kPi) throw InvalidArgument("tube bends back onto itself");

  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> us(-spec.length / 2, spec.length / 2), uphi(-kPi, kPi), usign(-1.0, 1.0);
  for (int i = 0; i < spec.bumps; ++i) {
    const double s = us(rng), phi = uphi(rng);
    const double h = usign(rng) * spec.bump_height;
    bumps_.push_back({s, phi, h});
  }

  const int rings = static_cast<int>(std::lround(spec.length / spec.ring_spacing)) + 1;
  const int seg = spec.segments;
  std::vector<Eigen::Vector3d> v;
  v.reserve(static_cast<std::size_t>(rings * seg));
  for (int i = 0; i < rings; ++i) {
    const double s = -spec.length / 2 + spec.length * i / (rings - 1);
    const Eigen::Vector3d c = centerline(s), n = normal(s), b = binormal(s);
    for (int j = 0; j < seg; ++j) {
      const double phi = 2.0 * kPi * j / seg;
      v.push_back(c + wall_radius(s, phi) * (std::cos(phi) * n + std::sin(phi) * b));
    }
  }
  std::vector<Face> f;
  f.reserve(static_cast<std::size_t>(2 * (rings - 1) * seg));
  for (int i = 0; i + 1 < rings; ++i)
    for (int j = 0; j < seg; ++j) {
      const int a = i * seg + j, b = i * seg + (j + 1) % seg;
      const int c = a + seg, d = b + seg;
      f.push_back({a, c, b});
      f.push_back({b, c, d});
    }
  mesh_ = std::make_shared<const TriangleMesh>(std::move(v), std::move(f));
}

Eigen::Vector3d TubePhantom::centerline(double s) const {
  const double th = s / spec_.bend_radius;
  return {spec_.bend_radius * (1.0 - std::cos(th)), 0.0, spec_.bend_radius * std::sin(th)};
}

Eigen::Vector3d TubePhantom::tangent(double s) const {
  const double th = s / spec_.bend_radius;
  return {std::sin(th), 0.0, std::cos(th)};
}

Eigen::Vector3d TubePhantom::normal(double s) const {
  const double th = s / spec_.bend_radius;
  return {std::cos(th), 0.0, -std::sin(th)};
}

Eigen::Vector3d TubePhantom::binormal(double) const { return Eigen::Vector3d::UnitY(); }

double TubePhantom::wall_radius(double s, double phi) const {
  const double offset = spec_.fold_period / 2 + 0.3;
  const double crest = std::round((s - offset) / spec_.fold_period) * spec_.fold_period + offset;
  const double ds = (s - crest) / spec_.fold_width;
  const double fold = std::exp(-0.5 * ds * ds);
  double r = spec_.radius * (1.0 + spec_.ellipticity * std::cos(2.0 * (phi - spec_.twist * s))) *
             (1.0 - spec_.fold_depth * fold);
  for (const auto& bump : bumps_) {
    const double bs = (s - bump.s) / 2.5, bp = wrap_angle(phi - bump.phi) / 0.3;
    r += bump.height * std::exp(-0.5 * (bs * bs + bp * bp));
  }
  return r;
}

double TubePhantom::clearance(const Eigen::Vector3d& p) const {
  const double s = spec_.bend_radius * std::atan2(p.z(), spec_.bend_radius - p.x());
  const Eigen::Vector3d off = p - centerline(s);
  const double phi = std::atan2(off.dot(binormal(s)), off.dot(normal(s)));
  return wall_radius(s, phi) - off.norm();
}

TrajectoryKind parse_trajectory_kind(std::string_view name) {
  if (name == "simple") return TrajectoryKind::Simple;
  if (name == "moderate") return TrajectoryKind::Moderate;
  if (name == "complex") return TrajectoryKind::Complex;
  throw InvalidArgument("unknown trajectory kind '" + std::string(name) + "'");
}

std::string_view trajectory_name(TrajectoryKind k) {
  switch (k) {
    case TrajectoryKind::Simple: return "simple";
    case TrajectoryKind::Moderate: return "moderate";
    case TrajectoryKind::Complex: return "complex";
  }
  return "?";
}

std::vector<HomogeneousTransform> phantom_trajectory(const TubePhantom& phantom, TrajectoryKind kind,
                                                     const SyntheticOptions& opt) {
  if (opt.frames < 2) throw InvalidArgument("a trajectory needs at least 2 frames");
  const double s0 = -opt.travel / 2, s1 = opt.travel / 2;
  const Eigen::Vector3d a = phantom.centerline(s0), b = phantom.centerline(s1);
  std::vector<HomogeneousTransform> out;
  out.reserve(static_cast<std::size_t>(opt.frames));
  for (int i = 0; i < opt.frames; ++i) {
    const double u = static_cast<double>(i) / (opt.frames - 1);
    const double s = s0 + u * opt.travel;
    Eigen::Vector3d p;
    Eigen::Matrix3d r = Eigen::Matrix3d::Identity();  // looks down +z, the tube axis at the origin
    if (kind == TrajectoryKind::Simple) {
      p = (1.0 - u) * a + u * b;
    } else {
      const double w = 2.0 * kPi * opt.helix_turns * u;
      p = phantom.centerline(s) +
          opt.helix_radius * (std::cos(w) * phantom.normal(s) + std::sin(w) * phantom.binormal(s));
      if (kind == TrajectoryKind::Complex) {
        const double yaw = opt.orientation_amplitude * std::sin(2.0 * kPi * 1.5 * u);
        const double pitch = opt.orientation_amplitude * std::sin(2.0 * kPi * 2.5 * u + 0.7);
        r = Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitY()).toRotationMatrix() *
            Eigen::AngleAxisd(pitch, Eigen::Vector3d::UnitX()).toRotationMatrix();
      }
    }
    const double c = phantom.clearance(p);
    if (c < opt.wall_margin)
      throw GenerationError("pose " + std::to_string(i) + " of the " + std::string(trajectory_name(kind)) +
                            " trajectory is " + std::to_string(c) + " mm from the wall");
    out.push_back(HomogeneousTransform::from_rt(r, p));
  }
  return out;
}

Eigen::Matrix3d random_rotation(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Quaterniond q;
  do {
    q = Eigen::Quaterniond(n(rng), n(rng), n(rng), n(rng));
  } while (q.norm() < 1e-6);
  return orthonormalize(q.normalized().toRotationMatrix());
}

SyntheticCase generate_synthetic_case(const TubePhantom& phantom, const AccelStructure& accel,
                                      const CameraIntrinsics& k, TrajectoryKind kind, std::uint64_t seed,
                                      const SyntheticOptions& opt, const BoundsSpec& bounds) {
  if (bounds.dim() != 6) throw InvalidArgument("registration bounds must be 6-dimensional");
  if (!(opt.perturbation_fraction >= 0.0 && opt.perturbation_fraction <= 1.0))
    throw InvalidArgument("perturbation fraction must lie in [0, 1]");
  if (opt.depth_noise_sigma < 0.0 || opt.scale_jitter < 0.0 || opt.scale_jitter >= 1.0)
    throw InvalidArgument("invalid target degradation");

  SyntheticCase out;
  out.kind = kind;
  out.model_trajectory = phantom_trajectory(phantom, kind, opt);

  std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ULL + 17);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const Eigen::Vector3d t_gt(unit(rng) * opt.gt_translation, unit(rng) * opt.gt_translation,
                             unit(rng) * opt.gt_translation);
  out.t_gt = HomogeneousTransform::from_rt(random_rotation(rng()), t_gt);

  Eigen::VectorXd p(6);
  for (int i = 0; i < 6; ++i) {
    const double mid = 0.5 * (bounds.lower[i] + bounds.upper[i]);
    const double half = 0.5 * (bounds.upper[i] - bounds.lower[i]);
    p[i] = mid + opt.perturbation_fraction * half * unit(rng);
  }
  out.perturbation = TransformParams::from_vector(p);
  out.t_initial = out.t_gt * params_to_transform(out.perturbation).inverse();

  out.trajectory.reserve(out.model_trajectory.size());
  for (const auto& m : out.model_trajectory) out.trajectory.push_back(out.t_gt * m);

  std::normal_distribution<double> noise(0.0, 1.0);
  for (int idx : sample_keyframes(opt.frames, opt.keyframes)) {
    Keyframe kf;
    kf.frame_index = idx;
    kf.pose = out.trajectory[static_cast<std::size_t>(idx)];
    kf.target_depth = render_depth(accel, out.t_gt, k, kf.pose);
    const double scale = 1.0 + opt.scale_jitter * unit(rng);
    if (opt.scale_jitter > 0.0 || opt.depth_noise_sigma > 0.0)
      for (std::size_t i = 0; i < kf.target_depth.depth.size(); ++i) {
        if (!kf.target_depth.hit.data[i]) continue;
        double& d = kf.target_depth.depth.data[i];
        d = std::max(0.0, d * scale + opt.depth_noise_sigma * noise(rng));
      }
    out.keyframes.push_back(std::move(kf));
  }
  return out;
}

}  // namespace lumenreg
