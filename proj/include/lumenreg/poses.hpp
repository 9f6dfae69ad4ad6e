#pragma once

#include "lumenreg/transform.hpp"

#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace lumenreg {

struct PoseSample {
  double timestamp = 0.0;                     // seconds
  std::optional<HomogeneousTransform> pose;   // empty for a dropped sample
};

/// Time-ordered pose samples (robot end-effector or tracker poses, or camera
/// poses after mapping). Timestamps are strictly increasing.
struct PoseLog {
  std::vector<PoseSample> samples;
  double rate_hz = 0.0;

  /// Throws InvalidArgument when timestamps are not strictly increasing.
  void validate() const;
  bool has_gaps() const;
  /// All poses; throws InvalidArgument if any sample is missing.
  std::vector<HomogeneousTransform> poses() const;
};

struct SyncResult {
  int offset = 0;            // b[i + offset] best matches a[i]
  double peak_correlation = 0.0;
  bool low_confidence = false;  // peak correlation below 0.5
};

/// Lag in [-max_lag, max_lag] maximizing the zero-mean normalized
/// cross-correlation over the overlap of `a` and `b`; ties resolve toward the
/// smaller |lag|. Throws InvalidArgument for short input and NoSignal for a
/// constant series.
SyncResult synchronize(std::span<const double> flow_magnitude, std::span<const double> pose_displacement,
                       int max_lag);

/// Linear resampling of a uniformly sampled series to another rate over the
/// same time span.
std::vector<double> resample_linear(std::span<const double> series, double from_hz, double to_hz);

/// Per-sample translation displacement magnitude |t_i - t_{i-1}| (0 first).
std::vector<double> pose_displacement(std::span<const HomogeneousTransform> poses);

/// Solves A_ab X = X B_ab over all pose pairs a < b (A_ab = A_a^-1 A_b,
/// B_ab = B_a^-1 B_b): rotation by the log-map least squares closed form,
/// then translation by linear least squares. Throws RankDeficient when the
/// relative rotation axes do not span at least two directions.
HomogeneousTransform solve_handeye(std::span<const std::pair<HomogeneousTransform, HomogeneousTransform>> pairs);

/// B_i = B_cal X^-1 A_cal^-1 A_i X.
HomogeneousTransform robot_to_camera(const HomogeneousTransform& a_i, const HomogeneousTransform& x,
                                     const HomogeneousTransform& a_cal, const HomogeneousTransform& b_cal);

/// Indices {0, d, 2d, ..., (K-1)d} with d = floor(N / K).
std::vector<int> sample_keyframes(int frame_count, int keyframe_count);

/// Fills dropped samples: translation linear in time, rotation by slerp.
/// Throws InvalidArgument for a leading or trailing gap.
PoseLog interpolate_gaps(const PoseLog& log);

}  // namespace lumenreg
