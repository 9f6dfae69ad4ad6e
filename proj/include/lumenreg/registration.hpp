#pragma once

#include "lumenreg/bvh.hpp"
#include "lumenreg/camera.hpp"
#include "lumenreg/cmaes.hpp"
#include "lumenreg/edges.hpp"
#include "lumenreg/frames.hpp"
#include "lumenreg/render.hpp"
#include "lumenreg/transform.hpp"

#include <memory>
#include <optional>
#include <string_view>
#include <vector>

namespace lumenreg {

/// A keyframe: camera pose (camera -> world) and its full-resolution target
/// depth. Target edges are derived once when a problem is prepared.
struct Keyframe {
  int frame_index = 0;
  HomogeneousTransform pose;
  DepthFrame target_depth;
};

enum class LossDomain { Edge, Depth };

/// `Proposed` is the blurred-edge product similarity (edge domain only).
enum class RegistrationMetric { Proposed, L1, L2, NCC, GC, DICE };

RegistrationMetric parse_registration_metric(std::string_view name);  // edge|l1|l2|ncc|gc|dice
LossDomain parse_domain(std::string_view name);                        // edge|depth

struct RegistrationSession {
  std::shared_ptr<const AccelStructure> accel;
  CameraIntrinsics intrinsics;          // full resolution
  std::vector<Keyframe> keyframes;
  HomogeneousTransform t_initial;       // model -> world
  BoundsSpec bounds = BoundsSpec::registration();
  CmaesConfig optimizer = registration_defaults();
  EdgeConfig edges;                     // full-resolution blur width
  int downsample = 4;
  LossDomain domain = LossDomain::Edge;
  RegistrationMetric metric = RegistrationMetric::Proposed;
  bool report_full_resolution = true;

  static CmaesConfig registration_defaults();
  /// Throws InvalidArgument on inconsistent contents.
  void validate() const;
};

/// Decimates a depth frame onto the grid of CameraIntrinsics::downsampled(factor)
/// by bilinear sampling at each block center (mean of the central 2 x 2
/// pixels). Misses count as the far clamp; a sample with no hit stays a miss.
DepthFrame decimate_depth(const DepthFrame& d, int factor);

/// T_i = T_initial * params_to_transform(p).
HomogeneousTransform candidate_transform(const HomogeneousTransform& t_initial, const TransformParams& p);

/// Session with targets prepared at one resolution. Immutable; evaluate()
/// may run concurrently.
class RegistrationProblem {
 public:
  RegistrationProblem(const RegistrationSession& session, int downsample);

  /// Objective for candidate parameters (relative to T_initial).
  double evaluate(const TransformParams& p) const;
  double evaluate_transform(const HomogeneousTransform& model) const;
  /// Per-keyframe mean product of rendered and target edges.
  std::vector<double> keyframe_similarity(const HomogeneousTransform& model) const;

  const CameraRays& rays() const { return rays_; }
  const std::vector<EdgeFrame>& target_edges() const { return target_edges_; }
  const std::vector<Grid<std::uint8_t>>& target_binary() const { return target_binary_; }
  const EdgeConfig& edge_config() const { return edges_; }
  EdgeFrame rendered_edges(const HomogeneousTransform& model, std::size_t keyframe) const;

 private:
  const RegistrationSession& session_;
  CameraRays rays_;
  EdgeConfig edges_;
  std::vector<EdgeFrame> target_edges_;
  std::vector<Grid<std::uint8_t>> target_binary_;
  std::vector<Grid<double>> target_depth_;
};

double evaluate_candidate(const RegistrationSession& session, const TransformParams& p);

struct RegistrationResult {
  HomogeneousTransform t_final;
  TransformParams best_params;
  OptimizationTrace trace;
  double final_loss = 0.0;                       // objective at best params, search resolution
  std::vector<double> keyframe_similarity;       // full resolution (or search if disabled)
  double seconds = 0.0;
};

RegistrationResult register_session(const RegistrationSession& session);

struct RegistrationError {
  double rotation_deg = 0.0;
  double translation_mm = 0.0;
};

/// T_error = T_gt^-1 T_final decomposed to Euler angles and translation;
/// returns the norms (degrees, mm).
RegistrationError registration_error(const HomogeneousTransform& t_gt, const HomogeneousTransform& t_final);

}  // namespace lumenreg
