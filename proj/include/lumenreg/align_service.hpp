#pragma once

#include "lumenreg/dataset_io.hpp"
#include "lumenreg/registration.hpp"

#include <json.hpp>

#include <array>
#include <filesystem>
#include <memory>
#include <shared_mutex>
#include <string>
#include <thread>

namespace lumenreg {

struct AlignmentState {
  TransformParams params;     // perturbation applied on the right of T_guess
  int keyframe = 0;
  double opacity = 0.5;       // weight of the rendered channel
  double step_mm = 0.5;
  double step_rad = 0.005;
};

enum class OverlayMode { Edge, Depth };
OverlayMode parse_overlay_mode(std::string_view name);  // edge-overlay | depth-overlay

struct AlignInputs {
  std::shared_ptr<const AccelStructure> accel;
  CameraIntrinsics intrinsics;           // full resolution
  std::vector<Keyframe> keyframes;       // poses and target depth
  HomogeneousTransform t_guess;          // model -> world
  EdgeConfig edges;
  std::filesystem::path commit_path;
  int preview_downsample = 4;
};

/// State and request handling of the alignment tool, independent of any
/// transport. Mutations are serialized; reads and renders may run
/// concurrently.
class AlignService {
 public:
  explicit AlignService(AlignInputs inputs);

  AlignmentState state() const;
  nlohmann::json state_json() const;
  /// Adds delta to the parameters. Non-finite input throws InvalidArgument
  /// and leaves the state unchanged.
  nlohmann::json nudge(const std::array<double, 6>& delta);
  nlohmann::json set_opacity(double value);
  /// 8-bit RGB overlay: rendered channel in red (scaled by opacity), target
  /// channel in green.
  EncodedImage render(int keyframe, OverlayMode mode) const;
  /// Writes T_guess * params_to_transform(params) as a single pose line.
  nlohmann::json commit();

  HomogeneousTransform current_transform() const;
  int keyframe_count() const { return static_cast<int>(inputs_.keyframes.size()); }

 private:
  AlignInputs inputs_;
  CameraRays preview_rays_;
  EdgeConfig preview_edges_;
  std::vector<Grid<std::uint8_t>> target_edges_;
  std::vector<Grid<double>> target_depth_;
  mutable std::shared_mutex mutex_;
  AlignmentState state_;
};

/// Builds service inputs from a session file (throws if the mesh or any
/// referenced file is unusable).
AlignInputs align_inputs_from_session(const SessionFile& s, const std::filesystem::path& commit_path);

/// HTTP front end bound to 127.0.0.1.
class AlignServer {
 public:
  explicit AlignServer(std::shared_ptr<AlignService> service);
  ~AlignServer();
  AlignServer(const AlignServer&) = delete;
  AlignServer& operator=(const AlignServer&) = delete;

  /// Starts listening in a background thread; port 0 picks a free port.
  /// Throws Error when the port cannot be bound. Returns the bound port.
  int start(int port = 0);
  /// Blocks serving on the calling thread.
  void listen_blocking(int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace lumenreg
