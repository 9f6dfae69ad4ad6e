#pragma once

#include "lumenreg/camera.hpp"
#include "lumenreg/frames.hpp"
#include "lumenreg/poses.hpp"
#include "lumenreg/registration.hpp"
#include "lumenreg/transform.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lumenreg {

/// Raw image payload. 16-bit samples are stored big-endian, as in PNG.
struct EncodedImage {
  int width = 0;
  int height = 0;
  int channels = 1;    // 1 (gray) or 3 (RGB)
  int bit_depth = 16;  // 8 or 16
  std::vector<std::uint8_t> payload;

  EncodedImage() = default;
  EncodedImage(int w, int h, int channels, int bit_depth);

  std::size_t expected_size() const {
    return static_cast<std::size_t>(width) * height * channels * (bit_depth / 8);
  }
  std::uint16_t sample(int x, int y, int c) const;
  void set_sample(int x, int y, int c, std::uint16_t value);
  bool operator==(const EncodedImage&) const = default;
};

/// Quantization used by every encoder: round half away from zero.
std::uint16_t quantize(double value01, int max_code = 65535);

inline constexpr double kFlowRangePx = 20.0;

/// depth: 16-bit gray, round(clamp(d, 0, 100) / 100 * 65535); misses 65535.
EncodedImage encode_frame(const DepthFrame& d);
/// normals: 16-bit RGB, round((n + 1) / 2 * 65535) per component; misses (0, 0, 0).
EncodedImage encode_frame(const NormalFrame& n);
/// flow: 16-bit RGB, R/G = round((delta + 20) / 40 * 65535) after clamping to
/// +-20 px, B = 0; invalid pixels (0, 0, 0).
EncodedImage encode_frame(const FlowFrame& f);
/// occlusion: 8-bit gray, 255 occluded, 0 otherwise.
EncodedImage encode_frame(const OcclusionFrame& o);

/// Inverses of the encoders. Codes 65535 (depth) and all-zero RGB (normals,
/// flow) decode as misses / invalid. Throw FormatError on a layout mismatch.
DepthFrame decode_depth(const EncodedImage& img);
NormalFrame decode_normals(const EncodedImage& img);
FlowFrame decode_flow(const EncodedImage& img);
OcclusionFrame decode_occlusion(const EncodedImage& img);

std::vector<std::uint8_t> png_bytes(const EncodedImage& img);
EncodedImage decode_png(std::span<const std::uint8_t> bytes, const std::string& where = "png");
void write_png(const std::filesystem::path& path, const EncodedImage& img);
EncodedImage read_png(const std::filesystem::path& path);

std::string sha256_hex(std::span<const std::uint8_t> bytes);

/// One line: 16 comma-separated row-major values, 9 significant digits.
std::string format_pose_line(const HomogeneousTransform& t);
void write_pose_file(const std::filesystem::path& path, std::span<const HomogeneousTransform> poses);
/// Reads a pose log. Each non-empty, non-# line holds 16 values (timestamp =
/// line index / rate, or the index when rate is 0), 17 values (timestamp
/// first) or "timestamp,missing" for a dropped sample. Rotation blocks within
/// 1e-6 of orthonormal are projected onto SO(3). Throws FormatError naming
/// the line.
PoseLog parse_pose_log(const std::filesystem::path& path, double rate_hz = 0.0);
/// First transform of a pose file.
HomogeneousTransform read_transform_file(const std::filesystem::path& path);

CameraIntrinsics intrinsics_from_json(const nlohmann::json& j, const std::string& where = "intrinsics");
nlohmann::json intrinsics_to_json(const CameraIntrinsics& k);
/// JSON object with width, height, cx, cy, a0, a2, a3, a4, e, f, g.
CameraIntrinsics parse_intrinsics(const std::filesystem::path& path);

/// Lines "face_index,flag" with flag 1 = observed, 0 = unobserved.
std::string format_coverage(const CoverageMap& coverage);
CoverageMap parse_coverage(const std::filesystem::path& path);

struct SequenceData {
  std::vector<DepthFrame> depth;
  std::vector<NormalFrame> normals;
  std::vector<FlowFrame> flow;  // frames 1..N-1; the first frame has none
  std::vector<OcclusionFrame> occlusion;
  std::vector<HomogeneousTransform> poses;
  CoverageMap coverage;
  std::string mesh_reference;
};

struct WriteOptions {
  /// Called after each staged file; throwing from it aborts the write.
  std::function<void(const std::filesystem::path&)> on_file_staged;
};

/// Writes the sequence into `dir` through a staging directory that is
/// renamed into place once the manifest is written. An existing `dir` is
/// replaced only if it holds a manifest.json. Returns the manifest.
nlohmann::json write_sequence(const std::filesystem::path& dir, const SequenceData& seq,
                              const WriteOptions& opt = {});

/// A registration session file: JSON with paths relative to its directory.
struct SessionFile {
  std::filesystem::path path;
  std::filesystem::path mesh;
  CameraIntrinsics intrinsics;
  std::filesystem::path pose_log;
  double pose_rate_hz = 0.0;
  struct Target {
    int frame = 0;
    std::filesystem::path depth;
  };
  std::vector<Target> targets;
  HomogeneousTransform t_initial;
  double bound_rotation = 0.1;
  double bound_translation = 7.5;
  CmaesConfig cmaes;
  EdgeConfig edges;
  int downsample = 4;
  std::optional<HomogeneousTransform> handeye_x;      // pose log holds robot poses
  std::optional<HomogeneousTransform> handeye_a_cal;
  std::optional<HomogeneousTransform> handeye_b_cal;
  int sync_offset = 0;                                // pose index = frame + offset
  nlohmann::json raw;
};

SessionFile load_session_file(const std::filesystem::path& path);

/// Camera poses (camera -> world) per video frame, after hand-eye mapping,
/// gap filling and the synchronization offset.
std::vector<HomogeneousTransform> session_camera_poses(const SessionFile& s);

/// Builds the registration inputs: mesh, keyframe targets (every target, or
/// `keyframes` of them by uniform stride), bounds and optimizer settings.
RegistrationSession build_registration_session(const SessionFile& s, std::optional<int> keyframes = std::nullopt);

}  // namespace lumenreg
