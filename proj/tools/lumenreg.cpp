// lumenreg command line: registration, rendering, synthetic data, calibration,
// synchronization, dataset export and the alignment service.

#include "lumenreg/align_service.hpp"
#include "lumenreg/dataset_io.hpp"
#include "lumenreg/errors.hpp"
#include "lumenreg/mesh.hpp"
#include "lumenreg/poses.hpp"
#include "lumenreg/registration.hpp"
#include "lumenreg/render.hpp"
#include "lumenreg/synthetic.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace lumenreg;

namespace {

struct Common {
  std::string session;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out;
  int downsample = 0;
  std::string metric = "edge";
  std::string domain = "edge";
  int keyframes = 0;
};

json matrix_json(const HomogeneousTransform& t) {
  const auto m = t.row_major();
  return std::vector<double>(m.begin(), m.end());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
  if (!out) throw WriteError("cannot write " + path.string());
}

std::vector<double> read_series(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(path.string(), 0, "cannot open file");
  std::vector<double> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty() || line[0] == '#') continue;
    // Last comma-separated field, so "index,value" and "value" both work.
    const std::string field = line.substr(line.find_last_of(',') == std::string::npos ? 0 : line.find_last_of(',') + 1);
    try {
      out.push_back(std::stod(field));
    } catch (const std::exception&) {
      throw FormatError(path.string(), n, "invalid number '" + field + "'");
    }
  }
  return out;
}

int cmd_register(const Common& c) {
  const SessionFile s = load_session_file(c.session);
  RegistrationSession r = build_registration_session(s, c.keyframes > 0 ? std::optional<int>(c.keyframes) : std::nullopt);
  if (c.seed_set) r.optimizer.seed = c.seed;
  if (c.downsample) r.downsample = c.downsample;
  r.metric = parse_registration_metric(c.metric);
  r.domain = parse_domain(c.domain);
  r.validate();
  const RegistrationResult res = register_session(r);
  const auto p = res.best_params.to_array();
  json out{{"t_final", matrix_json(res.t_final)},
           {"params", std::vector<double>(p.begin(), p.end())},
           {"loss", res.final_loss},
           {"keyframe_similarity", res.keyframe_similarity},
           {"generations", res.trace.generation_count()},
           {"evaluations", res.trace.evaluations},
           {"stop_reason", res.trace.stop_reason},
           {"seconds", res.seconds}};
  if (!c.out.empty()) {
    fs::create_directories(c.out);
    write_pose_file(fs::path(c.out) / "t_final.txt", std::span(&res.t_final, 1));
    write_text(fs::path(c.out) / "registration.json", out.dump(2) + "\n");
  }
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_render(const Common& c, const std::string& transform_file) {
  if (c.out.empty()) throw InvalidArgument("render needs --out");
  const SessionFile s = load_session_file(c.session);
  RegistrationSession r = build_registration_session(s, c.keyframes > 0 ? std::optional<int>(c.keyframes) : std::nullopt);
  const HomogeneousTransform t = transform_file.empty() ? s.t_initial : read_transform_file(transform_file);
  const int scale = c.downsample ? c.downsample : 1;
  const EdgeConfig edges = s.edges.scaled(scale);
  fs::create_directories(c.out);
  for (const auto& kf : r.keyframes) {
    const DepthFrame d = render_depth(*r.accel, t, r.intrinsics, kf.pose, scale);
    char name[64];
    std::snprintf(name, sizeof name, "%04d_depth.png", kf.frame_index);
    write_png(fs::path(c.out) / name, encode_frame(d));
    const EdgeFrame e = edge_operator(d, edges);
    EncodedImage img(e.width, e.height, 1, 8);
    for (int y = 0; y < e.height; ++y)
      for (int x = 0; x < e.width; ++x) img.set_sample(x, y, 0, quantize(e(x, y), 255));
    std::snprintf(name, sizeof name, "%04d_edges.png", kf.frame_index);
    write_png(fs::path(c.out) / name, img);
  }
  std::cout << "rendered " << r.keyframes.size() << " keyframe(s) into " << c.out << "\n";
  return 0;
}

int cmd_synth(const Common& c, const std::string& trajectory, int frames, double noise, double jitter) {
  if (c.out.empty()) throw InvalidArgument("synth needs --out");
  const fs::path out = c.out;
  fs::create_directories(out / "targets");
  const TubePhantom phantom;
  const AccelStructure accel(phantom.mesh());
  const CameraIntrinsics k = CameraIntrinsics::colonoscope_reference().downsampled(c.downsample ? c.downsample : 4);
  SyntheticOptions opt;
  opt.frames = frames;
  opt.keyframes = c.keyframes > 0 ? c.keyframes : 5;
  opt.depth_noise_sigma = noise;
  opt.scale_jitter = jitter;
  const SyntheticCase sc =
      generate_synthetic_case(phantom, accel, k, parse_trajectory_kind(trajectory), c.seed_set ? c.seed : 1, opt);

  save_mesh(*phantom.mesh(), out / "phantom.obj");
  write_text(out / "intrinsics.json", intrinsics_to_json(k).dump(2) + "\n");
  write_pose_file(out / "poses.txt", sc.trajectory);
  write_pose_file(out / "t_initial.txt", std::span(&sc.t_initial, 1));
  write_pose_file(out / "t_gt.txt", std::span(&sc.t_gt, 1));
  json targets = json::array();
  for (const auto& kf : sc.keyframes) {
    char name[64];
    std::snprintf(name, sizeof name, "targets/%04d_depth.png", kf.frame_index);
    write_png(out / name, encode_frame(kf.target_depth));
    targets.push_back({{"frame", kf.frame_index}, {"depth", name}});
  }
  json session{{"mesh", "phantom.obj"},
               {"intrinsics", "intrinsics.json"},
               {"poses", "poses.txt"},
               {"targets", targets},
               {"t_initial", "t_initial.txt"},
               {"bounds", {{"rotation", 0.1}, {"translation", 7.5}}},
               {"seed", c.seed_set ? c.seed : 1},
               {"downsample", 2}};
  write_text(out / "session.json", session.dump(2) + "\n");
  std::cout << "wrote synthetic " << trajectory << " case to " << out << "\n";
  return 0;
}

int cmd_handeye(const std::string& robot, const std::string& camera, const Common& c) {
  const auto a = parse_pose_log(robot).poses();
  const auto b = parse_pose_log(camera).poses();
  if (a.size() != b.size()) throw InvalidArgument("robot and camera logs must hold the same number of poses");
  std::vector<std::pair<HomogeneousTransform, HomogeneousTransform>> pairs;
  for (std::size_t i = 0; i < a.size(); ++i) pairs.emplace_back(a[i], b[i]);
  const HomogeneousTransform x = solve_handeye(pairs);
  if (!c.out.empty()) write_pose_file(c.out, std::span(&x, 1));
  std::cout << json{{"x", matrix_json(x)}}.dump(2) << "\n";
  return 0;
}

int cmd_sync(const std::string& flow, const std::string& poses, int max_lag, double flow_hz, double pose_hz) {
  std::vector<double> a = read_series(flow);
  const auto log = parse_pose_log(poses, pose_hz);
  const auto filled = log.has_gaps() ? interpolate_gaps(log) : log;
  const auto p = filled.poses();
  std::vector<double> b = pose_displacement(p);
  if (flow_hz > 0.0 && pose_hz > 0.0 && flow_hz != pose_hz) b = resample_linear(b, pose_hz, flow_hz);
  const SyncResult r = synchronize(a, b, max_lag);
  std::cout << json{{"offset", r.offset}, {"peak_correlation", r.peak_correlation}, {"low_confidence", r.low_confidence}}.dump(2)
            << "\n";
  if (r.low_confidence) std::cerr << "warning: peak correlation below 0.5, offset is unreliable\n";
  return 0;
}

int cmd_export(const Common& c, const std::string& transform_file) {
  if (c.out.empty()) throw InvalidArgument("export needs --out");
  const SessionFile s = load_session_file(c.session);
  const auto accel = std::make_shared<const AccelStructure>(std::make_shared<const TriangleMesh>(load_mesh(s.mesh)));
  const HomogeneousTransform t = transform_file.empty() ? s.t_initial : read_transform_file(transform_file);
  const auto poses = session_camera_poses(s);
  const int scale = c.downsample ? c.downsample : 1;
  SequenceData seq;
  seq.mesh_reference = s.mesh.filename().string();
  seq.poses = poses;
  for (std::size_t i = 0; i < poses.size(); ++i) {
    seq.depth.push_back(render_depth(*accel, t, s.intrinsics, poses[i], scale));
    seq.normals.push_back(render_normals(*accel, t, s.intrinsics, poses[i], scale));
    seq.occlusion.push_back(render_occlusion(*accel, t, s.intrinsics, poses[i], scale));
    if (i > 0) seq.flow.push_back(render_flow(*accel, t, s.intrinsics, poses[i - 1], poses[i], scale));
  }
  seq.coverage = accumulate_coverage(*accel, t, s.intrinsics, poses, scale);
  const json manifest = write_sequence(c.out, seq);
  std::cout << "exported " << poses.size() << " frame(s), " << manifest["files"].size() << " files to " << c.out << "\n";
  return 0;
}

int cmd_serve(const Common& c, int port) {
  const SessionFile s = load_session_file(c.session);
  const fs::path commit = c.out.empty() ? s.path.parent_path() / "t_initial_committed.txt" : fs::path(c.out);
  auto service = std::make_shared<AlignService>(align_inputs_from_session(s, commit));
  AlignServer server(service);
  std::cout << "serving on http://127.0.0.1:" << port << " (commit path " << commit << ")\n" << std::flush;
  server.listen_blocking(port);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lumenreg: mesh-to-video registration and ground-truth rendering for endoscopy"};
  app.require_subcommand(1);
  Common c;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--session", c.session, "Session JSON file");
    sub->add_option("--seed", c.seed, "Random seed")->each([&](const std::string&) { c.seed_set = true; });
    sub->add_option("--out", c.out, "Output path");
    sub->add_option("--downsample", c.downsample, "Render downsample factor")->check(CLI::IsMember({1, 2, 4}));
    sub->add_option("--metric", c.metric, "Loss: edge|l1|l2|ncc|gc|dice");
    sub->add_option("--domain", c.domain, "Loss domain: edge|depth");
    sub->add_option("--keyframes", c.keyframes, "Number of keyframes");
  };

  auto* reg = app.add_subcommand("register", "Register the mesh to the session's target frames");
  add_common(reg);
  auto* render = app.add_subcommand("render", "Render depth and edge maps for the session keyframes");
  add_common(render);
  std::string transform_file;
  render->add_option("--transform", transform_file, "Model transform file (default: session T_initial)");
  auto* synth = app.add_subcommand("synth", "Generate a synthetic registration case");
  add_common(synth);
  std::string trajectory = "simple";
  int frames = 200;
  double noise = 0.0, jitter = 0.0;
  synth->add_option("--trajectory", trajectory, "simple|moderate|complex");
  synth->add_option("--frames", frames, "Trajectory length");
  synth->add_option("--noise", noise, "Target depth noise sigma, mm");
  synth->add_option("--scale-jitter", jitter, "Per-frame target depth scale jitter");
  auto* he = app.add_subcommand("calibrate-handeye", "Solve AX = XB from robot and camera pose logs");
  add_common(he);
  std::string robot, camera;
  he->add_option("--robot", robot, "Robot pose log")->required();
  he->add_option("--camera", camera, "Camera pose log")->required();
  auto* sync = app.add_subcommand("sync", "Find the frame offset between video motion and pose motion");
  add_common(sync);
  std::string flow_file, pose_file;
  int max_lag = 50;
  double flow_hz = 0.0, pose_hz = 0.0;
  sync->add_option("--flow", flow_file, "Per-frame motion magnitude series")->required();
  sync->add_option("--poses", pose_file, "Pose log")->required();
  sync->add_option("--max-lag", max_lag, "Largest offset searched");
  sync->add_option("--flow-rate", flow_hz, "Video frame rate, Hz");
  sync->add_option("--pose-rate", pose_hz, "Pose rate, Hz");
  auto* exp = app.add_subcommand("export", "Render and write a ground-truth sequence");
  add_common(exp);
  exp->add_option("--transform", transform_file, "Model transform file (default: session T_initial)");
  auto* serve = app.add_subcommand("serve", "Run the alignment service on 127.0.0.1");
  add_common(serve);
  int port = 8470;
  serve->add_option("--port", port, "Port");

  CLI11_PARSE(app, argc, argv);
  try {
    if ((reg->parsed() || render->parsed() || exp->parsed() || serve->parsed()) && c.session.empty())
      throw InvalidArgument("--session is required");
    if (reg->parsed()) return cmd_register(c);
    if (render->parsed()) return cmd_render(c, transform_file);
    if (synth->parsed()) return cmd_synth(c, trajectory, frames, noise, jitter);
    if (he->parsed()) return cmd_handeye(robot, camera, c);
    if (sync->parsed()) return cmd_sync(flow_file, pose_file, max_lag, flow_hz, pose_hz);
    if (exp->parsed()) return cmd_export(c, transform_file);
    if (serve->parsed()) return cmd_serve(c, port);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
