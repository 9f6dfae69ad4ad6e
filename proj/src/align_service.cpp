#include "lumenreg/align_service.hpp"

#include "lumenreg/errors.hpp"
#include "lumenreg/mesh.hpp"

#include <httplib.h>

#include <cmath>
#include <mutex>

namespace lumenreg {

using nlohmann::json;

OverlayMode parse_overlay_mode(std::string_view name) {
  if (name == "edge-overlay" || name == "edge") return OverlayMode::Edge;
  if (name == "depth-overlay" || name == "depth") return OverlayMode::Depth;
  throw InvalidArgument("unknown overlay mode '" + std::string(name) + "'");
}

AlignService::AlignService(AlignInputs inputs)
    : inputs_(std::move(inputs)),
      preview_rays_(inputs_.intrinsics.downsampled(inputs_.preview_downsample)),
      preview_edges_(inputs_.edges.scaled(inputs_.preview_downsample)) {
  if (!inputs_.accel) throw InvalidArgument("alignment needs a mesh");
  if (inputs_.keyframes.empty()) throw InvalidArgument("alignment needs at least one keyframe");
  for (const auto& kf : inputs_.keyframes) {
    const Grid<double> d = clamped_depth(decimate_depth(kf.target_depth, inputs_.preview_downsample));
    target_depth_.push_back(d);
    target_edges_.push_back(canny(d, preview_edges_.canny_low, preview_edges_.canny_high));
  }
}

AlignmentState AlignService::state() const {
  std::shared_lock lock(mutex_);
  return state_;
}

namespace {

json to_json(const AlignmentState& s, int keyframes) {
  const auto p = s.params.to_array();
  return {{"keyframes", keyframes},
          {"keyframe", s.keyframe},
          {"params", std::vector<double>(p.begin(), p.end())},
          {"step", {{"mm", s.step_mm}, {"rad", s.step_rad}}},
          {"opacity", s.opacity}};
}

}  // namespace

json AlignService::state_json() const { return to_json(state(), keyframe_count()); }

json AlignService::nudge(const std::array<double, 6>& delta) {
  std::unique_lock lock(mutex_);
  const TransformParams next = state_.params + TransformParams::from_array(delta);
  if (!next.finite()) throw InvalidArgument("nudge would make the parameters non-finite");
  state_.params = next;
  return to_json(state_, keyframe_count());
}

json AlignService::set_opacity(double value) {
  std::unique_lock lock(mutex_);
  if (!(value >= 0.0 && value <= 1.0)) throw InvalidArgument("opacity must lie in [0, 1]");
  state_.opacity = value;
  return to_json(state_, keyframe_count());
}

HomogeneousTransform AlignService::current_transform() const {
  return candidate_transform(inputs_.t_guess, state().params);
}

EncodedImage AlignService::render(int keyframe, OverlayMode mode) const {
  if (keyframe < 0 || keyframe >= keyframe_count())
    throw InvalidArgument("keyframe index " + std::to_string(keyframe) + " out of range");
  const AlignmentState s = state();
  const auto k = static_cast<std::size_t>(keyframe);
  const DepthFrame d = render_depth(*inputs_.accel, candidate_transform(inputs_.t_guess, s.params), preview_rays_,
                                    inputs_.keyframes[k].pose);
  const Grid<double> depth = clamped_depth(d);
  EncodedImage img(depth.width, depth.height, 3, 8);
  auto shade = [](double v) { return static_cast<std::uint16_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); };
  if (mode == OverlayMode::Edge) {
    const auto rendered = canny(depth, preview_edges_.canny_low, preview_edges_.canny_high);
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) {
        img.set_sample(x, y, 0, shade(rendered(x, y) * s.opacity));
        img.set_sample(x, y, 1, target_edges_[k](x, y) ? 255 : 0);
      }
  } else {
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) {
        img.set_sample(x, y, 0, shade((1.0 - depth(x, y) / kFarClampMm) * s.opacity));
        img.set_sample(x, y, 1, shade(1.0 - target_depth_[k](x, y) / kFarClampMm));
      }
  }
  return img;
}

json AlignService::commit() {
  // Holding the exclusive lock keeps the written file and the state in step.
  std::unique_lock lock(mutex_);
  const HomogeneousTransform t = candidate_transform(inputs_.t_guess, state_.params);
  write_pose_file(inputs_.commit_path, std::span(&t, 1));
  const auto m = t.row_major();
  return {{"path", inputs_.commit_path.string()}, {"matrix", std::vector<double>(m.begin(), m.end())}};
}

AlignInputs align_inputs_from_session(const SessionFile& s, const std::filesystem::path& commit_path) {
  if (!std::filesystem::exists(s.mesh)) throw InvalidArgument("mesh not found: " + s.mesh.string());
  const RegistrationSession r = build_registration_session(s);
  AlignInputs in;
  in.accel = r.accel;
  in.intrinsics = r.intrinsics;
  in.keyframes = r.keyframes;
  in.t_guess = s.t_initial;
  in.edges = s.edges;
  in.commit_path = commit_path;
  return in;
}

// ---- HTTP --------------------------------------------------------------------

struct AlignServer::Impl {
  std::shared_ptr<AlignService> service;
  httplib::Server server;
  std::thread thread;
};

namespace {

void send_json(httplib::Response& res, const json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

template <typename F>
void guarded(httplib::Response& res, F&& f) {
  try {
    f();
  } catch (const json::exception& e) {
    send_json(res, {{"error", std::string("malformed request: ") + e.what()}}, 400);
  } catch (const InvalidArgument& e) {
    send_json(res, {{"error", e.what()}}, 400);
  } catch (const std::exception& e) {
    send_json(res, {{"error", e.what()}}, 500);
  }
}

}  // namespace

AlignServer::AlignServer(std::shared_ptr<AlignService> service) : impl_(std::make_unique<Impl>()) {
  impl_->service = std::move(service);
  auto& svc = impl_->service;
  auto& srv = impl_->server;
  // SO_REUSEADDR only: the library default also sets SO_REUSEPORT, which lets
  // a second server silently share a busy port.
  srv.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const char*>(&yes), sizeof yes);
  });

  srv.Get("/api/session", [svc](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] { send_json(res, svc->state_json()); });
  });
  srv.Get(R"(/api/render/(-?\d+))", [svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const int k = std::stoi(req.matches[1].str());
      const std::string mode = req.has_param("mode") ? req.get_param_value("mode") : "edge-overlay";
      const auto png = png_bytes(svc->render(k, parse_overlay_mode(mode)));
      res.set_content(std::string(png.begin(), png.end()), "image/png");
    });
  });
  srv.Post("/api/nudge", [svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const json body = json::parse(req.body);
      const auto& d = body.at("delta");
      if (!d.is_array() || d.size() != 6) throw InvalidArgument("delta must hold 6 numbers");
      std::array<double, 6> delta{};
      for (std::size_t i = 0; i < 6; ++i) {
        if (!d[i].is_number()) throw InvalidArgument("delta must hold 6 numbers");
        delta[i] = d[i].get<double>();
      }
      send_json(res, svc->nudge(delta));
    });
  });
  srv.Post("/api/opacity", [svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const json body = json::parse(req.body);
      if (!body.at("value").is_number()) throw InvalidArgument("value must be a number");
      send_json(res, svc->set_opacity(body.at("value").get<double>()));
    });
  });
  srv.Post("/api/commit", [svc](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] { send_json(res, svc->commit()); });
  });
}

AlignServer::~AlignServer() { stop(); }

int AlignServer::start(int port) {
  auto& srv = impl_->server;
  const int bound = port == 0 ? srv.bind_to_any_port("127.0.0.1") : (srv.bind_to_port("127.0.0.1", port) ? port : -1);
  if (bound < 0) throw Error("cannot bind 127.0.0.1:" + std::to_string(port));
  impl_->thread = std::thread([&srv] { srv.listen_after_bind(); });
  srv.wait_until_ready();
  return bound;
}

void AlignServer::listen_blocking(int port) {
  if (!impl_->server.bind_to_port("127.0.0.1", port)) throw Error("cannot bind 127.0.0.1:" + std::to_string(port));
  impl_->server.listen_after_bind();
}

void AlignServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace lumenreg
