#include "lumenreg/registration.hpp"

#include "lumenreg/errors.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <string>

namespace lumenreg {

RegistrationMetric parse_registration_metric(std::string_view name) {
  if (name == "edge" || name == "proposed") return RegistrationMetric::Proposed;
  if (name == "l1") return RegistrationMetric::L1;
  if (name == "l2") return RegistrationMetric::L2;
  if (name == "ncc") return RegistrationMetric::NCC;
  if (name == "gc") return RegistrationMetric::GC;
  if (name == "dice") return RegistrationMetric::DICE;
  throw InvalidArgument("unknown registration metric '" + std::string(name) + "'");
}

LossDomain parse_domain(std::string_view name) {
  if (name == "edge") return LossDomain::Edge;
  if (name == "depth") return LossDomain::Depth;
  throw InvalidArgument("unknown loss domain '" + std::string(name) + "'");
}

CmaesConfig RegistrationSession::registration_defaults() {
  CmaesConfig c;
  c.population = 100;
  c.sigma = 0.1;
  c.max_generations = 150;
  c.tol_x = 1e-3;
  return c;
}

void RegistrationSession::validate() const {
  if (!accel) throw InvalidArgument("session has no mesh");
  intrinsics.validate();
  if (keyframes.empty()) throw InvalidArgument("session has no keyframes");
  for (const auto& kf : keyframes)
    if (kf.target_depth.width() != intrinsics.width || kf.target_depth.height() != intrinsics.height)
      throw InvalidArgument("target depth size does not match the intrinsics for frame " +
                            std::to_string(kf.frame_index));
  if (bounds.dim() != 6) throw InvalidArgument("registration bounds must be 6-dimensional");
  optimizer.validate();
  edges.validate();
  if (downsample != 1 && downsample != 2 && downsample != 4)
    throw InvalidArgument("downsample factor must be 1, 2 or 4");
  if (domain == LossDomain::Depth && (metric == RegistrationMetric::Proposed || metric == RegistrationMetric::DICE))
    throw InvalidArgument("depth-domain registration supports l1, l2, ncc and gc");
}

DepthFrame decimate_depth(const DepthFrame& d, int factor) {
  if (factor == 1) return d;
  if (factor != 2 && factor != 4) throw InvalidArgument("decimation factor must be 1, 2 or 4");
  const int w = d.width() / factor, h = d.height() / factor;
  // The block center lies between the two middle rows and columns; averaging
  // that 2 x 2 neighborhood is the bilinear sample there.
  const int off = factor / 2 - 1;
  DepthFrame out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double sum = 0.0;
      int hits = 0;
      for (int j = 0; j < 2; ++j)
        for (int i = 0; i < 2; ++i) {
          const int sx = x * factor + off + i, sy = y * factor + off + j;
          if (d.hit(sx, sy)) {
            sum += std::clamp(d.depth(sx, sy), 0.0, kFarClampMm);
            ++hits;
          } else {
            sum += kFarClampMm;
          }
        }
      if (hits) {
        out.depth(x, y) = sum / 4.0;
        out.hit(x, y) = 1;
      }
    }
  return out;
}

HomogeneousTransform candidate_transform(const HomogeneousTransform& t_initial, const TransformParams& p) {
  return t_initial * params_to_transform(p);
}

namespace {

Grid<double> as_real(const Grid<std::uint8_t>& g) {
  Grid<double> out(g.width, g.height);
  for (std::size_t i = 0; i < g.size(); ++i) out.data[i] = g.data[i] ? 1.0 : 0.0;
  return out;
}

LossMetric to_loss_metric(RegistrationMetric m) {
  switch (m) {
    case RegistrationMetric::L1: return LossMetric::L1;
    case RegistrationMetric::L2: return LossMetric::L2;
    case RegistrationMetric::NCC: return LossMetric::NCC;
    case RegistrationMetric::GC: return LossMetric::GC;
    case RegistrationMetric::DICE: return LossMetric::DICE;
    case RegistrationMetric::Proposed: break;
  }
  throw InvalidArgument("proposed metric has no frame-loss equivalent");
}

}  // namespace

RegistrationProblem::RegistrationProblem(const RegistrationSession& session, int downsample)
    : session_(session),
      rays_(session.intrinsics.downsampled(downsample)),
      edges_(session.edges.scaled(downsample)) {
  session.validate();
  // Targets are fixed during the search, so their edges are extracted once.
  for (const auto& kf : session.keyframes) {
    const DepthFrame d = decimate_depth(kf.target_depth, downsample);
    const Grid<double> clamped = clamped_depth(d);
    target_depth_.push_back(clamped);
    target_binary_.push_back(canny(clamped, edges_.canny_low, edges_.canny_high));
    target_edges_.push_back(blur_edges(target_binary_.back(), edges_.blur_sigma, edges_.blur_radius));
  }
}

EdgeFrame RegistrationProblem::rendered_edges(const HomogeneousTransform& model, std::size_t keyframe) const {
  return edge_operator(render_depth(*session_.accel, model, rays_, session_.keyframes.at(keyframe).pose), edges_);
}

std::vector<double> RegistrationProblem::keyframe_similarity(const HomogeneousTransform& model) const {
  std::vector<double> out;
  for (std::size_t k = 0; k < session_.keyframes.size(); ++k) {
    const EdgeFrame e = rendered_edges(model, k);
    out.push_back(similarity(std::span(&e, 1), std::span(&target_edges_[k], 1)));
  }
  return out;
}

double RegistrationProblem::evaluate_transform(const HomogeneousTransform& model) const {
  const std::size_t n = session_.keyframes.size();
  if (session_.domain == LossDomain::Depth) {
    std::vector<Grid<double>> rendered;
    rendered.reserve(n);
    for (std::size_t k = 0; k < n; ++k)
      rendered.push_back(clamped_depth(render_depth(*session_.accel, model, rays_, session_.keyframes[k].pose)));
    return frame_loss(rendered, target_depth_, to_loss_metric(session_.metric));
  }
  if (session_.metric == RegistrationMetric::DICE) {
    std::vector<Grid<double>> rendered, target;
    for (std::size_t k = 0; k < n; ++k) {
      const DepthFrame d = render_depth(*session_.accel, model, rays_, session_.keyframes[k].pose);
      rendered.push_back(as_real(canny(clamped_depth(d), edges_.canny_low, edges_.canny_high)));
      target.push_back(as_real(target_binary_[k]));
    }
    return frame_loss(rendered, target, LossMetric::DICE);
  }
  std::vector<EdgeFrame> rendered;
  rendered.reserve(n);
  for (std::size_t k = 0; k < n; ++k) rendered.push_back(rendered_edges(model, k));
  if (session_.metric == RegistrationMetric::Proposed) return 1.0 - similarity(rendered, target_edges_);
  return frame_loss(rendered, target_edges_, to_loss_metric(session_.metric));
}

double RegistrationProblem::evaluate(const TransformParams& p) const {
  return evaluate_transform(candidate_transform(session_.t_initial, p));
}

double evaluate_candidate(const RegistrationSession& session, const TransformParams& p) {
  return RegistrationProblem(session, session.downsample).evaluate(p);
}

RegistrationResult register_session(const RegistrationSession& session) {
  const auto start = std::chrono::steady_clock::now();
  const RegistrationProblem problem(session, session.downsample);
  const Objective objective = [&](const Eigen::VectorXd& x) {
    return problem.evaluate(TransformParams::from_vector(x));
  };

  RegistrationResult result;
  result.trace = minimize(objective, session.bounds, session.optimizer);
  result.best_params = TransformParams::from_vector(result.trace.best_params);
  result.t_final = candidate_transform(session.t_initial, result.best_params);
  result.final_loss = problem.evaluate(result.best_params);
  if (session.report_full_resolution && session.downsample != 1) {
    const RegistrationProblem full(session, 1);
    result.keyframe_similarity = full.keyframe_similarity(result.t_final);
  } else {
    result.keyframe_similarity = problem.keyframe_similarity(result.t_final);
  }
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

RegistrationError registration_error(const HomogeneousTransform& t_gt, const HomogeneousTransform& t_final) {
  const TransformParams e = transform_to_params(t_gt.inverse() * t_final);
  RegistrationError out;
  out.rotation_deg = std::sqrt(e.alpha * e.alpha + e.beta * e.beta + e.gamma * e.gamma) * 180.0 / std::numbers::pi;
  out.translation_mm = std::sqrt(e.tx * e.tx + e.ty * e.ty + e.tz * e.tz);
  return out;
}

}  // namespace lumenreg
