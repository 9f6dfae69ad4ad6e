#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace lumenreg {

/// Per-dimension box. lower < upper everywhere.
struct BoundsSpec {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  BoundsSpec() = default;
  BoundsSpec(Eigen::VectorXd lo, Eigen::VectorXd hi);
  /// Symmetric box [-half, half] per dimension.
  static BoundsSpec symmetric(const Eigen::VectorXd& half);
  /// +-theta radians for the three angles and +-t millimeters for translation.
  static BoundsSpec registration(double theta = 0.1, double t = 7.5);

  Eigen::Index dim() const { return lower.size(); }
};

/// Affine map of each dimension onto [0, 1]. Inputs outside the box are
/// clamped and `clamped` (when given) is set.
Eigen::VectorXd to_unit_space(const Eigen::VectorXd& p, const BoundsSpec& b, bool* clamped = nullptr);
Eigen::VectorXd from_unit_space(const Eigen::VectorXd& x, const BoundsSpec& b, bool* clamped = nullptr);

struct CmaesConfig {
  int population = 100;          // lambda
  double sigma = 0.1;            // initial step size in unit space
  int max_generations = 150;     // 0 evaluates the initial population only
  double stagnation_tol = 1e-12; // stop when a generation's loss spread falls below
  double tol_x = 0.0;            // stop when sigma * max sqrt(diag C) < tol_x (0 = off)
  std::uint64_t seed = 1;
  /// Initial mean in unit space; defaults to the box center.
  std::optional<Eigen::VectorXd> initial_unit_mean;
  bool parallel = true;

  void validate() const;
};

struct GenerationRecord {
  double best_loss = 0.0;        // best so far (non-increasing)
  double generation_best = 0.0;  // best within this generation
  double mean_loss = 0.0;
  Eigen::VectorXd best_params;   // best so far, parameter space
  double sigma = 0.0;
};

struct OptimizationTrace {
  std::vector<GenerationRecord> generations;
  Eigen::VectorXd best_params;
  double best_loss = 0.0;
  int evaluations = 0;
  int nonfinite_evaluations = 0;
  int clamped_candidates = 0;
  double min_covariance_eigenvalue = 0.0;  // smallest seen across updates
  std::string stop_reason;

  int generation_count() const { return static_cast<int>(generations.size()); }
};

using Objective = std::function<double(const Eigen::VectorXd& params)>;

/// (mu/mu_w, lambda)-CMA-ES in the unit cube of `bounds` with rank-one and
/// rank-mu covariance updates and cumulative step-size adaptation. Candidates
/// are clamped to the box before evaluation; the objective may be called
/// concurrently within a generation. Deterministic for a fixed seed.
OptimizationTrace minimize(const Objective& objective, const BoundsSpec& bounds, const CmaesConfig& cfg);

}  // namespace lumenreg
