#include "lumenreg/cmaes.hpp"

#include "lumenreg/errors.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace lumenreg {

BoundsSpec::BoundsSpec(Eigen::VectorXd lo, Eigen::VectorXd hi) : lower(std::move(lo)), upper(std::move(hi)) {
  if (lower.size() != upper.size() || lower.size() == 0)
    throw InvalidArgument("bounds need matching, nonzero dimensions");
  for (Eigen::Index i = 0; i < lower.size(); ++i)
    if (!(lower[i] < upper[i])) throw InvalidArgument("bounds need lower < upper in every dimension");
}

BoundsSpec BoundsSpec::symmetric(const Eigen::VectorXd& half) { return BoundsSpec(-half, half); }

BoundsSpec BoundsSpec::registration(double theta, double t) {
  Eigen::VectorXd half(6);
  half << theta, theta, theta, t, t, t;
  return symmetric(half);
}

Eigen::VectorXd to_unit_space(const Eigen::VectorXd& p, const BoundsSpec& b, bool* clamped) {
  Eigen::VectorXd x = ((p - b.lower).array() / (b.upper - b.lower).array()).matrix();
  Eigen::VectorXd c = x.cwiseMax(0.0).cwiseMin(1.0);
  if (clamped) *clamped = c != x;
  return c;
}

Eigen::VectorXd from_unit_space(const Eigen::VectorXd& x, const BoundsSpec& b, bool* clamped) {
  const Eigen::VectorXd c = x.cwiseMax(0.0).cwiseMin(1.0);
  if (clamped) *clamped = c != x;
  return b.lower + (c.array() * (b.upper - b.lower).array()).matrix();
}

void CmaesConfig::validate() const {
  if (population < 4) throw InvalidArgument("population must be at least 4");
  if (!(sigma > 0.0)) throw InvalidArgument("sigma must be positive");
  if (max_generations < 0) throw InvalidArgument("generation budget must be nonnegative");
}

OptimizationTrace minimize(const Objective& objective, const BoundsSpec& bounds, const CmaesConfig& cfg) {
  cfg.validate();
  const int n = static_cast<int>(bounds.dim());
  const int lambda = cfg.population;
  const int mu = lambda / 2;

  Eigen::VectorXd weights(mu);
  for (int i = 0; i < mu; ++i) weights[i] = std::log((lambda + 1.0) / 2.0) - std::log(i + 1.0);
  weights /= weights.sum();
  const double mueff = 1.0 / weights.squaredNorm();

  const double cc = (4.0 + mueff / n) / (n + 4.0 + 2.0 * mueff / n);
  const double cs = (mueff + 2.0) / (n + mueff + 5.0);
  const double c1 = 2.0 / ((n + 1.3) * (n + 1.3) + mueff);
  const double cmu = std::min(1.0 - c1, 2.0 * (mueff - 2.0 + 1.0 / mueff) / ((n + 2.0) * (n + 2.0) + mueff));
  const double damps = 1.0 + 2.0 * std::max(0.0, std::sqrt((mueff - 1.0) / (n + 1.0)) - 1.0) + cs;
  const double chi_n = std::sqrt(static_cast<double>(n)) * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));

  Eigen::VectorXd mean = cfg.initial_unit_mean.value_or(Eigen::VectorXd::Constant(n, 0.5));
  if (mean.size() != n) throw InvalidArgument("initial mean dimension does not match bounds");
  double sigma = cfg.sigma;
  Eigen::MatrixXd cov = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd ps = Eigen::VectorXd::Zero(n), pc = Eigen::VectorXd::Zero(n);

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  OptimizationTrace trace;
  trace.best_loss = std::numeric_limits<double>::infinity();
  trace.min_covariance_eigenvalue = 1.0;

  Eigen::MatrixXd samples(n, lambda), steps(n, lambda);
  std::vector<Eigen::VectorXd> params(static_cast<std::size_t>(lambda));
  std::vector<double> losses(static_cast<std::size_t>(lambda));
  std::vector<int> order(static_cast<std::size_t>(lambda));

  const int budget = std::max(1, cfg.max_generations);
  for (int gen = 0; gen < budget; ++gen) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    const Eigen::VectorXd d = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    const Eigen::MatrixXd bd = eig.eigenvectors() * d.asDiagonal();
    const Eigen::MatrixXd inv_sqrt =
        eig.eigenvectors() * d.cwiseMax(1e-300).cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();

    // Sampling is sequential so the random stream does not depend on threads.
    for (int k = 0; k < lambda; ++k) {
      Eigen::VectorXd z(n);
      for (int i = 0; i < n; ++i) z[i] = normal(rng);
      const Eigen::VectorXd raw = mean + sigma * (bd * z);
      // Candidates are clamped into the box and the clamped point is what the
      // update sees, so the mean cannot drift outside the box.
      samples.col(k) = raw.cwiseMax(0.0).cwiseMin(1.0);
      steps.col(k) = (samples.col(k) - mean) / sigma;
      trace.clamped_candidates += samples.col(k) != raw;
      params[static_cast<std::size_t>(k)] = from_unit_space(samples.col(k), bounds);
    }

#pragma omp parallel for schedule(dynamic, 1) if (cfg.parallel)
    for (int k = 0; k < lambda; ++k) losses[static_cast<std::size_t>(k)] = objective(params[static_cast<std::size_t>(k)]);
    trace.evaluations += lambda;

    double worst = -std::numeric_limits<double>::infinity();
    for (double l : losses)
      if (std::isfinite(l)) worst = std::max(worst, l);
    if (!std::isfinite(worst)) worst = std::numeric_limits<double>::max();
    for (double& l : losses)
      if (!std::isfinite(l)) {
        l = worst;
        ++trace.nonfinite_evaluations;
      }

    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return losses[static_cast<std::size_t>(a)] < losses[static_cast<std::size_t>(b)];
    });

    const double gen_best = losses[static_cast<std::size_t>(order.front())];
    const double gen_worst = losses[static_cast<std::size_t>(order.back())];
    if (gen_best < trace.best_loss) {
      trace.best_loss = gen_best;
      trace.best_params = params[static_cast<std::size_t>(order.front())];
    }
    GenerationRecord rec;
    rec.best_loss = trace.best_loss;
    rec.generation_best = gen_best;
    rec.mean_loss = std::accumulate(losses.begin(), losses.end(), 0.0) / lambda;
    rec.best_params = trace.best_params;
    rec.sigma = sigma;
    trace.generations.push_back(rec);

    if (cfg.max_generations == 0) {
      trace.stop_reason = "initial population only";
      break;
    }

    // Recombination and adaptation.
    const Eigen::VectorXd old_mean = mean;
    mean.setZero();
    for (int i = 0; i < mu; ++i) mean += weights[i] * samples.col(order[static_cast<std::size_t>(i)]);
    const Eigen::VectorXd y_w = (mean - old_mean) / sigma;

    ps = (1.0 - cs) * ps + std::sqrt(cs * (2.0 - cs) * mueff) * (inv_sqrt * y_w);
    const double ps_norm = ps.norm();
    const bool hsig =
        ps_norm / std::sqrt(1.0 - std::pow(1.0 - cs, 2.0 * (gen + 1))) / chi_n < 1.4 + 2.0 / (n + 1.0);
    pc = (1.0 - cc) * pc + (hsig ? std::sqrt(cc * (2.0 - cc) * mueff) : 0.0) * y_w;

    Eigen::MatrixXd rank_mu = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < mu; ++i) {
      const auto y = steps.col(order[static_cast<std::size_t>(i)]);
      rank_mu += weights[i] * y * y.transpose();
    }
    cov = (1.0 - c1 - cmu) * cov + c1 * (pc * pc.transpose() + (hsig ? 0.0 : cc * (2.0 - cc)) * cov) +
          cmu * rank_mu;
    cov = 0.5 * (cov + cov.transpose());

    // Keep C positive definite: floor eigenvalues relative to the largest.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> check(cov);
    const double max_ev = check.eigenvalues().maxCoeff();
    double min_ev = check.eigenvalues().minCoeff();
    if (!(min_ev > 1e-14 * max_ev)) {
      const Eigen::VectorXd floored = check.eigenvalues().cwiseMax(1e-14 * max_ev);
      cov = check.eigenvectors() * floored.asDiagonal() * check.eigenvectors().transpose();
      cov = 0.5 * (cov + cov.transpose());
      min_ev = floored.minCoeff();
    }
    trace.min_covariance_eigenvalue = std::min(trace.min_covariance_eigenvalue, min_ev);

    sigma *= std::exp((cs / damps) * (ps_norm / chi_n - 1.0));

    if (gen_worst - gen_best < cfg.stagnation_tol) {
      trace.stop_reason = "loss spread below tolerance";
      break;
    }
    if (cfg.tol_x > 0.0 && sigma * cov.diagonal().cwiseSqrt().maxCoeff() < cfg.tol_x) {
      trace.stop_reason = "step size below tolerance";
      break;
    }
  }
  if (trace.stop_reason.empty()) trace.stop_reason = "generation budget";
  return trace;
}

}  // namespace lumenreg
