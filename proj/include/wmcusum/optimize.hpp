#pragma once

// Rank-one watermark covariance maximizing the KL divergence under a budget
// on the LQG cost increase.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "wmcusum/linalg.hpp"
#include "wmcusum/plant.hpp"
#include "wmcusum/simulation.hpp"
#include "wmcusum/stats.hpp"

namespace wmcusum {

/// Σ_e = λ u uᵀ with ‖u‖ = 1, or an arbitrary PSD matrix.
struct WatermarkSpec {
  Matrix Sigma_e;
  Vector direction;  // empty for a full-rank specification
  double lambda = 0.0;

  bool is_rank_one() const { return direction.size() > 0; }

  static WatermarkSpec rank_one(const Vector& u, double lambda) {
    require(lambda >= 0.0, ErrorCode::InvalidArgument, "rank-one eigenvalue must be >= 0");
    const double norm = u.norm();
    require(norm > 0.0 && std::isfinite(norm), ErrorCode::DegenerateDirection,
            "rank-one direction must be nonzero");
    WatermarkSpec w;
    w.direction = u / norm;
    w.lambda = lambda;
    w.Sigma_e = lambda * w.direction * w.direction.transpose();
    return w;
  }

  static WatermarkSpec full(const Matrix& sigma_e, double zero_threshold = 1e-9) {
    require(is_psd(sigma_e, zero_threshold), ErrorCode::NotPositiveDefinite,
            "Sigma_e must be symmetric PSD");
    WatermarkSpec w;
    w.Sigma_e = symmetrize(sigma_e);
    return w;
  }
};

/// λ with ΔLQG(λ u uᵀ) = J for unit u, given N = Bᵀ Σ_L B + U.
inline double feasible_scale(const Vector& u, double budget, const Matrix& cost_matrix) {
  require(budget > 0.0, ErrorCode::InvalidArgument, "budget J must be positive");
  require(u.size() == cost_matrix.rows(), ErrorCode::DimensionMismatch,
          "direction size does not match the input dimension");
  const double norm = u.norm();
  require(norm > 0.0, ErrorCode::DegenerateDirection, "direction must be nonzero");
  const Vector unit = u / norm;
  const double curvature = unit.dot(cost_matrix * unit);
  require(curvature > 0.0, ErrorCode::DegenerateDirection,
          "uᵀ(BᵀΣ_L B + U)u is not positive");
  return budget / curvature;
}

inline double feasible_scale(const Vector& u, double budget, const SystemModel& sys,
                             const ClosedLoopDesign& d, const SolverOptions& opts = {}) {
  return feasible_scale(u, budget, watermark_cost_matrix(sys, d, opts));
}

/// α I with ΔLQG(α I) = J.
inline Matrix equal_power_sigma(double budget, const Matrix& cost_matrix) {
  require(budget > 0.0, ErrorCode::InvalidArgument, "budget J must be positive");
  const auto p = cost_matrix.rows();
  return (budget / cost_matrix.trace()) * Matrix::Identity(p, p);
}

struct OptimizerConfig {
  double budget = 1.0;
  int restarts = 16;
  double step_tolerance = 1e-6;
  int max_evals = 400;  // per restart
  std::uint64_t seed = 1;

  void validate() const {
    require(budget > 0.0, ErrorCode::InvalidArgument, "budget J must be positive");
    require(restarts >= 1, ErrorCode::InvalidArgument, "restarts must be >= 1");
    require(step_tolerance > 0.0, ErrorCode::InvalidArgument, "step_tolerance must be positive");
    require(max_evals >= 1, ErrorCode::InvalidArgument, "max_evals must be >= 1");
  }
};

struct OptimizationResult {
  WatermarkSpec watermark;
  double kld = 0.0;
  double delta_lqg = 0.0;
  // False when a smaller watermark along the optimal direction scored higher.
  bool constraint_active = true;
  int evaluations = 0;
};

namespace detail {

// Sign convention: first entry with magnitude above 1e-12 is positive.
inline Vector canonical_direction(const Vector& x) {
  Vector u = x / x.norm();
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    if (std::abs(u(i)) > 1e-12) {
      if (u(i) < 0.0) u = -u;
      break;
    }
  }
  return u;
}

inline bool lexicographically_less(const Vector& a, const Vector& b) {
  return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(),
                                      b.data() + b.size());
}

}  // namespace detail

/// Multi-start compass search over unit directions on the (p−1)-sphere.
/// Every evaluated watermark sits on the budget boundary ΔLQG = J.
inline OptimizationResult optimize_watermark(const SystemModel& sys, const ClosedLoopDesign& d,
                                             const OptimizerConfig& cfg, int watermark_lag = 1,
                                             const SolverOptions& opts = {},
                                             const SeriesOptions& series = {}) {
  cfg.validate();
  const auto p = sys.p();
  const Matrix cost = watermark_cost_matrix(sys, d, opts);
  int evals = 0;

  auto kld_at = [&](const Vector& u, double scale) {
    ++evals;
    const Matrix sigma_e = scale * u * u.transpose();
    return analyze(sys, d, sigma_e, watermark_lag, opts, series).kld;
  };
  auto objective = [&](const Vector& x) {
    const Vector u = detail::canonical_direction(x);
    return kld_at(u, feasible_scale(u, cfg.budget, cost));
  };

  struct Candidate {
    Vector u;
    double value;
  };
  auto better = [](const Candidate& a, const Candidate& b) {
    if (a.value > b.value + 1e-12) return true;
    if (b.value > a.value + 1e-12) return false;
    return detail::lexicographically_less(a.u, b.u);
  };

  std::mt19937_64 rng = NoiseStreams::engine(cfg.seed, NoiseStream::Watermark);
  std::normal_distribution<double> normal;
  std::vector<Candidate> finals;

  const int starts = p == 1 ? 1 : cfg.restarts;
  for (int s = 0; s < starts; ++s) {
    Vector x(p);
    do {
      for (Eigen::Index i = 0; i < p; ++i) x(i) = normal(rng);
    } while (x.norm() < 1e-8);
    x = detail::canonical_direction(x);
    double fx = objective(x);
    if (p > 1) {
      double step = 0.5;
      int used = 1;
      while (step >= cfg.step_tolerance && used < cfg.max_evals) {
        bool improved = false;
        for (Eigen::Index i = 0; i < p && !improved && used < cfg.max_evals; ++i) {
          for (double sign : {1.0, -1.0}) {
            Vector trial = x;
            trial(i) += sign * step;
            if (trial.norm() < 1e-12) continue;
            trial = detail::canonical_direction(trial);
            const double ft = objective(trial);
            ++used;
            if (ft > fx + 1e-15) {
              x = trial;
              fx = ft;
              improved = true;
              break;
            }
            if (used >= cfg.max_evals) break;
          }
        }
        if (!improved) step *= 0.5;
      }
    }
    finals.push_back({detail::canonical_direction(x), fx});
  }

  Candidate best = finals.front();
  for (const auto& c : finals)
    if (better(c, best)) best = c;

  const double baseline = analyze(sys, d, Matrix::Zero(p, p), watermark_lag, opts, series).kld;
  ++evals;
  if (!(best.value > baseline))
    throw Error(ErrorCode::NoImprovement,
                "no direction improves on the zero-watermark divergence " +
                    std::to_string(baseline));

  OptimizationResult r;
  const double lambda = feasible_scale(best.u, cfg.budget, cost);
  r.watermark = WatermarkSpec::rank_one(best.u, lambda);
  r.kld = analyze(sys, d, r.watermark.Sigma_e, watermark_lag, opts, series).kld;
  r.delta_lqg = (cost * r.watermark.Sigma_e).trace();
  for (double shrink : {0.25, 0.5, 0.75, 0.9})
    if (kld_at(best.u, shrink * lambda) > r.kld + 1e-12) r.constraint_active = false;
  r.evaluations = evals + 1;
  return r;
}

}  // namespace wmcusum
