#pragma once

// Monte Carlo campaigns: detection delay under replay, run length without
// attack, and SADD-vs-ΔLQG sweeps over watermark grids.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "wmcusum/benchmarks.hpp"
#include "wmcusum/detector.hpp"
#include "wmcusum/optimize.hpp"
#include "wmcusum/simulation.hpp"
#include "wmcusum/stats.hpp"

namespace wmcusum {

/// One watermark covariance in a sweep.
struct GridPoint {
  enum class Kind { EqualPower, Diagonal, RankOne, Optimized };
  Kind kind = Kind::EqualPower;
  // EqualPower: {α}; Diagonal: diagonal entries; RankOne: {u..., λ};
  // Optimized: {J}.
  std::vector<double> values;

  static GridPoint equal_power(double alpha) { return {Kind::EqualPower, {alpha}}; }
  static GridPoint optimized(double budget) { return {Kind::Optimized, {budget}}; }
};

struct CampaignConfig {
  int trials = 500;
  int arl_trials = 200;
  std::int64_t nu = 250;
  std::int64_t k0 = 200;
  // The detector is started this many steps before ν. A run that alarms
  // in that window is a false alarm.
  std::int64_t monitor_lead = 20;
  // Attacked steps simulated before a delay trial is censored.
  std::int64_t horizon_cap = 5000;
  std::int64_t burn_in = kDefaultBurnIn;
  std::uint64_t seed = 1;
  double zero_threshold = 1e-9;
  std::vector<GridPoint> grid;

  void validate() const {
    require(trials >= 1, ErrorCode::InvalidArgument, "trials must be >= 1");
    require(arl_trials >= 1, ErrorCode::InvalidArgument, "arl_trials must be >= 1");
    ReplayAttack{nu, k0}.validate();
    require(monitor_lead >= 0 && monitor_lead < nu, ErrorCode::InvalidArgument,
            "monitor_lead must lie in [0, nu)");
    require(horizon_cap >= 1, ErrorCode::InvalidArgument, "horizon_cap must be >= 1");
    require(burn_in >= 0, ErrorCode::InvalidArgument, "burn_in must be >= 0");
  }
};

struct AddEstimate {
  double mean = 0.0;
  double ci_halfwidth = 0.0;  // 95 % normal approximation
  int detected = 0;           // trials contributing to the mean
  int false_alarms = 0;       // alarmed before ν
  int censored = 0;           // no alarm within horizon_cap attacked steps
  int trials = 0;
};

struct ArlEstimate {
  double mean = 0.0;
  double ci_halfwidth = 0.0;
  int capped = 0;
  int trials = 0;
  std::int64_t cap = 0;
};

namespace detail {

inline std::pair<double, double> mean_ci(const std::vector<double>& xs) {
  if (xs.empty()) return {std::numeric_limits<double>::quiet_NaN(), 0.0};
  double sum = 0.0;
  for (double x : xs) sum += x;
  const double mean = sum / static_cast<double>(xs.size());
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  return {mean, 1.96 * sd / std::sqrt(static_cast<double>(xs.size()))};
}

}  // namespace detail

/// Worst-case detection delay: the statistic is zeroed at ν, and the delay
/// counts attacked samples up to and including the alarm.
inline AddEstimate estimate_add(const SystemModel& sys, const ClosedLoopDesign& d,
                                const Matrix& sigma_e, double arl_h, int watermark_lag,
                                const CampaignConfig& c, const SolverOptions& opts = {}) {
  c.validate();
  const DetectionAnalysis a = analyze(sys, d, sigma_e, watermark_lag, opts);
  require(a.kld > c.zero_threshold, ErrorCode::ZeroDivergence,
          "KL divergence is zero; the replay cannot be detected");
  const LlrModel model = LlrModel::from_analysis(a);
  const ReplayAttack attack{c.nu, c.k0};

  AddEstimate r;
  r.trials = c.trials;
  std::vector<double> delays;
  delays.reserve(static_cast<std::size_t>(c.trials));
  for (int t = 0; t < c.trials; ++t) {
    Simulator sim(sys, d, sigma_e, derive_seed(c.seed, static_cast<std::uint64_t>(t)), attack,
                  c.burn_in, c.zero_threshold);
    CusumDetector det(model, arl_h, watermark_lag);
    const std::int64_t start = c.nu - c.monitor_lead;
    // The lagged-watermark history is filled before monitoring starts.
    while (sim.state().k < start - watermark_lag) sim.step();
    bool false_alarm = false;
    while (sim.state().k < c.nu) {
      const bool monitoring = sim.state().k >= start;
      const StepRecord s = sim.step();
      if (det.update(s.gamma, s.e).alarm && monitoring) {
        false_alarm = true;
        break;
      }
      if (!monitoring) det.reset_statistic();
    }
    if (false_alarm) {
      ++r.false_alarms;
      continue;
    }
    det.reset_statistic();
    std::int64_t delay = 0;
    bool alarmed = false;
    while (delay < c.horizon_cap) {
      const StepRecord s = sim.step();
      ++delay;
      if (det.update(s.gamma, s.e).alarm) {
        alarmed = true;
        break;
      }
    }
    if (!alarmed) ++r.censored;
    delays.push_back(static_cast<double>(delay));
  }
  if (delays.empty())
    throw Error(ErrorCode::AllFalseAlarms,
                "all " + std::to_string(c.trials) + " trials alarmed before the attack");
  r.detected = static_cast<int>(delays.size());
  std::tie(r.mean, r.ci_halfwidth) = detail::mean_ci(delays);
  return r;
}

/// Run length to the first alarm without attack, capped at 50·arl_h steps.
inline ArlEstimate estimate_arl(const SystemModel& sys, const ClosedLoopDesign& d,
                                const Matrix& sigma_e, const LlrModel& model, double arl_h,
                                int watermark_lag, int trials, std::uint64_t seed,
                                std::int64_t burn_in = kDefaultBurnIn,
                                double zero_threshold = 1e-9) {
  require(trials >= 1, ErrorCode::InvalidArgument, "trials must be >= 1");
  ArlEstimate r;
  r.trials = trials;
  r.cap = static_cast<std::int64_t>(std::ceil(50.0 * arl_h));
  std::vector<double> lengths;
  lengths.reserve(static_cast<std::size_t>(trials));
  for (int t = 0; t < trials; ++t) {
    Simulator sim(sys, d, sigma_e, derive_seed(seed, static_cast<std::uint64_t>(t)),
                  std::nullopt, burn_in, zero_threshold);
    CusumDetector det(model, arl_h, watermark_lag);
    std::int64_t k = 0;
    bool alarmed = false;
    while (k < r.cap) {
      const StepRecord s = sim.step();
      ++k;
      if (det.update(s.gamma, s.e).alarm) {
        alarmed = true;
        break;
      }
    }
    if (!alarmed) ++r.capped;
    lengths.push_back(static_cast<double>(k));
  }
  std::tie(r.mean, r.ci_halfwidth) = detail::mean_ci(lengths);
  return r;
}

inline ArlEstimate estimate_arl(const SystemModel& sys, const ClosedLoopDesign& d,
                                const Matrix& sigma_e, double arl_h, int watermark_lag,
                                int trials, std::uint64_t seed, const SolverOptions& opts = {}) {
  const LlrModel model =
      LlrModel::from_analysis(analyze(sys, d, sigma_e, watermark_lag, opts));
  return estimate_arl(sys, d, sigma_e, model, arl_h, watermark_lag, trials, seed);
}

/// Raw second moments of the replayed loop, pooled over independent runs.
/// Each run contributes the attacked steps k ∈ [ν + warm, ν + k0), i.e. the
/// first pass over the tape after the estimator transient has decayed.
struct ReplayMoments {
  Matrix Sigma_gamma_tilde;  // E[γ̃ γ̃ᵀ]
  Matrix cross;              // E[γ̃_k e_{k−lag}ᵀ]
  Matrix Exz;                // E[x̂ᶠ_{k−1|k−1} z_kᵀ]
  Matrix Ezz0;               // E[z_k z_kᵀ]
  std::int64_t samples = 0;
  std::int64_t warm = 0;
  int runs = 0;
};

inline ReplayMoments sample_replay_moments(const SystemModel& sys, const ClosedLoopDesign& d,
                                           const Matrix& sigma_e, std::int64_t k0,
                                           std::int64_t samples, std::uint64_t seed,
                                           int lag = 1, double transient_tolerance = 1e-4,
                                           std::int64_t burn_in = kDefaultBurnIn) {
  require(samples >= 1, ErrorCode::InvalidArgument, "samples must be >= 1");
  require(lag >= 1, ErrorCode::InvalidArgument, "lag must be >= 1");
  const double rho = spectral_radius(d.Acl);
  std::int64_t warm = rho > 0.0 ? static_cast<std::int64_t>(
                                      std::ceil(std::log(transient_tolerance) / std::log(rho)))
                                : 1;
  warm = std::max<std::int64_t>(warm, lag);
  require(warm < k0, ErrorCode::InvalidArgument,
          "k0 = " + std::to_string(k0) + " leaves no samples after the " +
              std::to_string(warm) + "-step transient");
  const auto m = sys.m(), p = sys.p(), n = sys.n();
  const std::int64_t nu = k0 + 1;

  ReplayMoments r;
  r.warm = warm;
  r.Sigma_gamma_tilde = Matrix::Zero(m, m);
  r.cross = Matrix::Zero(m, p);
  r.Exz = Matrix::Zero(n, m);
  r.Ezz0 = Matrix::Zero(m, m);
  while (r.samples < samples) {
    Simulator sim(sys, d, sigma_e, derive_seed(seed, static_cast<std::uint64_t>(r.runs)),
                  ReplayAttack{nu, k0}, burn_in);
    ++r.runs;
    std::deque<Vector> e_hist;
    Vector xf_prev;
    while (sim.state().k < nu + k0 && r.samples < samples) {
      const Vector xpred = sim.state().xhat_pred;
      const std::int64_t k = sim.state().k;
      const StepRecord s = sim.step();
      if (k >= nu + warm) {
        r.Sigma_gamma_tilde += s.gamma * s.gamma.transpose();
        r.cross += s.gamma * e_hist.front().transpose();
        r.Exz += xf_prev * s.y.transpose();
        r.Ezz0 += s.y * s.y.transpose();
        ++r.samples;
      }
      xf_prev = xpred + d.K * s.gamma;
      e_hist.push_back(s.e);
      if (static_cast<int>(e_hist.size()) > lag) e_hist.pop_front();
    }
  }
  const double inv = 1.0 / static_cast<double>(r.samples);
  r.Sigma_gamma_tilde *= inv;
  r.cross *= inv;
  r.Exz *= inv;
  r.Ezz0 *= inv;
  return r;
}

struct SweepRow {
  double delta_lqg = 0.0;
  std::string sigma_e_kind;    // diag | rank1
  std::vector<double> sigma_e_params;
  double kld_nats = 0.0;
  double sadd_theory = 0.0;
  double add_empirical = 0.0;  // NaN when the divergence is zero
  double add_ci = 0.0;
  int false_alarm_trials = 0;
  int trials = 0;
  std::uint64_t seed = 0;

  bool operator==(const SweepRow&) const = default;
};

struct SweepResult {
  std::vector<SweepRow> rows;
};

/// Σ_e for one grid point, in the diag/rank1 descriptor form written to CSV.
struct ResolvedWatermark {
  Matrix Sigma_e;
  std::string kind;
  std::vector<double> params;
};

inline ResolvedWatermark resolve_grid_point(const SystemModel& sys, const ClosedLoopDesign& d,
                                            const GridPoint& gp, int watermark_lag,
                                            std::uint64_t seed, const SolverOptions& opts = {}) {
  const auto p = sys.p();
  ResolvedWatermark w;
  switch (gp.kind) {
    case GridPoint::Kind::EqualPower: {
      require(gp.values.size() == 1 && gp.values[0] >= 0.0, ErrorCode::InvalidArgument,
              "equal-power grid point needs one α >= 0");
      w.Sigma_e = gp.values[0] * Matrix::Identity(p, p);
      w.kind = "diag";
      w.params.assign(static_cast<std::size_t>(p), gp.values[0]);
      break;
    }
    case GridPoint::Kind::Diagonal: {
      require(static_cast<Eigen::Index>(gp.values.size()) == p, ErrorCode::DimensionMismatch,
              "diagonal grid point needs p = " + std::to_string(p) + " entries");
      Vector v(p);
      for (Eigen::Index i = 0; i < p; ++i) {
        require(gp.values[i] >= 0.0, ErrorCode::InvalidArgument,
                "diagonal watermark variances must be >= 0");
        v(i) = gp.values[i];
      }
      w.Sigma_e = v.asDiagonal();
      w.kind = "diag";
      w.params = gp.values;
      break;
    }
    case GridPoint::Kind::RankOne: {
      require(static_cast<Eigen::Index>(gp.values.size()) == p + 1,
              ErrorCode::DimensionMismatch,
              "rank-one grid point needs p + 1 = " + std::to_string(p + 1) + " values");
      Vector u(p);
      for (Eigen::Index i = 0; i < p; ++i) u(i) = gp.values[i];
      const auto spec = WatermarkSpec::rank_one(u, gp.values.back());
      w.Sigma_e = spec.Sigma_e;
      w.kind = "rank1";
      w.params.assign(spec.direction.data(), spec.direction.data() + p);
      w.params.push_back(spec.lambda);
      break;
    }
    case GridPoint::Kind::Optimized: {
      require(gp.values.size() == 1, ErrorCode::InvalidArgument,
              "optimized grid point needs one budget J");
      OptimizerConfig oc;
      oc.budget = gp.values[0];
      oc.seed = seed;
      const auto res = optimize_watermark(sys, d, oc, watermark_lag, opts);
      w.Sigma_e = res.watermark.Sigma_e;
      w.kind = "rank1";
      w.params.assign(res.watermark.direction.data(), res.watermark.direction.data() + p);
      w.params.push_back(res.watermark.lambda);
      break;
    }
  }
  return w;
}

/// One row per grid point; every row uses the campaign seed, so rows are
/// paired across watermark covariances. Rows are sorted by ΔLQG.
inline SweepResult sweep_sadd_vs_dlqg(const SystemModel& sys, double arl_h, int watermark_lag,
                                      const CampaignConfig& c, const SolverOptions& opts = {}) {
  c.validate();
  require(!c.grid.empty(), ErrorCode::InvalidArgument, "watermark grid is empty");
  const ClosedLoopDesign d = design(sys, opts);
  SweepResult out;
  for (const GridPoint& gp : c.grid) {
    const ResolvedWatermark w = resolve_grid_point(sys, d, gp, watermark_lag, c.seed, opts);
    const DetectionAnalysis a = analyze(sys, d, w.Sigma_e, watermark_lag, opts);
    SweepRow row;
    row.delta_lqg = a.delta_lqg;
    row.sigma_e_kind = w.kind;
    row.sigma_e_params = w.params;
    row.kld_nats = a.kld;
    row.trials = c.trials;
    row.seed = c.seed;
    if (a.kld > c.zero_threshold) {
      row.sadd_theory = sadd_theory(a.kld, arl_h, c.zero_threshold);
      const AddEstimate add = estimate_add(sys, d, w.Sigma_e, arl_h, watermark_lag, c, opts);
      row.add_empirical = add.mean;
      row.add_ci = add.ci_halfwidth;
      row.false_alarm_trials = add.false_alarms;
    } else {
      row.sadd_theory = std::numeric_limits<double>::infinity();
      row.add_empirical = std::numeric_limits<double>::quiet_NaN();
    }
    out.rows.push_back(std::move(row));
  }
  std::stable_sort(out.rows.begin(), out.rows.end(),
                   [](const SweepRow& a, const SweepRow& b) { return a.delta_lqg < b.delta_lqg; });
  return out;
}

/// Default grid of a benchmark: its equal-power α list.
inline CampaignConfig default_campaign(const BenchmarkSystem& b) {
  CampaignConfig c;
  for (double a : b.default_alphas) c.grid.push_back(GridPoint::equal_power(a));
  return c;
}

}  // namespace wmcusum
