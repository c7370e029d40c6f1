// Command-line front end for the watermarked-replay detection library.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "wmcusum.hpp"

namespace {

using namespace wmcusum;

struct Options {
  std::string system = "system-a";
  std::optional<double> arl_h;
  std::optional<int> lag;
  std::optional<std::int64_t> k0;
  std::optional<std::int64_t> nu;
  std::optional<int> trials;
  std::optional<std::uint64_t> seed;
  std::string out;
  double zero_threshold = 1e-9;
  std::vector<std::string> sigma_e;
  std::vector<double> alphas;
  std::vector<double> budgets;
  std::int64_t horizon = 1000;
  bool attack = false;
  int restarts = 16;
};

struct Loaded {
  SystemModel model;
  double arl_h = 1000.0;
  int lag = 1;
  CampaignConfig campaign;
};

Loaded load(const Options& o) {
  Loaded l;
  if (is_benchmark_name(o.system)) {
    const BenchmarkSystem b = benchmark(o.system);
    l.model = b.model;
    l.arl_h = b.arl_h;
    l.lag = b.default_watermark_lag;
    l.campaign = default_campaign(b);
  } else {
    const ConfigFile f = parse_config_file(o.system);
    l.model = f.model;
    if (f.campaign.arl_h) l.arl_h = *f.campaign.arl_h;
    if (f.campaign.watermark_lag) l.lag = *f.campaign.watermark_lag;
    f.campaign.apply(l.campaign);
  }
  if (o.arl_h) l.arl_h = *o.arl_h;
  if (o.lag) l.lag = *o.lag;
  auto& c = l.campaign;
  if (o.trials) c.trials = c.arl_trials = *o.trials;
  if (o.k0) c.k0 = *o.k0;
  if (o.nu) c.nu = *o.nu;
  if (o.seed) c.seed = *o.seed;
  c.zero_threshold = o.zero_threshold;
  require(l.arl_h > 1.0, ErrorCode::InvalidArgument, "--arl-h must exceed 1");
  require(l.lag >= 1, ErrorCode::InvalidArgument, "--lag must be >= 1");
  return l;
}

SolverOptions solver(const Options& o) {
  SolverOptions s;
  s.zero_threshold = o.zero_threshold;
  return s;
}

// Output goes to --out when given, stdout otherwise.
class Sink {
 public:
  explicit Sink(const std::string& path) {
    if (!path.empty()) {
      file_.open(path);
      if (!file_) throw Error(ErrorCode::IoError, "cannot open '" + path + "' for writing");
    }
  }
  std::ostream& operator*() { return file_.is_open() ? file_ : std::cout; }

 private:
  std::ofstream file_;
};

std::string fmt(const Matrix& M) {
  std::ostringstream s;
  s << "[";
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    s << (i ? "; " : "");
    for (Eigen::Index j = 0; j < M.cols(); ++j) s << (j ? ", " : "") << format_double(M(i, j));
  }
  s << "]";
  return s.str();
}

Matrix single_watermark(const Options& o, const Loaded& l, const ClosedLoopDesign& d) {
  require(o.sigma_e.size() == 1, ErrorCode::InvalidArgument,
          "exactly one --sigma-e is required for this command");
  const GridPoint gp = parse_sigma_e(o.sigma_e.front(), l.model.p());
  return resolve_grid_point(l.model, d, gp, l.lag, l.campaign.seed, solver(o)).Sigma_e;
}

void run_design(const Options& o) {
  const Loaded l = load(o);
  const ClosedLoopDesign d = design(l.model, solver(o));
  Sink sink(o.out);
  auto& out = *sink;
  out << "P = " << fmt(d.P) << "\n";
  out << "K = " << fmt(d.K) << "\n";
  out << "S = " << fmt(d.S) << "\n";
  out << "L = " << fmt(d.L) << "\n";
  out << "Sigma_gamma = " << fmt(d.Sigma_gamma) << "\n";
  out << "spectral_radius_estimator = " << format_double(spectral_radius(d.Acl)) << "\n";
  out << "spectral_radius_feedback = "
      << format_double(spectral_radius(feedback_matrix(l.model, d))) << "\n";
}

void run_kld(const Options& o) {
  const Loaded l = load(o);
  const ClosedLoopDesign d = design(l.model, solver(o));
  const Matrix sigma_e = single_watermark(o, l, d);
  const DetectionAnalysis a = analyze(l.model, d, sigma_e, l.lag, solver(o));
  Sink sink(o.out);
  auto& out = *sink;
  out << "Sigma_e = " << fmt(a.Sigma_e) << "\n";
  out << "watermark_lag = " << l.lag << "\n";
  out << "Sigma_gamma_tilde = " << fmt(a.Sigma_gamma_tilde) << "\n";
  out << "kld_nats = " << format_double(a.kld) << "\n";
  out << "arl_h = " << format_double(l.arl_h) << "\n";
  out << "sadd_theory = "
      << format_double(a.kld > o.zero_threshold ? sadd_theory(a.kld, l.arl_h, o.zero_threshold)
                                                : std::numeric_limits<double>::infinity())
      << "\n";
  out << "delta_lqg = " << format_double(a.delta_lqg) << "\n";
}

void run_delta_lqg(const Options& o) {
  const Loaded l = load(o);
  const ClosedLoopDesign d = design(l.model, solver(o));
  const Matrix sigma_e = single_watermark(o, l, d);
  Sink sink(o.out);
  *sink << "delta_lqg = " << format_double(delta_lqg(l.model, d, sigma_e, solver(o))) << "\n";
}

void run_optimize(const Options& o) {
  const Loaded l = load(o);
  require(!o.budgets.empty(), ErrorCode::InvalidArgument, "--budgets is required");
  const ClosedLoopDesign d = design(l.model, solver(o));
  const Matrix cost = watermark_cost_matrix(l.model, d, solver(o));
  Sink sink(o.out);
  auto& out = *sink;
  out << "budget,direction,lambda,kld_nats,delta_lqg,equal_power_kld,constraint_active\n";
  for (double j : o.budgets) {
    OptimizerConfig cfg;
    cfg.budget = j;
    cfg.seed = l.campaign.seed;
    cfg.restarts = o.restarts;
    const OptimizationResult r = optimize_watermark(l.model, d, cfg, l.lag, solver(o));
    const double eq = analyze(l.model, d, equal_power_sigma(j, cost), l.lag, solver(o)).kld;
    std::string dir;
    for (Eigen::Index i = 0; i < r.watermark.direction.size(); ++i)
      dir += (i ? ";" : "") + format_double(r.watermark.direction(i));
    out << format_double(j) << ',' << dir << ',' << format_double(r.watermark.lambda) << ','
        << format_double(r.kld) << ',' << format_double(r.delta_lqg) << ','
        << format_double(eq) << ',' << (r.constraint_active ? "true" : "false") << "\n";
  }
}

void run_sweep(const Options& o) {
  Loaded l = load(o);
  auto& c = l.campaign;
  if (!o.alphas.empty() || !o.budgets.empty() || !o.sigma_e.empty()) c.grid.clear();
  for (double a : o.alphas) c.grid.push_back(GridPoint::equal_power(a));
  for (double j : o.budgets) c.grid.push_back(GridPoint::optimized(j));
  for (const auto& s : o.sigma_e) c.grid.push_back(parse_sigma_e(s, l.model.p()));
  const SweepResult r = sweep_sadd_vs_dlqg(l.model, l.arl_h, l.lag, c, solver(o));
  Sink sink(o.out);
  write_sweep_csv(*sink, r);
}

void run_simulate(const Options& o) {
  const Loaded l = load(o);
  require(o.horizon >= 1, ErrorCode::InvalidArgument, "--horizon must be >= 1");
  const ClosedLoopDesign d = design(l.model, solver(o));
  const Matrix sigma_e = single_watermark(o, l, d);
  const DetectionAnalysis a = analyze(l.model, d, sigma_e, l.lag, solver(o));
  std::optional<ReplayAttack> attack;
  if (o.attack) attack = ReplayAttack{l.campaign.nu, l.campaign.k0};
  Simulator sim(l.model, d, sigma_e, l.campaign.seed, attack, kDefaultBurnIn, o.zero_threshold);
  CusumDetector det(LlrModel::from_analysis(a), l.arl_h, l.lag);
  Sink sink(o.out);
  auto& out = *sink;
  out << "k,attacked";
  for (Eigen::Index i = 0; i < l.model.m(); ++i) out << ",gamma_" << i + 1;
  for (Eigen::Index i = 0; i < l.model.p(); ++i) out << ",e_" << i + 1;
  out << ",g,alarm\n";
  for (std::int64_t t = 0; t < o.horizon; ++t) {
    const StepRecord s = sim.step();
    const Decision dec = det.update(s.gamma, s.e);
    out << s.k << ',' << (s.attacked ? 1 : 0);
    for (Eigen::Index i = 0; i < s.gamma.size(); ++i) out << ',' << format_double(s.gamma(i));
    for (Eigen::Index i = 0; i < s.e.size(); ++i) out << ',' << format_double(s.e(i));
    out << ',' << format_double(dec.g) << ',' << (dec.alarm ? 1 : 0) << "\n";
  }
}

void run_arl(const Options& o) {
  const Loaded l = load(o);
  const ClosedLoopDesign d = design(l.model, solver(o));
  const Matrix sigma_e = single_watermark(o, l, d);
  const ArlEstimate r = estimate_arl(l.model, d, sigma_e, l.arl_h, l.lag,
                                     l.campaign.arl_trials, l.campaign.seed, solver(o));
  Sink sink(o.out);
  auto& out = *sink;
  out << "arl_h = " << format_double(l.arl_h) << "\n";
  out << "threshold = " << format_double(std::log(l.arl_h)) << "\n";
  out << "arl_estimate = " << format_double(r.mean) << "\n";
  out << "arl_ci = " << format_double(r.ci_halfwidth) << "\n";
  out << "capped_trials = " << r.capped << "\n";
  out << "cap = " << r.cap << "\n";
  out << "trials = " << r.trials << "\n";
  out << "seed = " << l.campaign.seed << "\n";
}

int report(const std::string& code, const std::string& message) {
  nlohmann::json j = {{"error", code}, {"message", message}};
  std::cerr << j.dump() << "\n";
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Replay-attack detection with watermarked LQG control and CUSUM"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* cmd) {
    cmd->add_option("--system", o.system, "Benchmark name (system-a|b|c) or system file")
        ->capture_default_str();
    cmd->add_option("--arl-h", o.arl_h, "Lower bound on ARL; threshold is ln(arl_h)");
    cmd->add_option("--lag", o.lag, "Watermark lag k_e paired with the innovation");
    cmd->add_option("--seed", o.seed, "Campaign seed");
    cmd->add_option("--out", o.out, "Output file (default stdout)");
    cmd->add_option("--zero-threshold", o.zero_threshold, "Numerical zero")
        ->capture_default_str();
  };
  auto watermark = [&](CLI::App* cmd) {
    cmd->add_option("--sigma-e", o.sigma_e,
                    "Watermark covariance: diag:v1,..,vp | rank1:u1,..,up,lambda | opt:J");
  };
  auto campaign = [&](CLI::App* cmd) {
    cmd->add_option("--k0", o.k0, "Replay delay");
    cmd->add_option("--nu", o.nu, "Attack start");
    cmd->add_option("--trials", o.trials, "Monte Carlo trials");
  };

  auto* design_cmd = app.add_subcommand("design", "Kalman filter and LQR gains");
  common(design_cmd);
  auto* kld_cmd = app.add_subcommand("kld", "KL divergence and asymptotic SADD");
  common(kld_cmd);
  watermark(kld_cmd);
  auto* dlqg_cmd = app.add_subcommand("delta-lqg", "LQG cost increase of a watermark");
  common(dlqg_cmd);
  watermark(dlqg_cmd);
  auto* opt_cmd = app.add_subcommand("optimize", "Rank-one watermark under a cost budget");
  common(opt_cmd);
  opt_cmd->add_option("--budgets", o.budgets, "ΔLQG budgets J")->delimiter(',');
  opt_cmd->add_option("--restarts", o.restarts, "Multi-start count")->capture_default_str();
  auto* sweep_cmd = app.add_subcommand("sweep", "SADD vs ΔLQG sweep to CSV");
  common(sweep_cmd);
  watermark(sweep_cmd);
  campaign(sweep_cmd);
  sweep_cmd->add_option("--alphas", o.alphas, "Equal-power grid Σ_e = αI")->delimiter(',');
  sweep_cmd->add_option("--budgets", o.budgets, "Optimized grid budgets J")->delimiter(',');
  auto* sim_cmd = app.add_subcommand("simulate", "Per-step trace with the CUSUM statistic");
  common(sim_cmd);
  watermark(sim_cmd);
  campaign(sim_cmd);
  sim_cmd->add_option("--horizon", o.horizon, "Recorded steps")->capture_default_str();
  sim_cmd->add_flag("--attack", o.attack, "Replay from --nu with delay --k0");
  auto* arl_cmd = app.add_subcommand("arl", "Monte Carlo average run length");
  common(arl_cmd);
  watermark(arl_cmd);
  campaign(arl_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report("UsageError", e.what());
    return 2;
  }

  try {
    if (*design_cmd) run_design(o);
    else if (*kld_cmd) run_kld(o);
    else if (*dlqg_cmd) run_delta_lqg(o);
    else if (*opt_cmd) run_optimize(o);
    else if (*sweep_cmd) run_sweep(o);
    else if (*sim_cmd) run_simulate(o);
    else if (*arl_cmd) run_arl(o);
  } catch (const Error& e) {
    return report(std::string(to_string(e.code())), e.message());
  } catch (const std::exception& e) {
    return report("InternalError", e.what());
  }
  return 0;
}
