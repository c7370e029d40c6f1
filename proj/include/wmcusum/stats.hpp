#pragma once

// Closed-form steady-state statistics of the watermarked loop before and
// under replay: innovation covariances, KL divergence of the joint
// (innovation, lagged watermark) law, LQG cost of the watermark, and the
// asymptotic CUSUM detection delay.

#include <cmath>
#include <string>
#include <utility>

#include "wmcusum/attack.hpp"
#include "wmcusum/linalg.hpp"
#include "wmcusum/plant.hpp"

namespace wmcusum {

struct SeriesOptions {
  int max_terms = 100000;
  double tail_tolerance = 1e-12;

  void validate() const {
    require(max_terms >= 1, ErrorCode::InvalidArgument, "max_terms must be >= 1");
    require(tail_tolerance > 0.0, ErrorCode::InvalidArgument, "tail_tolerance must be positive");
  }
};

/// E[x̂ᶠ_{k−1|k−1} z_kᵀ] = Σᵢ 𝒜ⁱ K E[z_{k−1−i} z_kᵀ]
///                      = Σᵢ 𝒜ⁱ K C_a E_xa(0) (A_aᵀ)ⁱ⁺¹ C_aᵀ.
/// Truncated at the first term whose ∞-norm drops below tail_tolerance.
inline Matrix exz_minus1(const ClosedLoopDesign& d, const AttackerGMP& g,
                         const SeriesOptions& series = {}) {
  series.validate();
  require(d.K.cols() == g.Ca.rows(), ErrorCode::DimensionMismatch,
          "Kalman gain and attacker output dimensions differ");
  Matrix left = d.K;                                  // 𝒜ⁱ K
  Matrix right = g.Aa * g.Exa0 * g.Ca.transpose();    // A_aⁱ⁺¹ E_xa(0) C_aᵀ
  Matrix sum = Matrix::Zero(d.K.rows(), d.K.cols());
  for (int i = 0; i < series.max_terms; ++i) {
    const Matrix term = left * (g.Ca * right).transpose();
    sum += term;
    if (inf_norm(term) < series.tail_tolerance) return sum;
    left = d.Acl * left;
    right = g.Aa * right;
  }
  throw Error(ErrorCode::NonConvergence,
              "E_xz(-1) series not below tail tolerance after " +
                  std::to_string(series.max_terms) + " terms");
}

/// The pieces that make up the innovation covariance under replay.
struct ReplayInnovation {
  Matrix Ezz0;               // E[z_k z_kᵀ]
  Matrix Exz;                // E[x̂ᶠ_{k−1|k−1} z_kᵀ]
  Matrix Sigma_xFz;          // part of E[x̂ᶠ x̂ᶠᵀ] driven by the replayed stream
  Matrix Sigma_xFe;          // part driven by the watermark
  Matrix Sigma_gamma_tilde;  // E[γ̃_k γ̃_kᵀ]
};

inline ReplayInnovation replay_innovation(const SystemModel& sys, const ClosedLoopDesign& d,
                                          const Matrix& sigma_e, const AttackerGMP& g,
                                          const SolverOptions& opts = {},
                                          const SeriesOptions& series = {}) {
  const auto n = sys.n();
  const Matrix I = Matrix::Identity(n, n);
  const Matrix abl = feedback_matrix(sys, d);
  const Matrix c_abl = sys.C * abl;
  const Matrix bsb = symmetrize(sys.B * sigma_e * sys.B.transpose());

  ReplayInnovation r;
  r.Ezz0 = ezz(g, 0);
  r.Exz = exz_minus1(d, g, series);
  const Matrix cross = d.Acl * r.Exz * d.K.transpose();
  r.Sigma_xFz = solve_dlyap(d.Acl, symmetrize(d.K * r.Ezz0 * d.K.transpose() + cross +
                                              cross.transpose()),
                            opts);
  const Matrix ikc_b = (I - d.K * sys.C);
  r.Sigma_xFe = solve_dlyap(d.Acl, symmetrize(ikc_b * bsb * ikc_b.transpose()), opts);
  const Matrix mixed = c_abl * r.Exz;
  r.Sigma_gamma_tilde =
      symmetrize(r.Ezz0 - mixed - mixed.transpose() + sys.C * bsb * sys.C.transpose() +
                 c_abl * (r.Sigma_xFz + r.Sigma_xFe) * c_abl.transpose());
  llt_pd(r.Sigma_gamma_tilde, "Sigma_gamma_tilde");
  return r;
}

inline Matrix sigma_gamma_tilde(const SystemModel& sys, const ClosedLoopDesign& d,
                                const Matrix& sigma_e, const AttackerGMP& g,
                                const SolverOptions& opts = {},
                                const SeriesOptions& series = {}) {
  return replay_innovation(sys, d, sigma_e, g, opts, series).Sigma_gamma_tilde;
}

/// Markov parameter C A^{lag−1} B coupling e_{k−lag} into γ̃_k; the
/// innovation/watermark cross-covariance under replay is −gain · Σ_e.
inline Matrix watermark_gain(const SystemModel& sys, int lag) {
  require(lag >= 1, ErrorCode::InvalidArgument, "watermark lag must be >= 1");
  return sys.C * matrix_power(sys.A, lag - 1) * sys.B;
}

/// Joint covariances of (γ, e_{k−lag}) before and after the attack.
struct JointCovariances {
  Matrix pre;
  Matrix post;
};

inline JointCovariances joint_covariances(const Matrix& sigma_gamma,
                                          const Matrix& sigma_gamma_tilde,
                                          const Matrix& sigma_e, const Matrix& gain) {
  const auto m = sigma_gamma.rows(), p = sigma_e.rows();
  require_shape(sigma_gamma_tilde, m, m, "Sigma_gamma_tilde");
  require_shape(gain, m, p, "watermark gain");
  const Matrix cross = -gain * sigma_e;
  JointCovariances j;
  j.pre = Matrix::Zero(m + p, m + p);
  j.pre.topLeftCorner(m, m) = sigma_gamma;
  j.pre.bottomRightCorner(p, p) = sigma_e;
  j.post = j.pre;
  j.post.topLeftCorner(m, m) = sigma_gamma_tilde;
  j.post.topRightCorner(m, p) = cross;
  j.post.bottomLeftCorner(p, m) = cross.transpose();
  return j;
}

/// D(f̃‖f) = ½{tr(Σ_γ⁻¹ Σ_γ̃) − m − ln(|Σ_γ̃ − G Σ_e Gᵀ| / |Σ_γ|)}, in nats,
/// where G is the watermark gain. Only the Schur complement of Σ_e in the
/// post-attack joint covariance is factored, so a singular Σ_e is fine.
inline double kld(const Matrix& sigma_gamma, const Matrix& sigma_gamma_tilde,
                  const Matrix& sigma_e, const Matrix& gain) {
  const auto m = sigma_gamma.rows();
  require_square(sigma_gamma, "Sigma_gamma");
  require_shape(sigma_gamma_tilde, m, m, "Sigma_gamma_tilde");
  require_shape(gain, m, sigma_e.rows(), "watermark gain");
  const auto pre = llt_pd(sigma_gamma, "Sigma_gamma");
  const Matrix schur = symmetrize(sigma_gamma_tilde - gain * sigma_e * gain.transpose());
  const double tr = pre.solve(sigma_gamma_tilde).trace();
  return 0.5 * (tr - static_cast<double>(m) - (logdet_pd(schur) - logdet_pd(sigma_gamma)));
}

/// KL divergence with the watermark taken k_e steps back; k_e = 1 is kld().
inline double kld_delayed(const SystemModel& sys, const Matrix& sigma_gamma,
                          const Matrix& sigma_gamma_tilde, const Matrix& sigma_e, int k_e) {
  return kld(sigma_gamma, sigma_gamma_tilde, sigma_e, watermark_gain(sys, k_e));
}

/// ½{tr(Σ_pre⁻¹ Σ_post) − d − ln(|Σ_post| / |Σ_pre|)} for zero-mean Gaussians.
inline double kld_gaussian(const Matrix& sigma_pre, const Matrix& sigma_post) {
  const auto dim = sigma_pre.rows();
  require_shape(sigma_post, dim, dim, "post covariance");
  const auto pre = llt_pd(sigma_pre, "pre covariance");
  return 0.5 * (pre.solve(sigma_post).trace() - static_cast<double>(dim) -
                (logdet_pd(sigma_post) - logdet_pd(sigma_pre)));
}

/// Σ_L with (A+BL)ᵀ Σ_L (A+BL) − Σ_L + Lᵀ U L + W = 0.
inline Matrix sigma_L(const SystemModel& sys, const ClosedLoopDesign& d,
                      const SolverOptions& opts = {}) {
  const Matrix abl = feedback_matrix(sys, d);
  return solve_dlyap(abl.transpose(),
                     symmetrize(d.L.transpose() * sys.U * d.L + sys.W), opts);
}

/// Bᵀ Σ_L B + U, so that ΔLQG = tr(N Σ_e).
inline Matrix watermark_cost_matrix(const SystemModel& sys, const ClosedLoopDesign& d,
                                    const SolverOptions& opts = {}) {
  return symmetrize(sys.B.transpose() * sigma_L(sys, d, opts) * sys.B + sys.U);
}

inline double delta_lqg(const SystemModel& sys, const ClosedLoopDesign& d, const Matrix& sigma_e,
                        const SolverOptions& opts = {}) {
  require_shape(sigma_e, sys.p(), sys.p(), "Sigma_e");
  return (watermark_cost_matrix(sys, d, opts) * sigma_e).trace();
}

/// ln(ARL_h) / D: asymptotic worst-case detection delay in steps.
inline double sadd_theory(double kld_nats, double arl_h, double zero_threshold = 1e-9) {
  require(arl_h > 1.0, ErrorCode::InvalidArgument, "arl_h must exceed 1");
  require(kld_nats > zero_threshold, ErrorCode::ZeroDivergence,
          "KL divergence " + std::to_string(kld_nats) + " is zero; attack undetectable");
  return std::log(arl_h) / kld_nats;
}

/// Smallest k ≤ n with ‖C A^{k−1} B‖∞ > zero_threshold.
inline int relative_degree(const SystemModel& sys, double zero_threshold = 1e-6) {
  Matrix ab = sys.B;
  for (int k = 1; k <= sys.n(); ++k) {
    if (inf_norm(sys.C * ab) > zero_threshold) return k;
    ab = sys.A * ab;
  }
  throw Error(ErrorCode::DegenerateSystem,
              "all Markov parameters C A^i B, i < n, are below the zero threshold");
}

/// Everything the analytics say about one (system, watermark, lag) triple.
struct DetectionAnalysis {
  Matrix Sigma_gamma;
  Matrix Sigma_gamma_tilde;
  Matrix Sigma_e;
  Matrix gain;   // C A^{k_e−1} B
  Matrix cross;  // E[γ̃_k e_{k−k_e}ᵀ] = −gain Σ_e
  Matrix Sigma_joint_pre;
  Matrix Sigma_joint_post;
  double kld = 0.0;
  double delta_lqg = 0.0;
  int watermark_lag = 1;

  double sadd_theory(double arl_h) const { return wmcusum::sadd_theory(kld, arl_h); }
};

inline DetectionAnalysis analyze(const SystemModel& sys, const ClosedLoopDesign& d,
                                 const Matrix& sigma_e, int watermark_lag = 1,
                                 const SolverOptions& opts = {},
                                 const SeriesOptions& series = {}) {
  const AttackerGMP g = build_attacker_gmp(sys, d, sigma_e, opts);
  DetectionAnalysis a;
  a.Sigma_gamma = d.Sigma_gamma;
  a.Sigma_gamma_tilde = sigma_gamma_tilde(sys, d, sigma_e, g, opts, series);
  a.Sigma_e = symmetrize(sigma_e);
  a.watermark_lag = watermark_lag;
  a.gain = watermark_gain(sys, watermark_lag);
  a.cross = -a.gain * a.Sigma_e;
  auto joint = joint_covariances(a.Sigma_gamma, a.Sigma_gamma_tilde, a.Sigma_e, a.gain);
  a.Sigma_joint_pre = std::move(joint.pre);
  a.Sigma_joint_post = std::move(joint.post);
  a.kld = kld(a.Sigma_gamma, a.Sigma_gamma_tilde, a.Sigma_e, a.gain);
  a.delta_lqg = delta_lqg(sys, d, a.Sigma_e, opts);
  return a;
}

}  // namespace wmcusum
