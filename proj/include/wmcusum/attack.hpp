#pragma once

// Replay attacker: the record-and-replay mechanics used in simulation and the
// stationary Gauss-Markov model of the replayed stream used by the analytics.

#include <cmath>
#include <cstdint>
#include <deque>
#include <string>
#include <utility>

#include "wmcusum/linalg.hpp"
#include "wmcusum/plant.hpp"

namespace wmcusum {

/// From time `nu` on, the estimator receives the observation delivered
/// `k0` steps earlier instead of the live measurement.
struct ReplayAttack {
  std::int64_t nu = 0;
  std::int64_t k0 = 0;

  void validate() const {
    require(k0 >= 1, ErrorCode::InvalidAttackWindow, "replay delay k0 must be >= 1");
    require(nu > k0, ErrorCode::InvalidAttackWindow,
            "attack start nu=" + std::to_string(nu) + " must exceed k0=" + std::to_string(k0));
  }
};

/// The attacker's recording: the last k0 observations delivered to the
/// estimator. Once the attack runs longer than k0 steps the tape loops over
/// its own replayed content, so z_k = z_{k−k0} holds for every attacked step.
class ReplayTape {
 public:
  explicit ReplayTape(std::int64_t k0) : k0_(k0) {
    require(k0 >= 1, ErrorCode::InvalidAttackWindow, "replay delay k0 must be >= 1");
  }

  std::int64_t delay() const { return k0_; }
  bool ready() const { return static_cast<std::int64_t>(buffer_.size()) == k0_; }

  void record(const Vector& delivered) {
    buffer_.push_back(delivered);
    if (static_cast<std::int64_t>(buffer_.size()) > k0_) buffer_.pop_front();
  }

  /// Observation delivered k0 steps before the upcoming one.
  const Vector& replay() const {
    require(ready(), ErrorCode::InvalidAttackWindow,
            "replay buffer holds " + std::to_string(buffer_.size()) + " of " +
                std::to_string(k0_) + " required observations");
    return buffer_.front();
  }

 private:
  std::int64_t k0_;
  std::deque<Vector> buffer_;
};

/// One step with the replayed observation delivered. The plant keeps
/// evolving under u_k = L x̂ᶠ_{k|k} + e_k; the tape is advanced.
inline std::pair<LoopState, StepRecord> step_replay(const LoopState& state, ReplayTape& tape,
                                                    const ClosedLoopDesign& d,
                                                    const SystemModel& sys,
                                                    const NoiseDraw& noise) {
  detail::check_noise(sys, noise);
  Vector y_true = sys.C * state.x + noise.v;
  Vector delivered = tape.replay();
  tape.record(delivered);
  return detail::advance(state, d, sys, noise, std::move(y_true), std::move(delivered), true);
}

/// Stationary partially observed Gauss-Markov model of the replayed stream:
/// x_a,k = A_a x_a,k−1 + w_a,k−1, z_k = C_a x_a,k, with
/// x_a = [x_k; x̂_{k|k−1}; v_k] of size n_a = 2n + m.
struct AttackerGMP {
  Matrix Aa;
  Matrix Ca;
  Matrix Qa;
  Matrix Exa0;  // stationary covariance, Exa0 = Aa Exa0 Aaᵀ + Qa

  Eigen::Index na() const { return Aa.rows(); }
};

inline AttackerGMP build_attacker_gmp(const SystemModel& sys, const ClosedLoopDesign& d,
                                      const Matrix& sigma_e, const SolverOptions& opts = {}) {
  const auto n = sys.n(), m = sys.m(), p = sys.p();
  require_shape(sigma_e, p, p, "Sigma_e");
  require(is_psd(sigma_e, opts.zero_threshold), ErrorCode::NotPositiveDefinite,
          "Sigma_e must be symmetric PSD");
  const Matrix I = Matrix::Identity(n, n);
  const Matrix abl = sys.A + sys.B * d.L;
  const Matrix kc = d.K * sys.C;
  const auto na = 2 * n + m;

  AttackerGMP g;
  g.Aa = Matrix::Zero(na, na);
  g.Aa.block(0, 0, n, n) = sys.A + sys.B * d.L * kc;
  g.Aa.block(0, n, n, n) = sys.B * d.L * (I - kc);
  g.Aa.block(0, 2 * n, n, m) = sys.B * d.L * d.K;
  g.Aa.block(n, 0, n, n) = abl * kc;
  g.Aa.block(n, n, n, n) = abl * (I - kc);
  g.Aa.block(n, 2 * n, n, m) = abl * d.K;

  g.Ca = Matrix::Zero(m, na);
  g.Ca.block(0, 0, m, n) = sys.C;
  g.Ca.block(0, 2 * n, m, m) = Matrix::Identity(m, m);

  const Matrix bsb = symmetrize(sys.B * sigma_e * sys.B.transpose());
  g.Qa = Matrix::Zero(na, na);
  g.Qa.block(0, 0, n, n) = bsb + sys.Q;
  g.Qa.block(0, n, n, n) = bsb;
  g.Qa.block(n, 0, n, n) = bsb;
  g.Qa.block(n, n, n, n) = bsb;
  g.Qa.block(2 * n, 2 * n, m, m) = sys.R;

  g.Exa0 = solve_dlyap(g.Aa, g.Qa, opts);
  return g;
}

/// E[z_k z_{k−lag}ᵀ] = C_a A_aˡᵃᵍ E_xa(0) C_aᵀ.
inline Matrix ezz(const AttackerGMP& g, int lag) {
  require(lag >= 0, ErrorCode::InvalidArgument, "lag must be >= 0");
  const Matrix out = g.Ca * matrix_power(g.Aa, lag) * g.Exa0 * g.Ca.transpose();
  return lag == 0 ? symmetrize(out) : out;
}

/// Steps after which the replayed stream has decorrelated to `tol`, from
/// ρ(A_a)^k ≤ tol.
inline std::int64_t mixing_time(const AttackerGMP& g, double tol = 1e-10) {
  const double rho = spectral_radius(g.Aa);
  if (rho <= 0.0) return 1;
  return static_cast<std::int64_t>(std::ceil(std::log(tol) / std::log(rho)));
}

}  // namespace wmcusum
