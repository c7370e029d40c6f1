#pragma once

// LTI plant, steady-state LQG design and one-step closed-loop dynamics.

#include <cstdint>
#include <string>
#include <utility>

#include "wmcusum/linalg.hpp"

namespace wmcusum {

/// x_{k+1} = A x_k + B u_k + w_k,  y_k = C x_k + v_k,
/// w ~ N(0, Q), v ~ N(0, R), LQG stage cost xᵀ W x + uᵀ U u.
struct SystemModel {
  Matrix A, B, C, Q, R, W, U;

  Eigen::Index n() const { return A.rows(); }
  Eigen::Index m() const { return C.rows(); }
  Eigen::Index p() const { return B.cols(); }

  void validate(double zero_threshold = 1e-9) const {
    require_square(A, "A");
    const auto ns = A.rows();
    require(B.rows() == ns && B.cols() > 0, ErrorCode::DimensionMismatch,
            "B is " + shape_of(B) + ", expected " + std::to_string(ns) + " rows");
    require(C.cols() == ns && C.rows() > 0, ErrorCode::DimensionMismatch,
            "C is " + shape_of(C) + ", expected " + std::to_string(ns) + " columns");
    require_shape(Q, ns, ns, "Q");
    require_shape(R, C.rows(), C.rows(), "R");
    require_shape(W, ns, ns, "W");
    require_shape(U, B.cols(), B.cols(), "U");
    for (const auto& [mat, name] : {std::pair{&A, "A"}, {&B, "B"}, {&C, "C"}, {&Q, "Q"},
                                    {&R, "R"}, {&W, "W"}, {&U, "U"}})
      require_finite(*mat, name);
    require(is_psd(Q, zero_threshold), ErrorCode::NotPositiveDefinite, "Q must be symmetric PSD");
    require(is_symmetric(R, 1e-12), ErrorCode::InvalidArgument, "R must be symmetric");
    llt_pd(R, "R");
    for (const auto& [mat, name] : {std::pair{&W, "W"}, {&U, "U"}}) {
      const Matrix off = *mat - Matrix(mat->diagonal().asDiagonal());
      require(off.cwiseAbs().maxCoeff() == 0.0, ErrorCode::InvalidArgument,
              std::string(name) + " must be diagonal");
      require(mat->diagonal().minCoeff() > 0.0, ErrorCode::NotPositiveDefinite,
              std::string(name) + " must be positive definite");
    }
  }
};

struct ClosedLoopDesign {
  Matrix P;            // steady-state prediction error covariance
  Matrix K;            // Kalman gain, n×m
  Matrix S;            // control Riccati solution
  Matrix L;            // feedback gain, u* = L x̂_{k|k}
  Matrix Sigma_gamma;  // innovation covariance C P Cᵀ + R
  Matrix Acl;          // (I − K C)(A + B L)
};

/// A + B L, the state-feedback closed-loop matrix.
inline Matrix feedback_matrix(const SystemModel& sys, const ClosedLoopDesign& d) {
  return sys.A + sys.B * d.L;
}

inline ClosedLoopDesign design(const SystemModel& sys, const SolverOptions& opts = {}) {
  sys.validate(opts.zero_threshold);
  ClosedLoopDesign d;
  d.P = solve_dare(sys.A, sys.C, sys.Q, sys.R, opts);
  d.Sigma_gamma = symmetrize(sys.C * d.P * sys.C.transpose() + sys.R);
  d.K = d.P * sys.C.transpose() * inverse_pd(d.Sigma_gamma);
  d.S = solve_dare(sys.A.transpose(), sys.B.transpose(), sys.W, sys.U, opts);
  const Matrix gram = symmetrize(sys.B.transpose() * d.S * sys.B + sys.U);
  d.L = -llt_pd(gram, "BᵀSB + U").solve(sys.B.transpose() * d.S * sys.A);
  const auto n = sys.n();
  d.Acl = (Matrix::Identity(n, n) - d.K * sys.C) * (sys.A + sys.B * d.L);
  const double rho = spectral_radius(d.Acl);
  require(rho < 1.0 - opts.stability_margin, ErrorCode::UnstableClosedLoop,
          "closed-loop estimator matrix has spectral radius " + std::to_string(rho));
  return d;
}

/// State carried between steps: true state x_k and predicted estimate x̂_{k|k−1}.
struct LoopState {
  Vector x;
  Vector xhat_pred;
  std::int64_t k = 0;
};

/// What happened at time k. `y` is what the estimator received, `y_true`
/// what the sensor measured; they differ only while under replay.
struct StepRecord {
  std::int64_t k = 0;
  Vector y;
  Vector y_true;
  Vector gamma;
  Vector e;
  Vector u;
  bool attacked = false;
};

/// Noise realized at one step, already scaled to its covariance.
struct NoiseDraw {
  Vector w;  // process noise, n
  Vector v;  // measurement noise, m
  Vector e;  // watermark, p
};

inline LoopState zero_state(const SystemModel& sys) {
  return LoopState{Vector::Zero(sys.n()), Vector::Zero(sys.n()), 0};
}

namespace detail {

// Shared tail of the normal and replay steps: Kalman update on the delivered
// observation, watermarked control, plant and predictor propagation.
inline std::pair<LoopState, StepRecord> advance(const LoopState& state, const ClosedLoopDesign& d,
                                                const SystemModel& sys, const NoiseDraw& noise,
                                                Vector y_true, Vector delivered, bool attacked) {
  StepRecord rec;
  rec.k = state.k;
  rec.gamma = delivered - sys.C * state.xhat_pred;
  const Vector xhat_filt = state.xhat_pred + d.K * rec.gamma;
  rec.e = noise.e;
  rec.u = d.L * xhat_filt + noise.e;
  rec.y = std::move(delivered);
  rec.y_true = std::move(y_true);
  rec.attacked = attacked;

  LoopState next;
  next.x = sys.A * state.x + sys.B * rec.u + noise.w;
  next.xhat_pred = sys.A * xhat_filt + sys.B * rec.u;
  next.k = state.k + 1;
  return {std::move(next), std::move(rec)};
}

inline void check_noise(const SystemModel& sys, const NoiseDraw& noise) {
  require(noise.w.size() == sys.n() && noise.v.size() == sys.m() && noise.e.size() == sys.p(),
          ErrorCode::DimensionMismatch, "noise draw sizes do not match the system");
}

}  // namespace detail

/// One step of the watermarked loop with the true observation delivered.
inline std::pair<LoopState, StepRecord> step_normal(const LoopState& state,
                                                    const ClosedLoopDesign& d,
                                                    const SystemModel& sys,
                                                    const NoiseDraw& noise) {
  detail::check_noise(sys, noise);
  Vector y = sys.C * state.x + noise.v;
  Vector delivered = y;
  return detail::advance(state, d, sys, noise, std::move(y), std::move(delivered), false);
}

}  // namespace wmcusum
