#pragma once

// Online CUSUM test on the joint (innovation, lagged watermark) stream.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <span>
#include <string>
#include <utility>

#include "wmcusum/linalg.hpp"
#include "wmcusum/stats.hpp"

namespace wmcusum {

/// Log-likelihood ratio of the post-attack over the pre-attack joint law of
/// (γ, e_{k−k_e}). Both laws share the watermark marginal N(0, Σ_e), so the
/// ratio reduces to the conditional of γ given e:
///   pre:  γ | e ~ N(0, Σ_γ)
///   post: γ | e ~ N(−G e, Σ_γ̃ − G Σ_e Gᵀ)
/// which stays well defined for rank-deficient Σ_e.
class LlrModel {
 public:
  LlrModel(const Matrix& sigma_gamma, const Matrix& sigma_gamma_tilde, const Matrix& sigma_e,
           const Matrix& gain)
      : gain_(checked_gain(sigma_gamma, sigma_gamma_tilde, sigma_e, gain)),
        pre_(llt_pd(symmetrize(sigma_gamma), "Sigma_gamma")),
        post_(llt_pd(symmetrize(sigma_gamma_tilde - gain * sigma_e * gain.transpose()),
                     "conditional post-attack covariance")) {
    log_det_ratio_ = log_det(pre_) - log_det(post_);
  }

  static LlrModel from_analysis(const DetectionAnalysis& a) {
    return LlrModel(a.Sigma_gamma, a.Sigma_gamma_tilde, a.Sigma_e, a.gain);
  }

  /// Model with post = pre; its llr is identically zero.
  static LlrModel null_model(const Matrix& sigma_gamma, Eigen::Index p) {
    const auto m = sigma_gamma.rows();
    return LlrModel(sigma_gamma, sigma_gamma, Matrix::Zero(p, p), Matrix::Zero(m, p));
  }

  Eigen::Index m() const { return gain_.rows(); }
  Eigen::Index p() const { return gain_.cols(); }

  /// ½[qᵀ(Σ_pre⁻¹ − Σ_post⁻¹)q + ln(|Σ_pre|/|Σ_post|)] with q = (γ, e).
  double llr(const Vector& gamma, const Vector& e_lagged) const {
    require(gamma.size() == m() && e_lagged.size() == p(), ErrorCode::DimensionMismatch,
            "llr input sizes do not match the model");
    const Vector resid = gamma + gain_ * e_lagged;
    const double quad_pre = pre_.matrixL().solve(gamma).squaredNorm();
    const double quad_post = post_.matrixL().solve(resid).squaredNorm();
    return 0.5 * (quad_pre - quad_post + log_det_ratio_);
  }

 private:
  static const Matrix& checked_gain(const Matrix& sigma_gamma, const Matrix& sigma_gamma_tilde,
                                    const Matrix& sigma_e, const Matrix& gain) {
    require_square(sigma_gamma, "Sigma_gamma");
    require_square(sigma_e, "Sigma_e");
    const auto m = sigma_gamma.rows();
    require_shape(sigma_gamma_tilde, m, m, "Sigma_gamma_tilde");
    require_shape(gain, m, sigma_e.rows(), "watermark gain");
    return gain;
  }

  static double log_det(const Eigen::LLT<Matrix>& llt) {
    const Matrix& l = llt.matrixLLT();
    double s = 0.0;
    for (Eigen::Index i = 0; i < l.rows(); ++i) s += std::log(l(i, i));
    return 2.0 * s;
  }

  Matrix gain_;
  Eigen::LLT<Matrix> pre_;
  Eigen::LLT<Matrix> post_;
  double log_det_ratio_ = 0.0;
};

struct Decision {
  bool alarm = false;
  double g = 0.0;
  std::int64_t k = 0;
  bool warming_up = false;
};

/// g_k = max(0, g_{k−1} + llr_k); alarm when g_k ≥ threshold.
class CusumStatistic {
 public:
  explicit CusumStatistic(double threshold) : threshold_(threshold) {
    require(threshold > 0.0, ErrorCode::InvalidArgument, "CUSUM threshold must be positive");
  }

  static CusumStatistic from_arl(double arl_h) {
    require(arl_h > 1.0, ErrorCode::InvalidArgument, "arl_h must exceed 1");
    return CusumStatistic(std::log(arl_h));
  }

  Decision push(double llr) {
    g_ = std::max(0.0, g_ + llr);
    ++k_;
    return Decision{g_ >= threshold_, g_, k_, false};
  }

  void reset() { g_ = 0.0; }
  double g() const { return g_; }
  double threshold() const { return threshold_; }
  std::int64_t count() const { return k_; }

 private:
  double threshold_;
  double g_ = 0.0;
  std::int64_t k_ = 0;
};

/// CUSUM over (γ_k, e_{k−k_e}). Watermarks are fed as they are drawn; the
/// detector pairs each innovation with the watermark k_e steps back and
/// treats the llr as zero until that history exists.
class CusumDetector {
 public:
  CusumDetector(LlrModel model, double arl_h, int watermark_lag = 1)
      : model_(std::move(model)), stat_(CusumStatistic::from_arl(arl_h)), lag_(watermark_lag) {
    require(watermark_lag >= 1, ErrorCode::InvalidArgument, "watermark lag must be >= 1");
  }

  Decision update(const Vector& gamma, const Vector& e_current) {
    require(e_current.size() == model_.p(), ErrorCode::DimensionMismatch,
            "watermark size does not match the model");
    const bool warm = static_cast<int>(history_.size()) < lag_;
    const double llr = warm ? 0.0 : model_.llr(gamma, history_.front());
    history_.push_back(e_current);
    if (static_cast<int>(history_.size()) > lag_) history_.pop_front();
    Decision d = stat_.push(llr);
    d.warming_up = warm;
    return d;
  }

  /// Zero the statistic, keeping the watermark history.
  void reset_statistic() { stat_.reset(); }

  double g() const { return stat_.g(); }
  double threshold() const { return stat_.threshold(); }
  int watermark_lag() const { return lag_; }
  const LlrModel& model() const { return model_; }

 private:
  LlrModel model_;
  CusumStatistic stat_;
  int lag_;
  std::deque<Vector> history_;
};

/// Feed (γ, e) pairs until the first alarm; returns the number of pairs
/// consumed, alarm included.
template <typename Range>
std::int64_t run_until_alarm(const Range& stream, CusumDetector& det) {
  std::int64_t t = 0;
  for (const auto& [gamma, e] : stream) {
    ++t;
    if (det.update(gamma, e).alarm) return t;
  }
  throw Error(ErrorCode::StreamExhausted, "no alarm within " + std::to_string(t) + " samples");
}

/// Same, over precomputed llr increments.
inline std::int64_t run_until_alarm(std::span<const double> llrs, CusumStatistic stat) {
  for (double llr : llrs)
    if (stat.push(llr).alarm) return stat.count();
  throw Error(ErrorCode::StreamExhausted,
              "no alarm within " + std::to_string(llrs.size()) + " samples");
}

}  // namespace wmcusum
