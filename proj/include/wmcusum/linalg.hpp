#pragma once

// Dense matrix primitives plus the discrete Riccati and Lyapunov solvers.

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <string>

#include "wmcusum/error.hpp"

namespace wmcusum {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct SolverOptions {
  double tolerance = 1e-10;
  int max_iterations = 100000;
  double zero_threshold = 1e-9;
  // Spectral radii at or above 1 - stability_margin are rejected.
  double stability_margin = 1e-9;

  void validate() const {
    require(tolerance > 0.0, ErrorCode::InvalidArgument, "tolerance must be positive");
    require(max_iterations >= 1, ErrorCode::InvalidArgument, "max_iterations must be >= 1");
    require(zero_threshold > 0.0, ErrorCode::InvalidArgument, "zero_threshold must be positive");
    require(stability_margin >= 0.0, ErrorCode::InvalidArgument,
            "stability_margin must be nonnegative");
  }
};

inline std::string shape_of(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

inline void require_shape(const Matrix& m, Eigen::Index rows, Eigen::Index cols,
                          const std::string& name) {
  require(m.rows() == rows && m.cols() == cols, ErrorCode::DimensionMismatch,
          name + " is " + shape_of(m) + ", expected " + std::to_string(rows) + "x" +
              std::to_string(cols));
}

inline void require_square(const Matrix& m, const std::string& name) {
  require(m.rows() == m.cols() && m.rows() > 0, ErrorCode::DimensionMismatch,
          name + " must be square and nonempty, got " + shape_of(m));
}

inline void require_finite(const Matrix& m, const std::string& name) {
  require(m.allFinite(), ErrorCode::NonFinite, name + " has non-finite entries");
}

/// Induced infinity norm (maximum absolute row sum).
inline double inf_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  return m.cwiseAbs().rowwise().sum().maxCoeff();
}

inline Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

inline bool is_symmetric(const Matrix& m, double tol) {
  return m.rows() == m.cols() && (m - m.transpose()).cwiseAbs().maxCoeff() <= tol;
}

inline double trace(const Matrix& m) { return m.trace(); }

inline Matrix matrix_power(const Matrix& a, int k) {
  require_square(a, "matrix_power argument");
  require(k >= 0, ErrorCode::InvalidArgument, "matrix_power exponent must be >= 0");
  Matrix result = Matrix::Identity(a.rows(), a.cols());
  Matrix base = a;
  while (k > 0) {
    if (k & 1) result = result * base;
    k >>= 1;
    if (k > 0) base = base * base;
  }
  return result;
}

inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

inline double spectral_radius(const Matrix& a) {
  require_square(a, "spectral_radius argument");
  require_finite(a, "spectral_radius argument");
  Eigen::EigenSolver<Matrix> solver(a, /*computeEigenvectors=*/false);
  require(solver.info() == Eigen::Success, ErrorCode::NonConvergence,
          "eigenvalue iteration failed");
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

inline Eigen::LLT<Matrix> llt_pd(const Matrix& m, const std::string& name) {
  require_square(m, name);
  Eigen::LLT<Matrix> llt(m);
  require(llt.info() == Eigen::Success, ErrorCode::NotPositiveDefinite,
          name + " is not positive definite");
  return llt;
}

inline double logdet_pd(const Matrix& m) {
  auto llt = llt_pd(m, "logdet_pd argument");
  const Matrix& l = llt.matrixLLT();
  double sum = 0.0;
  for (Eigen::Index i = 0; i < l.rows(); ++i) sum += std::log(l(i, i));
  return 2.0 * sum;
}

inline Matrix inverse_pd(const Matrix& m) {
  auto llt = llt_pd(m, "inverse_pd argument");
  return symmetrize(llt.solve(Matrix::Identity(m.rows(), m.cols())));
}

/// Factor F with F Fᵀ = M for symmetric PSD M. Eigenvalues below
/// zero_threshold are clipped to zero; clearly negative ones are rejected.
inline Matrix psd_sqrt(const Matrix& m, double zero_threshold) {
  require_square(m, "psd_sqrt argument");
  require(is_symmetric(m, 1e-9 * std::max(1.0, m.cwiseAbs().maxCoeff())),
          ErrorCode::InvalidArgument, "psd_sqrt argument must be symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrize(m));
  require(eig.info() == Eigen::Success, ErrorCode::NonConvergence,
          "symmetric eigendecomposition failed");
  Vector lambda = eig.eigenvalues();
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    require(lambda(i) > -zero_threshold, ErrorCode::NotPositiveDefinite,
            "matrix is not positive semidefinite (eigenvalue " + std::to_string(lambda(i)) + ")");
    lambda(i) = lambda(i) < zero_threshold ? 0.0 : std::sqrt(lambda(i));
  }
  return eig.eigenvectors() * lambda.asDiagonal();
}

inline bool is_psd(const Matrix& m, double zero_threshold) {
  if (m.rows() != m.cols() || !is_symmetric(m, 1e-9 * std::max(1.0, m.cwiseAbs().maxCoeff())))
    return false;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrize(m), Eigen::EigenvaluesOnly);
  return eig.info() == Eigen::Success && eig.eigenvalues().minCoeff() > -zero_threshold;
}

// ---------------------------------------------------------------------------
// Discrete algebraic Riccati equation
//   P = A P Aᵀ + Q − A P Cᵀ (C P Cᵀ + R)⁻¹ C P Aᵀ
// The control equation for S is the same map with (Aᵀ, Bᵀ, W, U).
// ---------------------------------------------------------------------------

inline Matrix riccati_map(const Matrix& p, const Matrix& a, const Matrix& c, const Matrix& q,
                          const Matrix& r) {
  const Matrix apc = a * p * c.transpose();
  const Matrix innov = c * p * c.transpose() + r;
  return a * p * a.transpose() + q - apc * innov.llt().solve(apc.transpose());
}

inline double dare_residual(const Matrix& p, const Matrix& a, const Matrix& c, const Matrix& q,
                            const Matrix& r) {
  return inf_norm(p - riccati_map(p, a, c, q, r));
}

inline Matrix solve_dare(const Matrix& a, const Matrix& c, const Matrix& q, const Matrix& r,
                         const SolverOptions& opts = {}) {
  opts.validate();
  require_square(a, "A");
  const auto n = a.rows();
  require(c.cols() == n, ErrorCode::DimensionMismatch,
          "C has " + std::to_string(c.cols()) + " columns, expected " + std::to_string(n));
  require_shape(q, n, n, "Q");
  require_shape(r, c.rows(), c.rows(), "R");
  require_finite(a, "A");
  require_finite(c, "C");
  require_finite(q, "Q");
  require_finite(r, "R");
  llt_pd(symmetrize(r), "R");

  Matrix p = symmetrize(q);
  for (int it = 0; it < opts.max_iterations; ++it) {
    Matrix next = symmetrize(riccati_map(p, a, c, q, r));
    require(next.allFinite(), ErrorCode::NonConvergence, "Riccati iteration diverged");
    const double step = inf_norm(next - p);
    p = std::move(next);
    if (step <= 0.1 * opts.tolerance && dare_residual(p, a, c, q, r) <= opts.tolerance) return p;
  }
  const double residual = dare_residual(p, a, c, q, r);
  require(residual <= opts.tolerance, ErrorCode::NonConvergence,
          "Riccati residual " + std::to_string(residual) + " after " +
              std::to_string(opts.max_iterations) + " iterations");
  return p;
}

// ---------------------------------------------------------------------------
// Discrete Lyapunov equation  X = A X Aᵀ + Q
// ---------------------------------------------------------------------------

enum class LyapunovMethod {
  // X = Σᵢ Aⁱ Q (Aᵀ)ⁱ, accumulated in doubling blocks (Smith iteration).
  Series,
  // (I − A⊗A) vec X = vec Q, dense LU.
  Kronecker,
};

inline double lyapunov_residual(const Matrix& x, const Matrix& a, const Matrix& q) {
  return inf_norm(a * x * a.transpose() - x + q);
}

inline void require_schur_stable(const Matrix& a, const SolverOptions& opts,
                                 const std::string& name) {
  const double rho = spectral_radius(a);
  require(rho < 1.0 - opts.stability_margin, ErrorCode::UnstableMatrix,
          name + " has spectral radius " + std::to_string(rho));
}

inline Matrix solve_dlyap(const Matrix& a, const Matrix& q, const SolverOptions& opts = {},
                          LyapunovMethod method = LyapunovMethod::Series) {
  opts.validate();
  require_square(a, "A");
  require_shape(q, a.rows(), a.rows(), "Q");
  require_finite(q, "Q");
  require_schur_stable(a, opts, "Lyapunov matrix");
  const bool symmetric_q = is_symmetric(q, 1e-12 * std::max(1.0, q.cwiseAbs().maxCoeff()));
  const auto n = a.rows();

  Matrix x;
  if (method == LyapunovMethod::Kronecker) {
    const Matrix lhs = Matrix::Identity(n * n, n * n) - kron(a, a);
    const Vector rhs = Eigen::Map<const Vector>(q.data(), n * n);
    const Vector sol = lhs.partialPivLu().solve(rhs);
    x = Eigen::Map<const Matrix>(sol.data(), n, n);
  } else {
    x = q;
    Matrix power = a;
    bool converged = false;
    for (int it = 0; it < opts.max_iterations; ++it) {
      const Matrix block = power * x * power.transpose();
      x += block;
      power = power * power;
      if (inf_norm(block) <= 1e-3 * opts.tolerance) {
        converged = true;
        break;
      }
    }
    require(converged, ErrorCode::NonConvergence, "Lyapunov series did not converge");
  }
  if (symmetric_q) x = symmetrize(x);
  const double residual = lyapunov_residual(x, a, q);
  require(residual <= opts.tolerance, ErrorCode::NonConvergence,
          "Lyapunov residual " + std::to_string(residual));
  return x;
}

}  // namespace wmcusum
