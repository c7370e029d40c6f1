#include "wmcusum/linalg.hpp"

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "test_util.hpp"
#include "wmcusum/benchmarks.hpp"

namespace wmcusum {
namespace {

using test::MatricesNear;

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

GTEST_TEST(SolveDare, ZeroDynamicsReturnsQ) {
  std::mt19937_64 rng(3);
  const Matrix q = test::random_pd(rng, 3);
  const Matrix p = solve_dare(Matrix::Zero(3, 3), test::random_matrix(rng, 2, 3), q,
                              test::random_pd(rng, 2));
  EXPECT_TRUE(MatricesNear(p, q, 1e-14));
}

GTEST_TEST(SolveDare, ScalarClosedForm) {
  // p = a²p + q − a²p²/(p + r) with a = 0.5, q = r = 1 reduces to p² − p/4 − 1 = 0.
  const Matrix p = solve_dare(scalar(0.5), scalar(1), scalar(1), scalar(1));
  EXPECT_NEAR(p(0, 0), (0.25 + std::sqrt(4.0625)) / 2.0, 1e-10);
}

GTEST_TEST(SolveDare, BenchmarkResiduals) {
  for (auto name : kBenchmarkNames) {
    const SystemModel s = benchmark(name).model;
    const Matrix p = solve_dare(s.A, s.C, s.Q, s.R);
    EXPECT_LE(dare_residual(p, s.A, s.C, s.Q, s.R), 1e-9) << name;
    EXPECT_TRUE(is_symmetric(p, 1e-12)) << name;
    const Matrix x = solve_dare(s.A.transpose(), s.B.transpose(), s.W, s.U);
    EXPECT_LE(dare_residual(x, s.A.transpose(), s.B.transpose(), s.W, s.U), 1e-9) << name;
  }
}

GTEST_TEST(SolveDare, RejectsBadShapes) {
  try {
    solve_dare(Matrix::Identity(2, 2), Matrix::Ones(1, 3), Matrix::Identity(2, 2), scalar(1));
    FAIL() << "expected DimensionMismatch";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
  }
}

GTEST_TEST(SolveDlyap, ZeroDynamicsReturnsQ) {
  std::mt19937_64 rng(5);
  const Matrix q = test::random_pd(rng, 4);
  EXPECT_TRUE(MatricesNear(solve_dlyap(Matrix::Zero(4, 4), q), q, 1e-15));
}

GTEST_TEST(SolveDlyap, ScalarClosedForm) {
  for (auto method : {LyapunovMethod::Series, LyapunovMethod::Kronecker}) {
    const Matrix x = solve_dlyap(scalar(0.5), scalar(0.75), {}, method);
    EXPECT_NEAR(x(0, 0), 1.0, 1e-12);
  }
}

GTEST_TEST(SolveDlyap, SeriesMatchesKronecker) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> size(1, 6);
  std::uniform_real_distribution<double> rho(0.0, 0.98);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = size(rng);
    const Matrix a = test::random_stable(rng, n, rho(rng));
    const Matrix g = test::random_matrix(rng, n, n);
    const Matrix q = g + g.transpose();
    const Matrix series = solve_dlyap(a, q, {}, LyapunovMethod::Series);
    const Matrix direct = solve_dlyap(a, q, {}, LyapunovMethod::Kronecker);
    EXPECT_TRUE(MatricesNear(series, direct, 1e-9)) << "trial " << trial;
    EXPECT_LE(lyapunov_residual(series, a, q), 1e-9);
    EXPECT_TRUE(is_symmetric(series, 1e-12));
  }
}

GTEST_TEST(SolveDlyap, RejectsUnstable) {
  try {
    solve_dlyap(scalar(1.0), scalar(1.0));
    FAIL() << "expected UnstableMatrix";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnstableMatrix);
  }
}

GTEST_TEST(SpectralRadius, Examples) {
  EXPECT_NEAR(spectral_radius(Matrix::Identity(3, 3)), 1.0, 1e-15);
  Vector d(4);
  d << 0.4, 0.2, 0.2, 0.7;
  EXPECT_NEAR(spectral_radius(d.asDiagonal().toDenseMatrix()), 0.7, 1e-15);
  // Rotation: complex pair of modulus 0.9.
  Matrix r(2, 2);
  r << 0, -0.9, 0.9, 0;
  EXPECT_NEAR(spectral_radius(r), 0.9, 1e-14);
}

GTEST_TEST(SpectralRadius, ScalesWithMultiplier) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix a = test::random_matrix(rng, 5, 5);
    for (double alpha : {-2.5, 0.3, 7.0})
      EXPECT_NEAR(spectral_radius(alpha * a), std::abs(alpha) * spectral_radius(a), 1e-8);
  }
}

GTEST_TEST(LogdetPd, Examples) {
  EXPECT_NEAR(logdet_pd(Matrix::Identity(5, 5)), 0.0, 1e-15);
  EXPECT_NEAR(logdet_pd(2.0 * Matrix::Identity(2, 2)), 2.0 * std::log(2.0), 1e-15);
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix m = test::random_pd(rng, 3);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(m);
    EXPECT_NEAR(std::exp(logdet_pd(m)), eig.eigenvalues().prod(),
                1e-10 * eig.eigenvalues().prod());
  }
}

GTEST_TEST(LogdetPd, RejectsIndefinite) {
  Matrix m(2, 2);
  m << 1, 2, 2, 1;
  try {
    logdet_pd(m);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotPositiveDefinite);
  }
}

GTEST_TEST(PsdSqrt, ReconstructsRankDeficient) {
  std::mt19937_64 rng(29);
  const Matrix m = test::random_psd_rank(rng, 4, 2);
  const Matrix f = psd_sqrt(m, 1e-12);
  EXPECT_TRUE(MatricesNear(f * f.transpose(), m, 1e-10));
}

GTEST_TEST(Kron, MatchesDefinition) {
  Matrix a(2, 2), b(1, 2);
  a << 1, 2, 3, 4;
  b << 5, 6;
  Matrix expected(2, 4);
  expected << 5, 6, 10, 12, 15, 18, 20, 24;
  EXPECT_TRUE(MatricesNear(kron(a, b), expected, 0.0));
}

}  // namespace
}  // namespace wmcusum
