#include "wmcusum/plant.hpp"

#include <random>

#include <gtest/gtest.h>

#include "test_util.hpp"
#include "wmcusum/benchmarks.hpp"
#include "wmcusum/simulation.hpp"

namespace wmcusum {
namespace {

using test::MatricesNear;

SystemModel identity_system(Eigen::Index n) {
  SystemModel s;
  s.A = Matrix::Zero(n, n);
  s.B = s.C = s.Q = s.R = s.W = s.U = Matrix::Identity(n, n);
  return s;
}

GTEST_TEST(Design, DecoupledIdentityPlant) {
  const ClosedLoopDesign d = design(identity_system(3));
  EXPECT_TRUE(MatricesNear(d.P, Matrix::Identity(3, 3), 1e-14));
  EXPECT_TRUE(MatricesNear(d.K, 0.5 * Matrix::Identity(3, 3), 1e-14));
  EXPECT_TRUE(MatricesNear(d.Sigma_gamma, 2.0 * Matrix::Identity(3, 3), 1e-14));
}

GTEST_TEST(Design, BenchmarksAreStableWithSmallResiduals) {
  for (auto name : kBenchmarkNames) {
    const SystemModel s = benchmark(name).model;
    const ClosedLoopDesign d = design(s);
    EXPECT_LE(dare_residual(d.P, s.A, s.C, s.Q, s.R), 1e-9) << name;
    EXPECT_LE(dare_residual(d.S, s.A.transpose(), s.B.transpose(), s.W, s.U), 1e-9) << name;
    EXPECT_LT(spectral_radius(d.Acl), 1.0) << name;
    EXPECT_LT(spectral_radius(feedback_matrix(s, d)), 1.0) << name;
    // Gain formulas.
    EXPECT_TRUE(MatricesNear(d.K * d.Sigma_gamma, d.P * s.C.transpose(), 1e-10)) << name;
    EXPECT_TRUE(MatricesNear((s.B.transpose() * d.S * s.B + s.U) * d.L,
                             -s.B.transpose() * d.S * s.A, 1e-10))
        << name;
    EXPECT_TRUE(MatricesNear(d.Sigma_gamma, s.C * d.P * s.C.transpose() + s.R, 1e-12)) << name;
  }
}

GTEST_TEST(Design, ValidationErrors) {
  SystemModel s = system_a().model;
  s.R = Matrix::Identity(2, 2);
  try {
    design(s);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
  }
  s = system_a().model;
  s.U(0, 1) = 0.1;
  s.U(1, 0) = 0.1;
  try {
    design(s);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidArgument);
  }
}

GTEST_TEST(StepNormal, NoiselessLoopStaysAtZero) {
  const SystemModel s = system_a().model;
  const ClosedLoopDesign d = design(s);
  LoopState st = zero_state(s);
  const NoiseDraw zero{Vector::Zero(2), Vector::Zero(1), Vector::Zero(2)};
  for (int k = 0; k < 50; ++k) {
    auto [next, rec] = step_normal(st, d, s, zero);
    EXPECT_EQ(rec.gamma.norm(), 0.0);
    EXPECT_EQ(rec.u.norm(), 0.0);
    st = next;
  }
  EXPECT_EQ(st.x.norm(), 0.0);
  EXPECT_EQ(st.xhat_pred.norm(), 0.0);
}

GTEST_TEST(Simulate, Deterministic) {
  const SystemModel s = system_b().model;
  const ClosedLoopDesign d = design(s);
  const Matrix se = 0.3 * Matrix::Identity(2, 2);
  const auto a = simulate(s, d, se, 100, 42);
  const auto b = simulate(s, d, se, 100, 42);
  const auto c = simulate(s, d, se, 100, 43);
  ASSERT_EQ(a.size(), 100u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].k, static_cast<std::int64_t>(i) + 1);
    EXPECT_EQ(a[i].y, b[i].y);
    EXPECT_EQ(a[i].gamma, b[i].gamma);
    EXPECT_EQ(a[i].e, b[i].e);
  }
  EXPECT_NE(a[10].y, c[10].y);
}

GTEST_TEST(Simulate, WatermarkScalesSameStandardDraws) {
  const SystemModel s = system_a().model;
  const ClosedLoopDesign d = design(s);
  const auto a = simulate(s, d, 1.0 * Matrix::Identity(2, 2), 20, 7);
  const auto b = simulate(s, d, 4.0 * Matrix::Identity(2, 2), 20, 7);
  for (std::size_t i = 0; i < a.size(); ++i)
    EXPECT_TRUE(MatricesNear(b[i].e, 2.0 * a[i].e, 1e-12));
}

GTEST_TEST(Simulate, InnovationStatisticsUnderNormalOperation) {
  const SystemModel s = system_b().model;
  const ClosedLoopDesign d = design(s);
  const Matrix se = 0.5 * Matrix::Identity(2, 2);
  const auto recs = simulate(s, d, se, 100000, 2024);
  Matrix cov = Matrix::Zero(2, 2), cross = Matrix::Zero(2, 2);
  Vector mean = Vector::Zero(2);
  for (std::size_t i = 1; i < recs.size(); ++i) {
    mean += recs[i].gamma;
    cov += recs[i].gamma * recs[i].gamma.transpose();
    cross += recs[i].gamma * recs[i - 1].e.transpose();
  }
  const double count = static_cast<double>(recs.size() - 1);
  mean /= count;
  cov /= count;
  cross /= count;
  EXPECT_LT(test::relative_frobenius(cov, d.Sigma_gamma), 0.05);
  EXPECT_LT(mean.norm(), 0.05 * std::sqrt(d.Sigma_gamma.trace()));
  // Uncorrelated with the previous watermark: 5 % of the scale √(Σ_γ Σ_e).
  const double scale = std::sqrt(d.Sigma_gamma.norm() * se.norm());
  EXPECT_LT(cross.norm(), 0.05 * scale);
}

GTEST_TEST(Simulate, WatermarkRaisesStageCost) {
  const SystemModel s = system_a().model;
  const ClosedLoopDesign d = design(s);
  auto cost = [&](const Matrix& se) {
    double total = 0.0;
    Simulator sim(s, d, se, 99);
    for (int k = 0; k < 20000; ++k) {
      const Vector x = sim.state().x;
      const StepRecord r = sim.step();
      total += x.dot(s.W * x) + r.u.dot(s.U * r.u);
    }
    return total / 20000.0;
  };
  EXPECT_GT(cost(0.5 * Matrix::Identity(2, 2)), cost(Matrix::Zero(2, 2)));
}

GTEST_TEST(Simulate, AttackBookkeeping) {
  const SystemModel s = system_a().model;
  const ClosedLoopDesign d = design(s);
  const auto recs = simulate(s, d, 0.5 * Matrix::Identity(2, 2), 100, 5, ReplayAttack{50, 40});
  for (const auto& r : recs) {
    EXPECT_EQ(r.attacked, r.k >= 50) << r.k;
    if (r.k >= 50) EXPECT_EQ(r.y, recs[static_cast<std::size_t>(r.k - 40 - 1)].y) << r.k;
    else EXPECT_EQ(r.y, r.y_true);
  }
}

GTEST_TEST(Simulate, RejectsBadAttackWindow) {
  const SystemModel s = system_a().model;
  const ClosedLoopDesign d = design(s);
  for (auto attack : {ReplayAttack{10, 0}, ReplayAttack{5, 5}}) {
    try {
      simulate(s, d, Matrix::Zero(2, 2), 10, 1, attack);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::InvalidAttackWindow);
    }
  }
}

GTEST_TEST(DeriveSeed, DistinctAndStable) {
  EXPECT_EQ(derive_seed(1, 0), derive_seed(1, 0));
  EXPECT_NE(derive_seed(1, 0), derive_seed(1, 1));
  EXPECT_NE(derive_seed(1, 0), derive_seed(2, 0));
}

}  // namespace
}  // namespace wmcusum
