#include <random>
#include <variant>

#include <gtest/gtest.h>

#include "ocpik/dense_oracle.hpp"
#include "ocpik/riccati.hpp"
#include "ocpik/random_blocks.hpp"

namespace {

using namespace ocpik;
using ocpik::synthetic::random_blocks;
using ocpik::synthetic::random_shape;
using ocpik::synthetic::relative_difference;

StageBlocks scalar_chain(int K, double q, double r, double a, double b) {
  StageBlocks blocks(K + 1);
  for (int k = 0; k <= K; ++k) {
    StageBlock& s = blocks[k];
    const int nu = k < K ? 1 : 0;
    const int nn = k < K ? 1 : 0;
    s.Q = Eigen::MatrixXd::Constant(1, 1, q);
    s.R = Eigen::MatrixXd::Constant(nu, nu, r);
    s.S = Eigen::MatrixXd::Zero(1, nu);
    s.A = Eigen::MatrixXd::Constant(nn, 1, a);
    s.B = Eigen::MatrixXd::Constant(nn, nu, b);
    s.Hu.resize(0, nu);
    s.Hx.resize(0, 1);
    s.rhs.r = Eigen::VectorXd::Zero(nu);
    s.rhs.q = Eigen::VectorXd::Zero(1);
    s.rhs.b = Eigen::VectorXd::Zero(nn);
    s.rhs.h.resize(0);
  }
  return blocks;
}

RiccatiFactorization expect_pd(FactorizeResult r) {
  EXPECT_TRUE(std::holds_alternative<RiccatiFactorization>(r));
  return std::get<RiccatiFactorization>(std::move(r));
}

TEST(Factorize, ScalarCostToGo) {
  const auto blocks = scalar_chain(1, 1.0, 1.0, 1.0, 1.0);
  const auto res = factorize(blocks, 0.0);
  const auto f = expect_pd(res);
  EXPECT_TRUE(f.positive_definite);
  EXPECT_NEAR(f.stages[0].P(0, 0), 1.5, 1e-15);
}

TEST(Factorize, IdentityHessianIsPositiveDefinite) {
  std::mt19937_64 rng(3);
  auto shape = random_shape(rng, 6);
  for (auto& h : shape.nh) h = 0;
  auto blocks = random_blocks(rng, shape);
  for (auto& b : blocks) {
    b.Q.setIdentity();
    b.R.setIdentity();
    b.S.setZero();
  }
  EXPECT_TRUE(expect_pd(factorize(blocks, 0.0)).positive_definite);
}

TEST(Factorize, NegativeControlCurvatureIsReported) {
  auto blocks = scalar_chain(1, 1.0, -1.0, 1.0, 0.0);
  const auto res = factorize(blocks, 0.0);
  ASSERT_TRUE(std::holds_alternative<IndefiniteReport>(res));
  EXPECT_EQ(std::get<IndefiniteReport>(res).stage, 0);
  EXPECT_FALSE(dense_oracle_solve(blocks, 0.0).reduced_pd);
}

TEST(Factorize, RegularizationRestoresDefiniteness) {
  auto blocks = scalar_chain(1, 1.0, -1.0, 1.0, 0.0);
  const auto res = factorize(blocks, 2.0);
  EXPECT_TRUE(expect_pd(res).positive_definite);
  EXPECT_TRUE(dense_oracle_solve(blocks, 2.0).reduced_pd);
}

TEST(Factorize, RankDeficientEqualitiesThrowWithStage) {
  std::mt19937_64 rng(5);
  synthetic::BlockShape shape{{2, 2, 2}, {2, 2, 0}, {2, 0, 0}};
  auto blocks = random_blocks(rng, shape);
  blocks[0].Hu.row(1) = 2.0 * blocks[0].Hu.row(0);
  blocks[0].Hx.row(1) = 2.0 * blocks[0].Hx.row(0);
  try {
    (void)factorize(blocks, 0.0);
    FAIL() << "expected RankDeficientError";
  } catch (const RankDeficientError& e) {
    EXPECT_EQ(e.stage(), 0);
  }
}

TEST(Factorize, NonFiniteInputThrows) {
  auto blocks = scalar_chain(2, 1.0, 1.0, 1.0, 1.0);
  blocks[1].Q(0, 0) = std::nan("");
  try {
    (void)factorize(blocks, 0.0);
    FAIL() << "expected EvaluationError";
  } catch (const EvaluationError& e) {
    EXPECT_EQ(e.stage(), 1);
  }
}

TEST(Solve, ZeroRightHandSideGivesZeroStep) {
  std::mt19937_64 rng(11);
  const auto shape = random_shape(rng, 5);
  auto blocks = random_blocks(rng, shape);
  for (auto& b : blocks) {
    b.rhs.r.setZero();
    b.rhs.q.setZero();
    b.rhs.b.setZero();
    b.rhs.h.setZero();
  }
  const auto f = expect_pd(factorize(blocks, 0.0));
  EXPECT_EQ(solve(f, blocks).inf_norm(), 0.0);
  EXPECT_EQ(dense_oracle_solve(blocks, 0.0).direction.inf_norm(), 0.0);
}

TEST(Solve, MatchesDenseOracle) {
  std::mt19937_64 rng(2024);
  synthetic::BlockShape shape;
  for (int k = 0; k <= 5; ++k) {
    shape.nx.push_back(3);
    shape.nu.push_back(k < 5 ? 2 : 0);
    shape.nh.push_back(k < 5 ? 1 : 0);
  }
  const auto blocks = random_blocks(rng, shape);
  const auto res = factorize(blocks, 0.0);
  const auto f = expect_pd(res);
  const auto d = solve(f, blocks);
  const auto oracle = dense_oracle_solve(blocks, 0.0);
  EXPECT_TRUE(oracle.reduced_pd);
  EXPECT_LE(relative_difference(d, oracle.direction), 1e-8);
}

TEST(Solve, MismatchedFactorizationIsRejected) {
  std::mt19937_64 rng(8);
  const auto a = random_blocks(rng, random_shape(rng, 3));
  const auto b = random_blocks(rng, random_shape(rng, 4));
  const auto f = expect_pd(factorize(a, 0.0));
  EXPECT_THROW((void)solve(f, b), ApiMisuseError);
}

TEST(Solve, DualRegularizationMatchesDense) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    const auto blocks = random_blocks(rng, random_shape(rng, 4));
    const double dc = 1e-3;
    const auto f = expect_pd(factorize(blocks, 0.0, {}, dc));
    const auto d = solve_refined(f, blocks, rhs_of(blocks));
    const auto oracle = dense_oracle_solve(blocks, 0.0, dc);
    EXPECT_LE(relative_difference(d, oracle.direction), 1e-8);
  }
}

TEST(Solve, ReadsOnlyLowerTriangles) {
  std::mt19937_64 rng(21);
  const auto blocks = random_blocks(rng, random_shape(rng, 4));
  auto skewed = blocks;
  for (auto& b : skewed) {
    for (int j = 1; j < b.R.cols(); ++j)
      for (int i = 0; i < j; ++i) b.R(i, j) += 3.0;
    for (int j = 1; j < b.Q.cols(); ++j)
      for (int i = 0; i < j; ++i) b.Q(i, j) -= 5.0;
  }
  const auto f1 = expect_pd(factorize(blocks, 0.0));
  const auto res2 = factorize(skewed, 0.0);
  const auto f2 = expect_pd(res2);
  const auto d1 = solve_refined(f1, blocks, rhs_of(blocks));
  const auto d2 = solve_refined(f2, skewed, rhs_of(skewed));
  EXPECT_EQ(relative_difference(d1, d2), 0.0);
}

TEST(Refinement, ExactDirectionIsUnchanged) {
  StageBlocks blocks = scalar_chain(2, 1.0, 1.0, 1.0, 1.0);
  blocks[0].rhs.q[0] = 1.0;
  blocks[1].rhs.b[0] = 0.5;
  const auto f = expect_pd(factorize(blocks, 0.0));
  StepDirection d = solve(f, blocks);
  const auto res = kkt_residual(blocks, 0.0, rhs_of(blocks), d);
  ASSERT_EQ(inf_norm(res), 0.0);
  const auto r = iterative_refinement(f, blocks, d);
  EXPECT_EQ(r.refinement_steps, 0);
  EXPECT_EQ(relative_difference(r, d), 0.0);
}

TEST(Refinement, RemovesPerturbation) {
  std::mt19937_64 rng(99);
  synthetic::BlockShape shape{{3, 3, 3, 3}, {2, 2, 2, 0}, {1, 0, 1, 0}};
  const auto blocks = random_blocks(rng, shape);
  const auto f = expect_pd(factorize(blocks, 0.0));
  StepDirection d = solve(f, blocks);
  std::uniform_real_distribution<double> noise(-1e-6, 1e-6);
  for (auto& s : d.stages) {
    for (auto* v : {&s.du, &s.dx, &s.dpi, &s.dlam})
      for (auto& x : *v) x += noise(rng);
  }
  const auto r = iterative_refinement(f, blocks, d);
  EXPECT_GE(r.refinement_steps, 1);
  EXPECT_LE(r.residual_norm, 1e-12);
  EXPECT_LE(inf_norm(kkt_residual(blocks, 0.0, rhs_of(blocks), r)), 1e-12);
}

TEST(Refinement, IllConditionedBarrierRow) {
  std::mt19937_64 rng(7);
  synthetic::BlockShape shape{{3, 3, 3, 3}, {2, 2, 2, 0}, {1, 1, 0, 0}};
  auto blocks = random_blocks(rng, shape);
  // A near-active inequality on x_1[0] with z/s = 1e8.
  blocks[1].Q(0, 0) += 1e8;
  const auto f = expect_pd(factorize(blocks, 0.0));
  const auto rhs = rhs_of(blocks);
  const auto d = solve_refined(f, blocks, rhs);
  EXPECT_LE(inf_norm(kkt_residual(blocks, 0.0, rhs, d)),
            1e-8 * inf_norm(rhs));
}

TEST(DenseOracle, SaddlePoint) {
  StageBlocks blocks(1);
  StageBlock& b = blocks[0];
  b.Q = Eigen::MatrixXd::Constant(1, 1, 1.0);
  b.R.resize(0, 0);
  b.S.resize(1, 0);
  b.A.resize(0, 1);
  b.B.resize(0, 0);
  b.Hu.resize(1, 0);
  b.Hx = Eigen::MatrixXd::Constant(1, 1, 1.0);
  b.rhs.r.resize(0);
  b.rhs.q = Eigen::VectorXd::Constant(1, 1.0);
  b.rhs.b.resize(0);
  b.rhs.h = Eigen::VectorXd::Zero(1);
  const auto r = dense_oracle_solve(blocks, 0.0);
  EXPECT_NEAR(r.direction.stages[0].dx[0], 0.0, 1e-15);
  EXPECT_NEAR(r.direction.stages[0].dlam[0], -1.0, 1e-15);
  EXPECT_EQ(r.inertia.positive, 1);
  EXPECT_EQ(r.inertia.negative, 1);
}

TEST(DenseOracle, SingularSystemThrows) {
  auto blocks = scalar_chain(1, 0.0, 0.0, 0.0, 0.0);
  EXPECT_THROW((void)dense_oracle_solve(blocks, 0.0), SingularSystemError);
}

TEST(DenseOracle, MatchesKktResidualDefinition) {
  std::mt19937_64 rng(31);
  const auto blocks = random_blocks(rng, random_shape(rng, 3));
  const auto r = dense_oracle_solve(blocks, 0.3);
  const auto res = kkt_residual(blocks, 0.3, rhs_of(blocks), r.direction);
  EXPECT_LE(inf_norm(res), 1e-10);
}

// Oracle equivalence and inertia agreement over random instances, convex
// and nonconvex, with stagewise equalities.
TEST(Solve, RandomInstancesAgreeWithOracle) {
  std::mt19937_64 rng(1);
  const int horizons[] = {1, 2, 5, 10};
  int pd_count = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int K = horizons[trial % 4];
    const bool convex = trial % 3 != 2;
    const auto blocks = random_blocks(rng, random_shape(rng, K), convex);
    const auto res = factorize(blocks, 0.0);
    const auto oracle = dense_oracle_solve(blocks, 0.0);
    const bool pd = std::holds_alternative<RiccatiFactorization>(res);
    ASSERT_EQ(pd, oracle.reduced_pd) << "trial " << trial;
    if (!pd) continue;
    ++pd_count;
    const auto d = solve_refined(std::get<RiccatiFactorization>(res), blocks,
                                 rhs_of(blocks));
    EXPECT_LE(relative_difference(d, oracle.direction), 1e-8)
        << "trial " << trial;
  }
  EXPECT_GE(pd_count, 60);
}

}  // namespace
