#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "ocpik/dense_oracle.hpp"
#include "ocpik/ocp.hpp"
#include "ocpik/problems/benchmarks.hpp"
#include "ocpik/stage_blocks.hpp"
#include "flat_nlp.hpp"
#include "toy_problems.hpp"

namespace {

using namespace ocpik;
using test_support::FlatNlp;
using test_support::flat_duals;
using test_support::flatten;
using test_support::PolyStage;
using test_support::random_iterate;
using test_support::random_problem;
using test_support::zero_poly;

KktError flat_kkt(const OcpProblem& p, const Iterate& it, double mu) {
  const FlatNlp f = flatten(p, it);
  const Eigen::VectorXd y = flat_duals(p, it);
  const int m = static_cast<int>(f.rows.size());
  KktError e;
  const Eigen::VectorXd gw = f.grad_f + f.J.transpose() * y +
                             f.Ghat.transpose() * it.lam_g;
  double stat = gw.cwiseAbs().maxCoeff();
  double l1 = y.lpNorm<1>();
  int count = static_cast<int>(y.size());
  double s_c = 1.0;
  if (m > 0) {
    stat = std::max(stat, (it.lam_g + it.z).cwiseAbs().maxCoeff());
    l1 += it.lam_g.lpNorm<1>() + it.z.lpNorm<1>();
    count += 2 * m;
    e.ineq_violation = (f.ghat - it.s).cwiseAbs().maxCoeff();
    e.centering = (it.s.array() * it.z.array() - mu).abs().maxCoeff();
    s_c = std::max(100.0, it.z.lpNorm<1>() / m) / 100.0;
  }
  const double s_d = count > 0 ? std::max(100.0, l1 / count) / 100.0 : 1.0;
  e.stationarity = stat / s_d;
  e.centering /= s_c;
  e.eq_violation = f.c_eq.size() ? f.c_eq.cwiseAbs().maxCoeff() : 0.0;
  e.total = std::max({e.stationarity, e.eq_violation, e.ineq_violation,
                      e.centering});
  return e;
}

void expect_close(double a, double b, double tol) {
  EXPECT_LE(std::abs(a - b), tol * std::max(1.0, std::abs(b))) << a << " vs " << b;
}

// ---------------------------------------------------------------------------

TEST(AssembleNlp, CartPendulumMpcCounts) {
  const auto b = problems::cart_pendulum_mpc();
  const NlpView v = assemble_nlp(b.problem);
  // Σ(nx[k] + nu[k]) over k = 0..25: 26 states and 25 controls.
  EXPECT_EQ(v.n_decision, 26 * 4 + 25 * 1);
  EXPECT_EQ(v.n_slack, 0);
  EXPECT_EQ(v.n_equality, 4 + 100);
}

OcpProblem one_row_problem(Bound bound) {
  StageShape s0{1, 1, 1, 1, 0};
  PolyStage a = zero_poly(s0);
  a.F << 1.0, 1.0;
  a.G(0, 1) = 1.0;
  StageShape s1{0, 1, 0, 0, 0};
  std::vector<Stage> st(2);
  st[0].functions = make_autodiff_stage(std::move(a));
  st[0].bounds = {bound};
  st[1].functions = make_autodiff_stage(zero_poly(s1));
  return make_problem(std::move(st));
}

TEST(AssembleNlp, OneFiniteSideGivesOneSlack) {
  const NlpView v = assemble_nlp(one_row_problem(Bound::at_most(5.0)));
  ASSERT_EQ(v.n_slack, 1);
  EXPECT_EQ(v.slacks[0].side, BoundSide::Upper);
  EXPECT_EQ(v.n_decision, 3);
}

TEST(AssembleNlp, TwoFiniteSidesGiveTwoSlacks) {
  const NlpView v = assemble_nlp(one_row_problem(Bound::between(0.0, 5.0)));
  ASSERT_EQ(v.n_slack, 2);
  EXPECT_EQ(v.slacks[0].side, BoundSide::Lower);
  EXPECT_EQ(v.slacks[1].side, BoundSide::Upper);
  EXPECT_EQ(v.slacks[0].row, v.slacks[1].row);
}

TEST(AssembleNlp, CrossedBoundsAreInfeasible) {
  EXPECT_THROW(assemble_nlp(one_row_problem(Bound::between(1.0, 0.0))),
               InfeasibleBoundsError);
  EXPECT_THROW(assemble_nlp(one_row_problem(Bound{})), InfeasibleBoundsError);
}

TEST(AssembleNlp, DimensionMismatchIsRejected) {
  OcpProblem p = one_row_problem(Bound::at_least(0.0));
  p.dims.nx[1] = 2;
  EXPECT_THROW(assemble_nlp(p), DimensionError);
  OcpProblem q = one_row_problem(Bound::at_least(0.0));
  q.stages[0].bounds.clear();
  EXPECT_THROW(assemble_nlp(q), DimensionError);
}

TEST(AssembleNlp, SlackMapMatchesIndependentEnumeration) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const OcpProblem p = random_problem(rng, 1 + trial % 5, 0.1);
    const NlpView v = assemble_nlp(p);
    Iterate it(p.dims, v.n_slack);
    const FlatNlp f = flatten(p, it);
    ASSERT_EQ(static_cast<int>(f.rows.size()), v.n_slack);
    for (int j = 0; j < v.n_slack; ++j) {
      EXPECT_EQ(v.slacks[j].stage, f.rows[j].stage);
      EXPECT_EQ(v.slacks[j].row, f.rows[j].row);
      EXPECT_EQ(v.slacks[j].sign(), f.rows[j].sign);
    }
    EXPECT_EQ(v.n_decision, f.n);
  }
}

// ---------------------------------------------------------------------------

TEST(KktError, CenteredInteriorPoint) {
  const OcpProblem p = test_support::scalar_bound_problem(1.0);
  Iterate it(p.dims, 1);
  it.w[0] << 1.5;
  it.w[1] << 1.5;
  it.s << 0.5;
  it.z << 1.5;
  const KktError e = kkt_error(p, it, 0.75);
  EXPECT_EQ(e.centering, 0.0);
  EXPECT_EQ(e.ineq_violation, 0.0);
}

TEST(KktError, ExactSolutionHasZeroError) {
  const OcpProblem p = test_support::scalar_bound_problem(1.0);
  Iterate it(p.dims, 1);
  it.w[0] << 1.0;
  it.w[1] << 1.0;
  it.s << 0.0;
  it.z << 1.0;
  it.lam_g << -1.0;
  it.pi[0] << 0.0;
  EXPECT_EQ(kkt_error(p, it, 0.0).total, 0.0);
}

TEST(KktError, NegativeSlackIsADomainError) {
  const OcpProblem p = test_support::scalar_bound_problem(1.0);
  Iterate it(p.dims, 1);
  it.s << -1e-3;
  EXPECT_THROW(kkt_error(p, it, 0.1), DomainError);
  it.s << 1.0;
  it.z << -1.0;
  EXPECT_THROW(kkt_error(p, it, 0.1), DomainError);
}

TEST(KktError, MatchesFlatDenseEvaluation) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 40; ++trial) {
    const OcpProblem p = random_problem(rng, 1 + trial % 6, 0.2);
    const NlpView v = assemble_nlp(p);
    Iterate it = random_iterate(rng, p, v.n_slack);
    // Large multipliers engage the scaling divisors.
    if (trial % 2 == 1) {
      it.lam_g *= 1e3;
      it.z *= 1e3;
      for (auto& pi : it.pi) pi *= 1e3;
    }
    const double mu = 0.1 * (trial + 1);
    const KktError a = kkt_error(p, it, mu);
    const KktError b = flat_kkt(p, it, mu);
    expect_close(a.stationarity, b.stationarity, 1e-14);
    expect_close(a.eq_violation, b.eq_violation, 1e-14);
    expect_close(a.ineq_violation, b.ineq_violation, 1e-14);
    expect_close(a.centering, b.centering, 1e-14);
    expect_close(a.total, b.total, 1e-14);
  }
}

TEST(KktError, CenteringIsComplementarityResidual) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const OcpProblem p = random_problem(rng, 3, 0.1);
    const NlpView v = assemble_nlp(p);
    if (v.n_slack == 0) continue;
    const Iterate it = random_iterate(rng, p, v.n_slack);
    const double mu = 0.37;
    const double expected =
        (it.s.cwiseProduct(it.z).array() - mu).abs().maxCoeff();
    EXPECT_EQ(kkt_error(p, it, mu).centering, expected);
  }
}

TEST(KktError, TotalIsMaxOfComponents) {
  std::mt19937_64 rng(8);
  const OcpProblem p = random_problem(rng, 4, 0.3);
  const Iterate it = random_iterate(rng, p, assemble_nlp(p).n_slack);
  const KktError e = kkt_error(p, it, 1.0);
  EXPECT_EQ(e.total, std::max({e.stationarity, e.eq_violation,
                               e.ineq_violation, e.centering}));
  EXPECT_GE(e.stationarity, 0.0);
  EXPECT_GE(e.eq_violation, 0.0);
}

// ---------------------------------------------------------------------------

TEST(StageBlocks, IdentityHessianAtZero) {
  StageShape s0{2, 3, 3, 0, 0};
  PolyStage a = zero_poly(s0);
  a.P.setIdentity();
  a.F.rightCols(3).setIdentity();
  StageShape s1{0, 3, 0, 0, 0};
  PolyStage b = zero_poly(s1);
  b.P.setIdentity();
  std::vector<Stage> st(2);
  st[0].functions = make_autodiff_stage(std::move(a));
  st[1].functions = make_autodiff_stage(std::move(b));
  const OcpProblem p = make_problem(std::move(st));
  const Iterate it(p.dims, 0);
  const StageBlock blk = eval_stage_blocks(p, it, 1.0, 0);
  EXPECT_TRUE(blk.Q.isIdentity(0.0));
  EXPECT_TRUE(blk.R.isIdentity(0.0));
  EXPECT_TRUE(blk.S.isZero(0.0));
  EXPECT_TRUE(blk.rhs.q.isZero(0.0));
  EXPECT_TRUE(blk.rhs.r.isZero(0.0));
  const StageBlock term = eval_stage_blocks(p, it, 1.0, 1);
  EXPECT_TRUE(term.Q.isIdentity(0.0));
  EXPECT_EQ(term.A.rows(), 0);
  EXPECT_EQ(term.R.rows(), 0);
}

TEST(StageBlocks, BarrierAugmentation) {
  const OcpProblem p = test_support::scalar_bound_problem(-10.0);
  Iterate it(p.dims, 1);
  it.s << 2.0;
  it.z << 3.0;
  const StageBlock blk = eval_stage_blocks(p, it, 0.5, 0);
  EXPECT_DOUBLE_EQ(blk.Q(0, 0), 1.0 + 1.5);
}

TEST(StageBlocks, NonFiniteOutputNamesTheStage) {
  StageShape s0{0, 1, 1, 0, 0};
  PolyStage a = zero_poly(s0);
  a.F(0, 0) = 1.0;
  StageShape s1{0, 1, 0, 0, 0};
  PolyStage bad = zero_poly(s1);
  bad.p[0] = std::numeric_limits<double>::quiet_NaN();
  std::vector<Stage> st(2);
  st[0].functions = make_autodiff_stage(std::move(a));
  st[1].functions = make_autodiff_stage(std::move(bad));
  const OcpProblem p = make_problem(std::move(st));
  const Iterate it(p.dims, 0);
  try {
    eval_stage_blocks(p, it, 1.0, 0);
    FAIL() << "expected EvaluationError";
  } catch (const EvaluationError& e) {
    EXPECT_EQ(e.stage(), 1);
  }
}

// Permutation from the dense layout (u, x, λ, π per stage) to the flat
// ordering (all w, then duals stage by stage: dynamics then equalities).
std::vector<int> dense_to_flat(const OcpDims& d, int n_primal) {
  std::vector<int> perm;
  int w = 0, y = n_primal;
  std::vector<int> w_off, y_off;
  for (int k = 0; k <= d.K; ++k) {
    w_off.push_back(w);
    w += d.nw(k);
    y_off.push_back(y);
    y += (k < d.K ? d.nx[k + 1] : 0) + d.nh[k];
  }
  for (int k = 0; k <= d.K; ++k) {
    for (int i = 0; i < d.nw(k); ++i) perm.push_back(w_off[k] + i);
    const int nn = k < d.K ? d.nx[k + 1] : 0;
    for (int i = 0; i < d.nh[k]; ++i) perm.push_back(y_off[k] + nn + i);
    for (int i = 0; i < nn; ++i) perm.push_back(y_off[k] + i);
  }
  return perm;
}

TEST(StageBlocks, StackedBlocksEqualFlatReducedSystem) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 30; ++trial) {
    const OcpProblem p = random_problem(rng, 1 + trial % 10, 0.3);
    const NlpView v = assemble_nlp(p);
    const Iterate it = random_iterate(rng, p, v.n_slack);
    const double mu = 0.25;

    StageBlocks blocks;
    for (int k = 0; k <= p.dims.K; ++k) {
      blocks.push_back(eval_stage_blocks(p, it, mu, k));
    }
    const Eigen::MatrixXd M = dense_kkt_matrix(blocks, 0.0);
    const Eigen::VectorXd rhs = dense_vector(blocks, rhs_of(blocks));

    // Eliminating Δs, Δλ_g, Δz from the full Newton system leaves
    // [W + Ĝ'ΣĜ  J'; J  0] with right-hand side (∇f + J'y − Ĝ'(μ − z∘c)/s, c_eq).
    const FlatNlp f = flatten(p, it);
    const Eigen::VectorXd y = flat_duals(p, it);
    const Eigen::VectorXd sigma = it.z.cwiseQuotient(it.s);
    const Eigen::VectorXd c = f.ghat - it.s;
    const int n = f.n;
    const int neq = static_cast<int>(f.J.rows());
    Eigen::MatrixXd Mf = Eigen::MatrixXd::Zero(n + neq, n + neq);
    Mf.topLeftCorner(n, n) =
        f.W + f.Ghat.transpose() * sigma.asDiagonal() * f.Ghat;
    Mf.bottomLeftCorner(neq, n) = f.J;
    Mf.topRightCorner(n, neq) = f.J.transpose();
    Eigen::VectorXd rf(n + neq);
    rf.head(n) = f.grad_f + f.J.transpose() * y -
                 f.Ghat.transpose() *
                     ((mu - it.z.array() * c.array()) / it.s.array()).matrix();
    rf.tail(neq) = f.c_eq;

    const auto perm = dense_to_flat(p.dims, n);
    ASSERT_EQ(static_cast<int>(perm.size()), M.rows());
    double diff = 0.0;
    for (int i = 0; i < M.rows(); ++i) {
      diff = std::max(diff, std::abs(rhs[i] - rf[perm[i]]));
      for (int j = 0; j < M.cols(); ++j) {
        diff = std::max(diff, std::abs(M(i, j) - Mf(perm[i], perm[j])));
      }
    }
    EXPECT_LE(diff, 1e-14) << "trial " << trial;
  }
}

TEST(StageBlocks, BarrierTermIsPositiveSemidefinite) {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 30; ++trial) {
    const OcpProblem p = random_problem(rng, 2, 0.0);
    const NlpView v = assemble_nlp(p);
    Iterate it = random_iterate(rng, p, v.n_slack);
    std::uniform_real_distribution<double> pos(1e-3, 1e3);
    for (int j = 0; j < v.n_slack; ++j) {
      it.s[j] = pos(rng);
      it.z[j] = pos(rng);
    }
    Iterate bare = it;
    bare.z.setZero();
    for (int k = 0; k <= p.dims.K; ++k) {
      const StageBlock a = eval_stage_blocks(p, it, 1.0, k);
      const StageBlock b = eval_stage_blocks(p, bare, 1.0, k);
      const int nu = a.nu(), nx = a.nx();
      Eigen::MatrixXd D(nu + nx, nu + nx);
      D << a.R - b.R, (a.S - b.S).transpose(), a.S - b.S, a.Q - b.Q;
      ASSERT_TRUE(D.isApprox(D.transpose(), 1e-14) || D.norm() == 0.0);
      if (D.size() == 0) continue;
      const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(D);
      EXPECT_GE(es.eigenvalues().minCoeff(),
                -1e-12 * std::max(1.0, D.cwiseAbs().maxCoeff()));
    }
  }
}

// A two-sided row, and the same function listed twice with one side each.
OcpProblem split_pair(bool split) {
  StageShape sh{1, 2, 2, split ? 2 : 1, 0};
  PolyStage a = zero_poly(sh);
  a.P.setIdentity();
  a.F << 0.1, 1.0, 0.2, 0.3, 0.9, 0.1;
  a.G.row(0) << 0.5, -1.0, 2.0;
  if (split) a.G.row(1) = a.G.row(0);
  StageShape t{0, 2, 0, 0, 0};
  PolyStage b = zero_poly(t);
  b.P.setIdentity();
  std::vector<Stage> st(2);
  st[0].functions = make_autodiff_stage(std::move(a));
  st[0].bounds = split ? std::vector<Bound>{Bound::at_least(-1.0),
                                            Bound::at_most(2.0)}
                       : std::vector<Bound>{Bound::between(-1.0, 2.0)};
  st[1].functions = make_autodiff_stage(std::move(b));
  return make_problem(std::move(st));
}

TEST(AssembleNlp, TwoSidedSplitMatchesTwoOneSidedRows) {
  const OcpProblem joined = split_pair(false);
  const OcpProblem split = split_pair(true);
  const NlpView vj = assemble_nlp(joined);
  const NlpView vs = assemble_nlp(split);
  ASSERT_EQ(vj.n_slack, 2);
  ASSERT_EQ(vs.n_slack, 2);
  std::mt19937_64 rng(2);
  const Iterate it = random_iterate(rng, joined, 2);
  const KktError a = kkt_error(joined, it, 0.3);
  const KktError b = kkt_error(split, it, 0.3);
  EXPECT_DOUBLE_EQ(a.total, b.total);
  EXPECT_DOUBLE_EQ(a.stationarity, b.stationarity);
  EXPECT_DOUBLE_EQ(a.ineq_violation, b.ineq_violation);
  for (int k = 0; k <= 1; ++k) {
    const StageBlock ba = eval_stage_blocks(joined, it, 0.3, k);
    const StageBlock bb = eval_stage_blocks(split, it, 0.3, k);
    EXPECT_TRUE(ba.Q.isApprox(bb.Q, 1e-14));
    EXPECT_TRUE(ba.R.isApprox(bb.R, 1e-14));
    EXPECT_TRUE(ba.S.isApprox(bb.S, 1e-14) || ba.S.norm() < 1e-14);
    EXPECT_LE((ba.rhs.q - bb.rhs.q).lpNorm<Eigen::Infinity>(), 1e-14);
    if (ba.nu() > 0) {
      EXPECT_LE((ba.rhs.r - bb.rhs.r).lpNorm<Eigen::Infinity>(), 1e-14);
    }
  }
}

}  // namespace
