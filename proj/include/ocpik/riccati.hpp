#pragma once

#include <algorithm>
#include <cmath>
#include <variant>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/SVD>

#include "ocpik/errors.hpp"
#include "ocpik/stage_blocks.hpp"

/// Structured solver for the reduced primal-dual system
///
///   [ R+δI  S'    H_u'  B'  ] [Δu_k  ]     [ r_k ]
///   [ S     Q+δI  H_x'  A'  ] [Δx_k  ]  = −[ q_k ]    (and −Δπ_k in the Δx_k row)
///   [ H_u   H_x             ] [Δλ_k  ]     [ h_k ]
///   [ B     A           −I  ] [Δπ_k+1]     [ b_k ]    (−I multiplies Δx_{k+1})
///
/// Stagewise equalities are eliminated inside a backward Riccati sweep. At
/// stage k the stage equalities and the constraints handed back from stage
/// k+1 are stacked into C_u u + C_x x + c = 0. An SVD of C_u splits u into a
/// range part fixed by the constraints and a null-space part Z that is
/// optimized; rows of the left null space of C_u do not involve u and are
/// handed back to stage k−1 as constraints on x_k. What remains at stage 0 is
/// an equality-constrained problem in x_0 alone.
///
/// The null-space Hessians Z'(R + δI + B'PB)Z are the pivots of the
/// recursion; the reduced Hessian of the whole system is positive definite
/// exactly when all of them are, which is how inertia is detected.
namespace ocpik {

struct RiccatiOptions {
  double pivot_tol = 1e-12;  // relative, PD detection
  double rank_tol = 1e-10;   // relative, equality Jacobian rank
  int max_refine = 5;
  double refine_tol = 1e-12;  // times max(1, ‖rhs‖∞)
  double stall_factor = 0.9;
};

/// First nonpositive pivot of the recursion. stage == -1 refers to the
/// initial-state subproblem.
struct IndefiniteReport {
  int stage = 0;
  double pivot = 0.0;
};

namespace detail {

inline Eigen::MatrixXd sym_lower(const Eigen::MatrixXd& m) {
  return m.selfadjointView<Eigen::Lower>();
}

// Null-space elimination data for one stage (or for x_0).
struct Elimination {
  int rank = 0;
  Eigen::MatrixXd Y;      // range basis of C_u'       (n × rank)
  Eigen::MatrixXd Z;      // null-space basis of C_u   (n × n − rank)
  Eigen::MatrixXd U1;     // left singular vectors      (nc × rank)
  Eigen::MatrixXd U2;     // left null space            (nc × nc − rank)
  Eigen::VectorXd sigma;  // nonzero singular values
};

inline Elimination eliminate(const Eigen::MatrixXd& C, double rank_tol) {
  Elimination e;
  const auto nc = C.rows();
  const auto n = C.cols();
  if (nc == 0 || n == 0) {
    e.Y.resize(n, 0);
    e.Z = Eigen::MatrixXd::Identity(n, n);
    e.U1.resize(nc, 0);
    e.U2 = Eigen::MatrixXd::Identity(nc, nc);
    e.sigma.resize(0);
    return e;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(C, Eigen::ComputeFullU |
                                               Eigen::ComputeFullV);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double thresh = rank_tol * std::max(1.0, sv[0]);
  int rank = 0;
  while (rank < sv.size() && sv[rank] > thresh) ++rank;
  e.rank = rank;
  e.Y = svd.matrixV().leftCols(rank);
  e.Z = svd.matrixV().rightCols(n - rank);
  e.U1 = svd.matrixU().leftCols(rank);
  e.U2 = svd.matrixU().rightCols(nc - rank);
  e.sigma = sv.head(rank);
  return e;
}

inline bool full_row_rank(const Eigen::MatrixXd& G, double rank_tol) {
  if (G.rows() == 0) return true;
  if (G.rows() > G.cols()) return false;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(G);
  const Eigen::VectorXd& sv = svd.singularValues();
  return sv[G.rows() - 1] > rank_tol * std::max(1.0, sv[0]);
}

// LDLT of a reduced Hessian; returns the smallest pivot (0 when empty).
inline double factor_reduced(const Eigen::MatrixXd& H,
                             Eigen::LDLT<Eigen::MatrixXd>& ldlt,
                             double pivot_tol, bool& pd) {
  if (H.rows() == 0) {
    pd = true;
    return 0.0;
  }
  ldlt.compute(H);
  const Eigen::VectorXd D = ldlt.vectorD();
  // Each pivot is judged against its own diagonal entry: barrier terms can
  // make single entries many orders larger than the rest.
  const Eigen::VectorXd diag = ldlt.transpositionsP() * H.diagonal();
  pd = ldlt.info() == Eigen::Success && D.allFinite();
  for (Eigen::Index i = 0; pd && i < D.size(); ++i) {
    pd = D[i] > pivot_tol * std::max(1.0, std::abs(diag[i]));
  }
  return D.minCoeff();
}

}  // namespace detail

/// Per-stage factors of the backward recursion.
struct RiccatiStageFactor {
  Eigen::MatrixXd Ruu;   // R + δI + B'PB
  Eigen::MatrixXd Rxu;   // S + A'PB          (nx × nu)
  Eigen::MatrixXd gain;  // u = gain·x + feedforward
  Eigen::MatrixXd P;     // cost-to-go Hessian at x_k
  Eigen::MatrixXd G;     // constraint handed back to stage k−1: G x_k + g = 0
  detail::Elimination elim;
  Eigen::LDLT<Eigen::MatrixXd> reduced;
  bool has_reduced = false;
};

/// Immutable result of factorize(); safe to read concurrently.
struct RiccatiFactorization {
  std::vector<RiccatiStageFactor> stages;  // K+1, terminal holds P and G
  detail::Elimination x0_elim;             // G_0 for the x_0 subproblem
  Eigen::LDLT<Eigen::MatrixXd> x0_reduced;
  bool x0_has_reduced = false;
  double delta = 0.0;
  double delta_c = 0.0;
  bool positive_definite = false;
  std::vector<int> nu, nx, nh;  // shape signature checked by solve()

  int K() const { return static_cast<int>(stages.size()) - 1; }
};

using FactorizeResult = std::variant<RiccatiFactorization, IndefiniteReport>;

namespace detail {

inline void check_blocks(const StageBlocks& blocks) {
  if (blocks.size() < 2) throw DimensionError("need at least two stages");
  const int K = static_cast<int>(blocks.size()) - 1;
  for (int k = 0; k <= K; ++k) {
    const StageBlock& b = blocks[k];
    const int nx_next = k < K ? blocks[k + 1].nx() : 0;
    if (b.S.rows() != b.nx() || b.S.cols() != b.nu() || b.Q.cols() != b.nx() ||
        b.R.cols() != b.nu() || b.A.cols() != b.nx() ||
        b.nx_next() != nx_next || (k < K && b.B.cols() != b.nu()) ||
        (k < K && b.B.rows() != nx_next) || b.Hu.rows() != b.nh() ||
        b.Hu.cols() != b.nu() || b.Hx.cols() != b.nx()) {
      throw DimensionError("inconsistent block dimensions at stage " +
                           std::to_string(k));
    }
    if (k == K && b.nu() != 0) {
      throw DimensionError("terminal stage has no controls");
    }
    if (!b.Q.allFinite() || !b.R.allFinite() || !b.S.allFinite() ||
        !b.A.allFinite() || !b.B.allFinite() || !b.Hu.allFinite() ||
        !b.Hx.allFinite()) {
      throw EvaluationError("non-finite block entries", k);
    }
  }
}

// Stage Hessian and gradient with equality rows folded in as penalties when
// dual regularization δ_c > 0: adds H'H/δ_c and H'h/δ_c.
struct StageQuadratic {
  Eigen::MatrixXd R, S, Q;
  Eigen::MatrixXd Hu, Hx;  // empty rows when folded
};

inline StageQuadratic stage_quadratic(const StageBlock& b, double delta,
                                      double delta_c) {
  StageQuadratic s;
  s.R = sym_lower(b.R);
  s.Q = sym_lower(b.Q);
  s.S = b.S;
  s.R.diagonal().array() += delta;
  s.Q.diagonal().array() += delta;
  if (delta_c > 0.0 && b.nh() > 0) {
    const double w = 1.0 / delta_c;
    s.R.noalias() += w * b.Hu.transpose() * b.Hu;
    s.S.noalias() += w * b.Hx.transpose() * b.Hu;
    s.Q.noalias() += w * b.Hx.transpose() * b.Hx;
    s.Hu.resize(0, b.nu());
    s.Hx.resize(0, b.nx());
  } else {
    s.Hu = b.Hu;
    s.Hx = b.Hx;
  }
  return s;
}

}  // namespace detail

/// Backward factorization sweep. Returns an IndefiniteReport instead of a
/// factorization when a reduced-space pivot is not strictly positive.
/// Throws RankDeficientError when the stacked equality Jacobian loses row
/// rank, EvaluationError on non-finite blocks.
///
/// δ is added to the full-space Hessian diagonal (all Q_k, R_k); δ_c > 0
/// replaces the stage equality rows by penalties of weight 1/δ_c, which is
/// the same system as −δ_c·I in their dual block.
inline FactorizeResult factorize(const StageBlocks& blocks, double delta,
                                 const RiccatiOptions& opt = {},
                                 double delta_c = 0.0) {
  detail::check_blocks(blocks);
  const int K = static_cast<int>(blocks.size()) - 1;
  RiccatiFactorization f;
  f.delta = delta;
  f.delta_c = delta_c;
  f.stages.resize(K + 1);
  for (const auto& b : blocks) {
    f.nu.push_back(b.nu());
    f.nx.push_back(b.nx());
    f.nh.push_back(b.nh());
  }

  {
    const StageBlock& b = blocks[K];
    const auto sq = detail::stage_quadratic(b, delta, delta_c);
    RiccatiStageFactor& t = f.stages[K];
    t.P = sq.Q;
    t.G = sq.Hx;
    if (!detail::full_row_rank(t.G, opt.rank_tol)) {
      throw RankDeficientError("terminal equality Jacobian is rank deficient",
                               K);
    }
  }

  for (int k = K - 1; k >= 0; --k) {
    const StageBlock& b = blocks[k];
    const auto sq = detail::stage_quadratic(b, delta, delta_c);
    RiccatiStageFactor& st = f.stages[k];
    const RiccatiStageFactor& next = f.stages[k + 1];
    const int nu = b.nu();
    const int nx = b.nx();

    const Eigen::MatrixXd PB = next.P * b.B;
    st.Ruu = sq.R;
    st.Ruu.noalias() += b.B.transpose() * PB;
    st.Rxu = sq.S;
    st.Rxu.noalias() += b.A.transpose() * PB;
    Eigen::MatrixXd Rxx = sq.Q;
    Rxx.noalias() += b.A.transpose() * next.P * b.A;

    const int nh = static_cast<int>(sq.Hu.rows());
    const int nprop = static_cast<int>(next.G.rows());
    Eigen::MatrixXd Cu(nh + nprop, nu);
    Eigen::MatrixXd Cx(nh + nprop, nx);
    Cu.topRows(nh) = sq.Hu;
    Cx.topRows(nh) = sq.Hx;
    Cu.bottomRows(nprop).noalias() = next.G * b.B;
    Cx.bottomRows(nprop).noalias() = next.G * b.A;

    st.elim = detail::eliminate(Cu, opt.rank_tol);
    const auto& e = st.elim;

    // u = Y·u_y + Z·u_z with Σ1·u_y = −U1'(C_x x + c).
    const Eigen::MatrixXd Lx =
        -e.Y * (e.sigma.cwiseInverse().asDiagonal() * (e.U1.transpose() * Cx));
    const Eigen::MatrixXd Hred = e.Z.transpose() * st.Ruu * e.Z;
    bool pd = true;
    st.has_reduced = Hred.rows() > 0;
    const double pivot =
        detail::factor_reduced(Hred, st.reduced, opt.pivot_tol, pd);
    if (!pd) return IndefiniteReport{k, pivot};

    st.gain = Lx;
    if (st.has_reduced) {
      const Eigen::MatrixXd Gred =
          e.Z.transpose() * (st.Ruu * Lx + st.Rxu.transpose());
      st.gain.noalias() -= e.Z * st.reduced.solve(Gred);
    }
    st.P = Rxx;
    st.P.noalias() += st.Rxu * st.gain;
    st.P.noalias() += st.gain.transpose() * st.Rxu.transpose();
    st.P.noalias() += st.gain.transpose() * st.Ruu * st.gain;
    st.P = 0.5 * (st.P + st.P.transpose()).eval();

    st.G = e.U2.transpose() * Cx;
    if (!detail::full_row_rank(st.G, opt.rank_tol)) {
      throw RankDeficientError(
          "equality constraints cannot be satisfied independently", k);
    }
  }

  // Equality-constrained subproblem in x_0.
  const RiccatiStageFactor& s0 = f.stages[0];
  f.x0_elim = detail::eliminate(s0.G, opt.rank_tol);
  if (f.x0_elim.rank != s0.G.rows()) {
    throw RankDeficientError("initial-state constraints are rank deficient",
                             0);
  }
  const Eigen::MatrixXd H0 = f.x0_elim.Z.transpose() * s0.P * f.x0_elim.Z;
  bool pd = true;
  f.x0_has_reduced = H0.rows() > 0;
  const double pivot =
      detail::factor_reduced(H0, f.x0_reduced, opt.pivot_tol, pd);
  if (!pd) return IndefiniteReport{-1, pivot};
  f.positive_definite = true;
  return f;
}

inline StepDirection zero_direction(const std::vector<int>& nu,
                                    const std::vector<int>& nx,
                                    const std::vector<int>& nh) {
  StepDirection d;
  const int K = static_cast<int>(nu.size()) - 1;
  d.stages.resize(K + 1);
  for (int k = 0; k <= K; ++k) {
    d.stages[k].du = Eigen::VectorXd::Zero(nu[k]);
    d.stages[k].dx = Eigen::VectorXd::Zero(nx[k]);
    d.stages[k].dpi = Eigen::VectorXd::Zero(k < K ? nx[k + 1] : 0);
    d.stages[k].dlam = Eigen::VectorXd::Zero(nh[k]);
  }
  return d;
}

/// Solves M·Δ = −rhs with a factorization of M. O(K).
inline StepDirection solve(const RiccatiFactorization& f,
                           const StageBlocks& blocks, const KktVector& rhs) {
  const int K = f.K();
  if (static_cast<int>(blocks.size()) != K + 1 ||
      static_cast<int>(rhs.size()) != K + 1) {
    throw ApiMisuseError("factorization does not match the blocks");
  }
  for (int k = 0; k <= K; ++k) {
    if (blocks[k].nu() != f.nu[k] || blocks[k].nx() != f.nx[k] ||
        blocks[k].nh() != f.nh[k]) {
      throw ApiMisuseError("factorization does not match the blocks");
    }
  }
  const bool folded = f.delta_c > 0.0;

  // Backward sweep over the right-hand side.
  std::vector<Eigen::VectorXd> p(K + 1), g(K + 1), ru(K + 1), ff(K + 1);
  auto folded_grad = [&](int k, Eigen::VectorXd& r, Eigen::VectorXd& q) {
    const StageBlock& b = blocks[k];
    r = rhs[k].r;
    q = rhs[k].q;
    if (folded && b.nh() > 0) {
      r.noalias() += (1.0 / f.delta_c) * b.Hu.transpose() * rhs[k].h;
      q.noalias() += (1.0 / f.delta_c) * b.Hx.transpose() * rhs[k].h;
    }
  };
  {
    Eigen::VectorXd r, q;
    folded_grad(K, r, q);
    p[K] = q;
    g[K] = folded ? Eigen::VectorXd(0) : rhs[K].h;
  }
  for (int k = K - 1; k >= 0; --k) {
    const StageBlock& b = blocks[k];
    const RiccatiStageFactor& st = f.stages[k];
    const RiccatiStageFactor& next = f.stages[k + 1];
    Eigen::VectorXd r, q;
    folded_grad(k, r, q);
    const Eigen::VectorXd Pbp = next.P * rhs[k].b + p[k + 1];
    ru[k] = r;
    ru[k].noalias() += b.B.transpose() * Pbp;
    Eigen::VectorXd rx = q;
    rx.noalias() += b.A.transpose() * Pbp;

    const int nh = folded ? 0 : b.nh();
    Eigen::VectorXd c(nh + next.G.rows());
    c.head(nh) = folded ? Eigen::VectorXd(0) : rhs[k].h;
    c.tail(next.G.rows()) = next.G * rhs[k].b + g[k + 1];

    const auto& e = st.elim;
    Eigen::VectorXd l =
        -e.Y * (e.sigma.cwiseInverse().asDiagonal() * (e.U1.transpose() * c));
    ff[k] = l;
    if (st.has_reduced) {
      const Eigen::VectorXd gred =
          e.Z.transpose() * (st.Ruu * l + ru[k]);
      ff[k].noalias() -= e.Z * st.reduced.solve(gred);
    }
    p[k] = rx;
    p[k].noalias() += st.Rxu * ff[k];
    p[k].noalias() += st.gain.transpose() * (st.Ruu * ff[k] + ru[k]);
    g[k] = e.U2.transpose() * c;
  }

  StepDirection d = zero_direction(f.nu, f.nx, f.nh);

  // x_0 from the equality-constrained subproblem.
  const RiccatiStageFactor& s0 = f.stages[0];
  const auto& e0 = f.x0_elim;
  Eigen::VectorXd x =
      -e0.Y * (e0.sigma.cwiseInverse().asDiagonal() * (e0.U1.transpose() * g[0]));
  if (f.x0_has_reduced) {
    x.noalias() -=
        e0.Z * f.x0_reduced.solve(e0.Z.transpose() * (s0.P * x + p[0]));
  }
  // G_0'ν = −(P x + p)
  Eigen::VectorXd nu_prop =
      -e0.U1 * (e0.sigma.cwiseInverse().asDiagonal() *
                (e0.Y.transpose() * (s0.P * x + p[0])));

  for (int k = 0; k < K; ++k) {
    const StageBlock& b = blocks[k];
    const RiccatiStageFactor& st = f.stages[k];
    const RiccatiStageFactor& next = f.stages[k + 1];
    StageStep& out = d.stages[k];
    out.dx = x;
    out.du = st.gain * x + ff[k];
    const Eigen::VectorXd rho =
        st.Ruu * out.du + st.Rxu.transpose() * x + ru[k];
    const auto& e = st.elim;
    const Eigen::VectorXd eta =
        -(e.sigma.cwiseInverse().asDiagonal() * (e.Y.transpose() * rho));
    const Eigen::VectorXd mult = e.U1 * eta + e.U2 * nu_prop;
    const int nh = folded ? 0 : b.nh();
    if (folded) {
      if (b.nh() > 0) {
        out.dlam = (b.Hu * out.du + b.Hx * x + rhs[k].h) / f.delta_c;
      }
    } else {
      out.dlam = mult.head(nh);
    }
    nu_prop = mult.tail(mult.size() - nh);
    Eigen::VectorXd xn = b.B * out.du + b.A * x + rhs[k].b;
    out.dpi = next.P * xn + p[k + 1] + next.G.transpose() * nu_prop;
    x = std::move(xn);
  }
  StageStep& last = d.stages[K];
  last.dx = x;
  if (folded) {
    if (blocks[K].nh() > 0) {
      last.dlam = (blocks[K].Hx * x + rhs[K].h) / f.delta_c;
    }
  } else {
    last.dlam = nu_prop;
  }
  return d;
}

inline StepDirection solve(const RiccatiFactorization& f,
                           const StageBlocks& blocks) {
  return solve(f, blocks, rhs_of(blocks));
}

/// r = M·Δ + rhs with the δ-regularized (and δ_c-regularized) matrix.
inline KktVector kkt_residual(const StageBlocks& blocks, double delta,
                              const KktVector& rhs, const StepDirection& d,
                              double delta_c = 0.0) {
  const int K = static_cast<int>(blocks.size()) - 1;
  KktVector res(K + 1);
  for (int k = 0; k <= K; ++k) {
    const StageBlock& b = blocks[k];
    const StageStep& s = d.stages[k];
    StageVector& r = res[k];
    r.r = rhs[k].r;
    r.r.noalias() += b.R.selfadjointView<Eigen::Lower>() * s.du;
    r.r += delta * s.du;
    r.r.noalias() += b.S.transpose() * s.dx;
    r.r.noalias() += b.Hu.transpose() * s.dlam;
    r.q = rhs[k].q;
    r.q.noalias() += b.S * s.du;
    r.q.noalias() += b.Q.selfadjointView<Eigen::Lower>() * s.dx;
    r.q += delta * s.dx;
    r.q.noalias() += b.Hx.transpose() * s.dlam;
    if (k > 0) r.q -= d.stages[k - 1].dpi;
    if (k < K) {
      r.r.noalias() += b.B.transpose() * s.dpi;
      r.q.noalias() += b.A.transpose() * s.dpi;
      r.b = rhs[k].b;
      r.b.noalias() += b.B * s.du + b.A * s.dx;
      r.b -= d.stages[k + 1].dx;
    } else {
      r.b.resize(0);
    }
    r.h = rhs[k].h;
    r.h.noalias() += b.Hu * s.du + b.Hx * s.dx;
    r.h -= delta_c * s.dlam;
  }
  return res;
}

/// Re-solves on the residual of the regularized system and adds the
/// correction until the residual drops below tolerance, max_refine rounds
/// pass, or a round fails to shrink it by stall_factor. Returns the best
/// direction seen with its residual norm.
inline StepDirection iterative_refinement(const RiccatiFactorization& f,
                                          const StageBlocks& blocks,
                                          const KktVector& rhs,
                                          StepDirection d,
                                          const RiccatiOptions& opt = {}) {
  const double tol = opt.refine_tol * std::max(1.0, inf_norm(rhs));
  KktVector res = kkt_residual(blocks, f.delta, rhs, d, f.delta_c);
  double rn = inf_norm(res);
  int steps = 0;
  while (rn > tol && steps < opt.max_refine) {
    StepDirection trial = d;
    trial += solve(f, blocks, res);
    KktVector tres = kkt_residual(blocks, f.delta, rhs, trial, f.delta_c);
    const double tn = inf_norm(tres);
    ++steps;
    if (!(tn < rn)) break;
    d = std::move(trial);
    res = std::move(tres);
    const bool stalled = tn > opt.stall_factor * rn;
    rn = tn;
    if (stalled) break;
  }
  d.residual_norm = rn;
  d.refinement_steps = steps;
  return d;
}

inline StepDirection iterative_refinement(const RiccatiFactorization& f,
                                          const StageBlocks& blocks,
                                          StepDirection d,
                                          const RiccatiOptions& opt = {}) {
  return iterative_refinement(f, blocks, rhs_of(blocks), std::move(d), opt);
}

/// solve() followed by iterative_refinement().
inline StepDirection solve_refined(const RiccatiFactorization& f,
                                   const StageBlocks& blocks,
                                   const KktVector& rhs,
                                   const RiccatiOptions& opt = {}) {
  return iterative_refinement(f, blocks, rhs, solve(f, blocks, rhs), opt);
}

}  // namespace ocpik
