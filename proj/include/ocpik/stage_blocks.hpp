#pragma once

#include <algorithm>
#include <vector>

#include <Eigen/Core>

#include "ocpik/ocp.hpp"

namespace ocpik {

/// Right-hand side (or residual) of one stage of the reduced primal-dual
/// system: r (controls), q (states), b (shooting gap), h (equalities).
struct StageVector {
  Eigen::VectorXd r;
  Eigen::VectorXd q;
  Eigen::VectorXd b;
  Eigen::VectorXd h;
};

using KktVector = std::vector<StageVector>;

inline double inf_norm(const KktVector& v) {
  double n = 0.0;
  auto upd = [&n](const Eigen::VectorXd& x) {
    if (x.size() > 0) n = std::max(n, x.lpNorm<Eigen::Infinity>());
  };
  for (const auto& s : v) {
    upd(s.r);
    upd(s.q);
    upd(s.b);
    upd(s.h);
  }
  return n;
}

/// Blocks of one stage of the reduced primal-dual system. The Hessian over
/// w = (u, x) is [R S'; S Q]; only the lower triangles of R and Q are read.
/// At the terminal stage nu = nx_next = 0.
struct StageBlock {
  Eigen::MatrixXd Q;   // nx × nx
  Eigen::MatrixXd R;   // nu × nu
  Eigen::MatrixXd S;   // nx × nu
  Eigen::MatrixXd A;   // nx_next × nx
  Eigen::MatrixXd B;   // nx_next × nu
  Eigen::MatrixXd Hu;  // nh × nu
  Eigen::MatrixXd Hx;  // nh × nx
  StageVector rhs;

  int nu() const { return static_cast<int>(R.rows()); }
  int nx() const { return static_cast<int>(Q.rows()); }
  int nx_next() const { return static_cast<int>(A.rows()); }
  int nh() const { return static_cast<int>(Hx.rows()); }
};

using StageBlocks = std::vector<StageBlock>;

inline KktVector rhs_of(const StageBlocks& blocks) {
  KktVector v;
  v.reserve(blocks.size());
  for (const auto& b : blocks) v.push_back(b.rhs);
  return v;
}

/// Search direction of the reduced system. dpi[k] belongs to the gap
/// x_{k+1} = f_k and is empty at k = K.
struct StageStep {
  Eigen::VectorXd du;
  Eigen::VectorXd dx;
  Eigen::VectorXd dpi;
  Eigen::VectorXd dlam;
};

struct StepDirection {
  std::vector<StageStep> stages;
  double residual_norm = 0.0;
  int refinement_steps = 0;

  double inf_norm() const {
    double n = 0.0;
    auto upd = [&n](const Eigen::VectorXd& x) {
      if (x.size() > 0) n = std::max(n, x.lpNorm<Eigen::Infinity>());
    };
    for (const auto& s : stages) {
      upd(s.du);
      upd(s.dx);
      upd(s.dpi);
      upd(s.dlam);
    }
    return n;
  }

  StepDirection& operator+=(const StepDirection& o) {
    for (std::size_t k = 0; k < stages.size(); ++k) {
      stages[k].du += o.stages[k].du;
      stages[k].dx += o.stages[k].dx;
      stages[k].dpi += o.stages[k].dpi;
      stages[k].dlam += o.stages[k].dlam;
    }
    return *this;
  }
};

/// Builds the blocks of stage k from evaluated functions. The residuals `c`
/// supply b, h and the ĝ − s term of the gradient correction; passing
/// modified residuals yields second-order-correction right-hand sides.
///
/// Hessian: ∇²L + Σ_r (z_r/s_r) G_r'G_r over the stage's slack rows.
/// Gradient: ∇f + J_f'π + J_h'λ_h − [0; π_prev] − Σ_r σ_r G_r'(μ − z_r c_r)/s_r,
/// in which λ_g cancels against the eliminated slack-dual rows.
inline void build_stage_block(const NlpView& view, const NlpEvaluation& ev,
                              const Iterate& it, double mu,
                              const ConstraintResiduals& c, int k,
                              StageBlock& out) {
  const OcpDims& d = view.dims;
  const int K = d.K;
  const int nu = d.nu[k];
  const int nx = d.nx[k];
  const StageDerivatives& der = ev.derivatives[k];

  Eigen::MatrixXd H = ev.hessians[k];
  Eigen::VectorXd grad = der.cost_gradient;
  if (k < K) grad.noalias() += der.f_jacobian.transpose() * it.pi[k];
  if (d.nh[k] > 0) grad.noalias() += der.h_jacobian.transpose() * it.lam_h[k];
  if (k > 0) grad.tail(nx) -= it.pi[k - 1];

  const int off = view.slack_offset[k];
  const auto rows = view.stage_slacks(k);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const int j = off + static_cast<int>(r);
    const auto Gr = der.g_jacobian.row(rows[r].row);
    const double sigma = it.z[j] / it.s[j];
    H.noalias() += sigma * Gr.transpose() * Gr;
    grad -= (rows[r].sign() * (mu - it.z[j] * c.slack[j]) / it.s[j]) *
            Gr.transpose();
  }

  out.R = H.topLeftCorner(nu, nu);
  out.S = H.bottomLeftCorner(nx, nu);
  out.Q = H.bottomRightCorner(nx, nx);
  out.rhs.r = grad.head(nu);
  out.rhs.q = grad.tail(nx);
  if (k < K) {
    out.B = der.f_jacobian.leftCols(nu);
    out.A = der.f_jacobian.rightCols(nx);
    out.rhs.b = c.dynamics[k];
  } else {
    out.B.resize(0, 0);
    out.A.resize(0, nx);
    out.rhs.b.resize(0);
  }
  out.Hu = der.h_jacobian.leftCols(nu);
  out.Hx = der.h_jacobian.rightCols(nx);
  out.rhs.h = c.equality[k];
}

inline void build_stage_blocks(const NlpView& view, const NlpEvaluation& ev,
                               const Iterate& it, double mu,
                               const ConstraintResiduals& c,
                               StageBlocks& blocks) {
  blocks.resize(view.dims.K + 1);
  for (int k = 0; k <= view.dims.K; ++k) {
    build_stage_block(view, ev, it, mu, c, k, blocks[k]);
  }
}

/// Blocks of stage k of the reduced primal-dual system at (it, mu),
/// evaluating the problem functions as needed.
inline StageBlock eval_stage_blocks(const OcpProblem& problem,
                                    const Iterate& it, double mu, int k) {
  const NlpView view = assemble_nlp(problem);
  if (k < 0 || k > problem.dims.K) {
    throw ApiMisuseError("stage index out of range");
  }
  NlpEvaluation ev;
  evaluate_first_order(problem, it.w, ev);
  evaluate_hessians(problem, view, it, ev);
  const ConstraintResiduals c = constraint_residuals(view, ev.values, it);
  StageBlock out;
  build_stage_block(view, ev, it, mu, c, k, out);
  return out;
}

}  // namespace ocpik
