#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "ocpik/ocp.hpp"

namespace ocpik::test_support {

// Flat view of the slack-form NLP assembled without NlpView: one row per
// finite bound side, lower before upper within a row.
struct FlatRow {
  int stage, row;
  double sign, bound;
};

struct FlatNlp {
  std::vector<int> w_off;
  int n = 0;
  std::vector<FlatRow> rows;
  Eigen::VectorXd grad_f;
  Eigen::MatrixXd J;      // dynamics then equalities, stage by stage
  Eigen::VectorXd c_eq;   // matching residuals
  Eigen::MatrixXd Ghat;   // signed inequality Jacobian per slack row
  Eigen::VectorXd ghat;
  Eigen::MatrixXd W;      // Lagrangian Hessian, block diagonal
};

inline FlatNlp flatten(const OcpProblem& p, const Iterate& it) {
  const OcpDims& d = p.dims;
  FlatNlp f;
  for (int k = 0; k <= d.K; ++k) {
    f.w_off.push_back(f.n);
    f.n += d.nw(k);
    for (int i = 0; i < d.ng[k]; ++i) {
      const Bound& b = p.stages[k].bounds[i];
      if (b.lower) f.rows.push_back({k, i, 1.0, *b.lower});
      if (b.upper) f.rows.push_back({k, i, -1.0, *b.upper});
    }
  }
  int n_eq = 0;
  for (int k = 0; k <= d.K; ++k) n_eq += (k < d.K ? d.nx[k + 1] : 0) + d.nh[k];
  const int m = static_cast<int>(f.rows.size());
  f.grad_f = Eigen::VectorXd::Zero(f.n);
  f.J = Eigen::MatrixXd::Zero(n_eq, f.n);
  f.c_eq = Eigen::VectorXd::Zero(n_eq);
  f.Ghat = Eigen::MatrixXd::Zero(m, f.n);
  f.ghat = Eigen::VectorXd::Zero(m);
  f.W = Eigen::MatrixXd::Zero(f.n, f.n);
  int row = 0;
  std::vector<StageValues> vals(d.K + 1);
  std::vector<StageDerivatives> ders(d.K + 1);
  for (int k = 0; k <= d.K; ++k) {
    const auto& w = it.w[k];
    p.stages[k].functions->derivatives({w.data(), std::size_t(w.size())},
                                       vals[k], ders[k]);
    const int nw = d.nw(k);
    f.grad_f.segment(f.w_off[k], nw) = ders[k].cost_gradient;
    if (k < d.K) {
      const int nn = d.nx[k + 1];
      f.J.block(row, f.w_off[k], nn, nw) = ders[k].f_jacobian;
      f.J.block(row, f.w_off[k + 1] + d.nu[k + 1], nn, nn) -=
          Eigen::MatrixXd::Identity(nn, nn);
      f.c_eq.segment(row, nn) = vals[k].f - it.x(k + 1);
      row += nn;
    }
    f.J.block(row, f.w_off[k], d.nh[k], nw) = ders[k].h_jacobian;
    f.c_eq.segment(row, d.nh[k]) = vals[k].h;
    row += d.nh[k];
  }
  for (int j = 0; j < m; ++j) {
    const FlatRow& r = f.rows[j];
    f.Ghat.block(j, f.w_off[r.stage], 1, d.nw(r.stage)) =
        r.sign * ders[r.stage].g_jacobian.row(r.row);
    f.ghat[j] = r.sign * (vals[r.stage].g[r.row] - r.bound);
  }
  // Hessian of the Lagrangian with per-row multipliers summed over sides.
  for (int k = 0; k <= d.K; ++k) {
    Eigen::VectorXd lg = Eigen::VectorXd::Zero(d.ng[k]);
    for (int j = 0; j < m; ++j) {
      if (f.rows[j].stage == k) lg[f.rows[j].row] += f.rows[j].sign * it.lam_g[j];
    }
    const Eigen::VectorXd pi = k < d.K ? it.pi[k] : Eigen::VectorXd();
    Eigen::MatrixXd Hk;
    const auto& w = it.w[k];
    auto sp = [](const Eigen::VectorXd& v) {
      return std::span<const double>(v.data(), std::size_t(v.size()));
    };
    p.stages[k].functions->lagrangian_hessian(sp(w), 1.0, sp(pi), sp(lg),
                                              sp(it.lam_h[k]), Hk);
    f.W.block(f.w_off[k], f.w_off[k], d.nw(k), d.nw(k)) = Hk;
  }
  return f;
}

inline Eigen::VectorXd flat_duals(const OcpProblem& p, const Iterate& it) {
  Eigen::VectorXd y(0);
  for (int k = 0; k <= p.dims.K; ++k) {
    Eigen::VectorXd seg(k < p.dims.K ? it.pi[k].size() + it.lam_h[k].size()
                                     : it.lam_h[k].size());
    if (k < p.dims.K) seg << it.pi[k], it.lam_h[k];
    else seg = it.lam_h[k];
    Eigen::VectorXd tmp(y.size() + seg.size());
    tmp << y, seg;
    y = tmp;
  }
  return y;
}

}  // namespace ocpik::test_support
