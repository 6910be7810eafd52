#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <span>

#include <Eigen/Core>

#include "ocpik/ocp.hpp"

namespace ocpik {

/// Worst relative mismatch between analytic and central-difference
/// derivatives of one stage at one point, per quantity.
struct DerivativeMismatch {
  double cost_gradient = 0.0;
  double f_jacobian = 0.0;
  double g_jacobian = 0.0;
  double h_jacobian = 0.0;
  double hessian = 0.0;

  double worst() const {
    return std::max({cost_gradient, f_jacobian, g_jacobian, h_jacobian, hessian});
  }
  void merge(const DerivativeMismatch& o) {
    cost_gradient = std::max(cost_gradient, o.cost_gradient);
    f_jacobian = std::max(f_jacobian, o.f_jacobian);
    g_jacobian = std::max(g_jacobian, o.g_jacobian);
    h_jacobian = std::max(h_jacobian, o.h_jacobian);
    hessian = std::max(hessian, o.hessian);
  }
};

namespace detail {

inline double rel_mismatch(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.size() == 0 && b.size() == 0) return 0.0;
  if (a.rows() != b.rows() || a.cols() != b.cols()) return INFINITY;
  const double scale = std::max(1.0, b.cwiseAbs().maxCoeff());
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

inline double fd_step(double w) { return 1e-5 * std::max(1.0, std::abs(w)); }

}  // namespace detail

/// Compares derivatives() and lagrangian_hessian() of `fn` at w against
/// Richardson-extrapolated central differences (steps h and h/2, error
/// O(h⁴)). Jacobians and the cost gradient are differenced from values().
/// The Hessian contraction is applied to the columns of `directions` and
/// compared with differences of the Lagrangian gradient from derivatives()
/// along them; an empty matrix means every coordinate direction.
inline DerivativeMismatch check_stage_derivatives(
    const StageFunctions& fn, const Eigen::VectorXd& w, double cost_weight,
    const Eigen::VectorXd& pi, const Eigen::VectorXd& lam_g,
    const Eigen::VectorXd& lam_h, const Eigen::MatrixXd& directions = {}) {
  const StageShape sh = fn.shape();
  const int n = sh.nw();
  auto span_of = [](const Eigen::VectorXd& v) {
    return std::span<const double>(v.data(), static_cast<std::size_t>(v.size()));
  };
  auto richardson = [](const auto& coarse, const auto& fine) {
    return ((4.0 * fine - coarse) / 3.0).eval();
  };

  StageValues v0;
  StageDerivatives d0;
  fn.derivatives(span_of(w), v0, d0);

  // First order, one coordinate at a time.
  Eigen::VectorXd fd_cost(n);
  Eigen::MatrixXd fd_f(sh.nx_next, n), fd_g(sh.ng, n), fd_h(sh.nh, n);
  auto central_values = [&](int i, double h) {
    Eigen::VectorXd wp = w, wm = w;
    wp[i] += h;
    wm[i] -= h;
    StageValues vp, vm;
    fn.values(span_of(wp), vp);
    fn.values(span_of(wm), vm);
    Eigen::VectorXd d(1 + sh.nx_next + sh.ng + sh.nh);
    d << vp.cost - vm.cost, vp.f - vm.f, vp.g - vm.g, vp.h - vm.h;
    return (d / (2 * h)).eval();
  };
  for (int i = 0; i < n; ++i) {
    const double h = detail::fd_step(w[i]);
    const Eigen::VectorXd d =
        richardson(central_values(i, h), central_values(i, 0.5 * h));
    fd_cost[i] = d[0];
    fd_f.col(i) = d.segment(1, sh.nx_next);
    fd_g.col(i) = d.segment(1 + sh.nx_next, sh.ng);
    fd_h.col(i) = d.segment(1 + sh.nx_next + sh.ng, sh.nh);
  }

  // Second order along the chosen directions.
  const Eigen::MatrixXd V =
      directions.cols() > 0 ? directions : Eigen::MatrixXd::Identity(n, n);
  auto lagrangian_gradient = [&](const Eigen::VectorXd& x) {
    StageValues v;
    StageDerivatives d;
    fn.derivatives(span_of(x), v, d);
    Eigen::VectorXd g = cost_weight * d.cost_gradient;
    if (sh.nx_next > 0) g += d.f_jacobian.transpose() * pi;
    if (sh.ng > 0) g += d.g_jacobian.transpose() * lam_g;
    if (sh.nh > 0) g += d.h_jacobian.transpose() * lam_h;
    return g;
  };
  auto central_gradient = [&](const Eigen::VectorXd& dir, double h) {
    return ((lagrangian_gradient(w + h * dir) -
             lagrangian_gradient(w - h * dir)) /
            (2 * h))
        .eval();
  };
  const double w_scale = n > 0 ? w.lpNorm<Eigen::Infinity>() : 0.0;
  Eigen::MatrixXd fd_hv(n, V.cols());
  for (Eigen::Index c = 0; c < V.cols(); ++c) {
    const double h = detail::fd_step(w_scale) /
                     std::max(1.0, V.col(c).lpNorm<Eigen::Infinity>());
    fd_hv.col(c) = richardson(central_gradient(V.col(c), h),
                              central_gradient(V.col(c), 0.5 * h));
  }

  Eigen::MatrixXd hess;
  fn.lagrangian_hessian(span_of(w), cost_weight, span_of(pi), span_of(lam_g),
                        span_of(lam_h), hess);
  // The stored Hessian may be lower-triangular only.
  const Eigen::MatrixXd full = hess.selfadjointView<Eigen::Lower>();

  DerivativeMismatch m;
  m.cost_gradient = detail::rel_mismatch(d0.cost_gradient, fd_cost);
  m.f_jacobian = sh.nx_next > 0 ? detail::rel_mismatch(d0.f_jacobian, fd_f) : 0.0;
  m.g_jacobian = sh.ng > 0 ? detail::rel_mismatch(d0.g_jacobian, fd_g) : 0.0;
  m.h_jacobian = sh.nh > 0 ? detail::rel_mismatch(d0.h_jacobian, fd_h) : 0.0;
  m.hessian = n > 0 ? detail::rel_mismatch(full * V, fd_hv) : 0.0;
  return m;
}

/// Runs check_stage_derivatives on every stage at `points` random points
/// around the reference primal values `w_ref`, perturbed uniformly by
/// ±spread, with multipliers uniform in [−1, 1]. The Hessian contraction is
/// probed along `hessian_directions` random directions per point, or along
/// every coordinate when it is 0.
inline DerivativeMismatch check_problem_derivatives(
    const OcpProblem& problem, const std::vector<Eigen::VectorXd>& w_ref,
    int points, unsigned seed, double spread = 0.1,
    int hessian_directions = 3) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  auto random_vec = [&](int n, double scale) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = scale * unit(rng);
    return v;
  };
  DerivativeMismatch worst;
  for (int p = 0; p < points; ++p) {
    for (int k = 0; k <= problem.dims.K; ++k) {
      const StageFunctions& fn = *problem.stages[k].functions;
      const StageShape sh = fn.shape();
      const Eigen::VectorXd w = w_ref[k] + random_vec(sh.nw(), spread);
      const double cost_weight = 1.0 + 0.5 * unit(rng);
      const Eigen::VectorXd pi = random_vec(sh.nx_next, 1.0);
      const Eigen::VectorXd lam_g = random_vec(sh.ng, 1.0);
      const Eigen::VectorXd lam_h = random_vec(sh.nh, 1.0);
      Eigen::MatrixXd dirs(sh.nw(), hessian_directions);
      for (int c = 0; c < hessian_directions; ++c) {
        dirs.col(c) = random_vec(sh.nw(), 1.0);
      }
      worst.merge(check_stage_derivatives(fn, w, cost_weight, pi, lam_g,
                                          lam_h, dirs));
    }
  }
  return worst;
}

}  // namespace ocpik
