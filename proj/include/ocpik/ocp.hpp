#pragma once

#include <algorithm>
#include <cmath>
#include <exception>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Core>

#include "ocpik/errors.hpp"

namespace ocpik {

/// Per-stage dimensions of a constrained optimal control problem with
/// horizon K. Vectors are indexed k = 0..K; nu[K] is always zero.
struct OcpDims {
  int K = 0;
  std::vector<int> nx;
  std::vector<int> nu;
  std::vector<int> ng;
  std::vector<int> nh;

  int nw(int k) const { return nu[k] + nx[k]; }

  /// Throws DimensionError when an invariant is broken.
  void validate() const {
    if (K < 1) throw DimensionError("horizon K must be at least 1");
    const auto n = static_cast<std::size_t>(K) + 1;
    if (nx.size() != n || nu.size() != n || ng.size() != n || nh.size() != n) {
      throw DimensionError("dimension vectors must have K+1 entries");
    }
    if (nu[K] != 0) throw DimensionError("terminal stage has no controls");
    for (int k = 0; k <= K; ++k) {
      if (nx[k] < 0 || nu[k] < 0 || ng[k] < 0 || nh[k] < 0) {
        throw DimensionError("negative dimension at stage " +
                             std::to_string(k));
      }
      if (nh[k] > nu[k] + nx[k]) {
        throw DimensionError("more equalities than variables at stage " +
                             std::to_string(k));
      }
    }
  }

  friend bool operator==(const OcpDims&, const OcpDims&) = default;
};

/// One inequality row L <= g <= U. An absent side is std::nullopt, never a
/// large finite number.
struct Bound {
  std::optional<double> lower;
  std::optional<double> upper;

  static Bound at_least(double l) { return {l, std::nullopt}; }
  static Bound at_most(double u) { return {std::nullopt, u}; }
  static Bound between(double l, double u) { return {l, u}; }
};

struct StageShape {
  int nu = 0;
  int nx = 0;
  int nx_next = 0;  // 0 at the terminal stage
  int ng = 0;
  int nh = 0;

  int nw() const { return nu + nx; }
};

/// Function values at w = (u, x).
struct StageValues {
  double cost = 0.0;
  Eigen::VectorXd f;  // next state prediction
  Eigen::VectorXd g;  // inequality functions
  Eigen::VectorXd h;  // equality functions
};

/// First derivatives with respect to w = (u, x).
struct StageDerivatives {
  Eigen::VectorXd cost_gradient;
  Eigen::MatrixXd f_jacobian;  // [B A]
  Eigen::MatrixXd g_jacobian;
  Eigen::MatrixXd h_jacobian;  // [H_u H_x]
};

/// User-facing stage functions l_k, f_k, g_k, h_k. The terminal stage has
/// nu = nx_next = 0.
///
/// Second-order information is only requested already contracted with the
/// multipliers, so no third-order tensor is ever formed. Implementations must
/// be safe to call concurrently on distinct inputs.
class StageFunctions {
 public:
  virtual ~StageFunctions() = default;

  virtual StageShape shape() const = 0;

  virtual void values(std::span<const double> w, StageValues& out) const = 0;

  virtual void derivatives(std::span<const double> w, StageValues& values,
                           StageDerivatives& out) const = 0;

  /// out = ∇²_ww [cost_weight·l + π'f + λ_g'g + λ_h'h].
  virtual void lagrangian_hessian(std::span<const double> w,
                                  double cost_weight,
                                  std::span<const double> pi,
                                  std::span<const double> lam_g,
                                  std::span<const double> lam_h,
                                  Eigen::MatrixXd& out) const = 0;
};

struct Stage {
  std::shared_ptr<const StageFunctions> functions;
  std::vector<Bound> bounds;  // one per inequality row
};

struct OcpProblem {
  OcpDims dims;
  std::vector<Stage> stages;              // K+1 entries
  std::vector<std::string> state_names;   // optional, for transforms
};

/// Builds an OcpProblem whose dims are read off the stage shapes.
inline OcpProblem make_problem(std::vector<Stage> stages,
                               std::vector<std::string> state_names = {}) {
  if (stages.size() < 2) throw DimensionError("need at least two stages");
  OcpProblem p;
  p.dims.K = static_cast<int>(stages.size()) - 1;
  for (const auto& st : stages) {
    if (!st.functions) throw ApiMisuseError("stage without functions");
    const StageShape sh = st.functions->shape();
    p.dims.nx.push_back(sh.nx);
    p.dims.nu.push_back(sh.nu);
    p.dims.ng.push_back(sh.ng);
    p.dims.nh.push_back(sh.nh);
  }
  p.stages = std::move(stages);
  p.state_names = std::move(state_names);
  return p;
}

enum class BoundSide { Lower, Upper };

/// A one-sided slack row: ĝ = g_row − L (lower) or U − g_row (upper), with
/// ĝ − s = 0 and s >= 0.
struct SlackRow {
  int stage = 0;
  int row = 0;
  BoundSide side = BoundSide::Lower;
  double bound = 0.0;

  double sign() const { return side == BoundSide::Lower ? 1.0 : -1.0; }
  double shifted(double g) const {
    return side == BoundSide::Lower ? g - bound : bound - g;
  }
};

/// Flat NLP view of a problem: global offsets of decision variables,
/// equality rows and slack rows. Slack rows are stage-contiguous.
struct NlpView {
  OcpDims dims;
  std::vector<int> w_offset;      // K+1
  std::vector<int> eq_offset;     // K+1, start of [dynamics rows; h rows]
  std::vector<int> slack_offset;  // K+2 prefix sums
  std::vector<SlackRow> slacks;
  int n_decision = 0;
  int n_equality = 0;
  int n_slack = 0;

  int stage_slack_count(int k) const {
    return slack_offset[k + 1] - slack_offset[k];
  }
  std::span<const SlackRow> stage_slacks(int k) const {
    return {slacks.data() + slack_offset[k],
            static_cast<std::size_t>(stage_slack_count(k))};
  }
};

/// Validates the problem and derives the slack index maps. Two-sided rows
/// produce a lower and an upper slack row.
inline NlpView assemble_nlp(const OcpProblem& problem) {
  const OcpDims& d = problem.dims;
  d.validate();
  if (problem.stages.size() != static_cast<std::size_t>(d.K) + 1) {
    throw DimensionError("expected K+1 stages");
  }
  NlpView v;
  v.dims = d;
  v.slack_offset.push_back(0);
  for (int k = 0; k <= d.K; ++k) {
    const Stage& st = problem.stages[k];
    if (!st.functions) throw ApiMisuseError("stage without functions");
    const StageShape sh = st.functions->shape();
    const int nx_next = k < d.K ? d.nx[k + 1] : 0;
    if (sh.nu != d.nu[k] || sh.nx != d.nx[k] || sh.ng != d.ng[k] ||
        sh.nh != d.nh[k] || sh.nx_next != nx_next) {
      throw DimensionError("stage " + std::to_string(k) +
                           " shape does not match dims");
    }
    if (st.bounds.size() != static_cast<std::size_t>(d.ng[k])) {
      throw DimensionError("stage " + std::to_string(k) +
                           " needs one bound per inequality row");
    }
    v.w_offset.push_back(v.n_decision);
    v.n_decision += d.nw(k);
    v.eq_offset.push_back(v.n_equality);
    v.n_equality += nx_next + d.nh[k];
    for (int i = 0; i < d.ng[k]; ++i) {
      const Bound& b = st.bounds[i];
      if (!b.lower && !b.upper) {
        throw InfeasibleBoundsError("inequality row without any finite side");
      }
      if (b.lower && b.upper && *b.lower > *b.upper) {
        throw InfeasibleBoundsError("lower bound above upper bound at stage " +
                                    std::to_string(k));
      }
      if (b.lower) v.slacks.push_back({k, i, BoundSide::Lower, *b.lower});
      if (b.upper) v.slacks.push_back({k, i, BoundSide::Upper, *b.upper});
    }
    v.slack_offset.push_back(static_cast<int>(v.slacks.size()));
  }
  v.n_slack = static_cast<int>(v.slacks.size());
  return v;
}

/// Primal-dual point. w[k] stores (u_k, x_k) contiguously. pi[k] is the dual
/// of the shooting gap x_{k+1} = f_k (k = 0..K-1); lam_h[K] is the terminal
/// equality dual. s, z, lam_g are indexed by slack row.
struct Iterate {
  std::vector<Eigen::VectorXd> w;
  Eigen::VectorXd s;
  Eigen::VectorXd z;
  Eigen::VectorXd lam_g;
  std::vector<Eigen::VectorXd> lam_h;
  std::vector<Eigen::VectorXd> pi;
  double mu = 0.0;
  std::vector<int> nu;

  Iterate() = default;
  Iterate(const OcpDims& d, int n_slack) : nu(d.nu) {
    for (int k = 0; k <= d.K; ++k) {
      w.push_back(Eigen::VectorXd::Zero(d.nw(k)));
      lam_h.push_back(Eigen::VectorXd::Zero(d.nh[k]));
      if (k < d.K) pi.push_back(Eigen::VectorXd::Zero(d.nx[k + 1]));
    }
    s = Eigen::VectorXd::Ones(n_slack);
    z = Eigen::VectorXd::Ones(n_slack);
    lam_g = Eigen::VectorXd::Zero(n_slack);
  }

  int K() const { return static_cast<int>(w.size()) - 1; }
  auto u(int k) { return w[k].head(nu[k]); }
  auto u(int k) const { return w[k].head(nu[k]); }
  auto x(int k) { return w[k].tail(w[k].size() - nu[k]); }
  auto x(int k) const { return w[k].tail(w[k].size() - nu[k]); }
};

/// Initial states (K+1) and controls (K), not necessarily consistent with
/// the dynamics.
struct InitialGuess {
  std::vector<Eigen::VectorXd> x;
  std::vector<Eigen::VectorXd> u;
};

/// Stage-wise parallel loop; exceptions are rethrown for the lowest stage so
/// the outcome does not depend on scheduling.
template <class Fn>
void for_each_stage(int count, int threads, Fn&& fn) {
  if (threads <= 1 || count <= 1) {
    for (int k = 0; k < count; ++k) fn(k);
    return;
  }
  std::vector<std::exception_ptr> errors(count);
  const int workers = std::min(threads, count);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int t = 0; t < workers; ++t) {
    pool.emplace_back([&, t] {
      for (int k = t; k < count; k += workers) {
        try {
          fn(k);
        } catch (...) {
          errors[k] = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

/// Function values and derivatives of every stage at one iterate.
struct NlpEvaluation {
  std::vector<StageValues> values;
  std::vector<StageDerivatives> derivatives;
  std::vector<Eigen::MatrixXd> hessians;
};

namespace detail {

inline void check_finite_values(const StageValues& v, int k) {
  if (!std::isfinite(v.cost) || !v.f.allFinite() || !v.g.allFinite() ||
      !v.h.allFinite()) {
    throw EvaluationError("non-finite stage function value", k);
  }
}

inline void check_finite_derivatives(const StageDerivatives& d, int k) {
  if (!d.cost_gradient.allFinite() || !d.f_jacobian.allFinite() ||
      !d.g_jacobian.allFinite() || !d.h_jacobian.allFinite()) {
    throw EvaluationError("non-finite stage derivative", k);
  }
}

inline std::span<const double> as_span(const Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

// Rethrows autodiff errors with the stage index attached.
template <class Fn>
void at_stage(int k, Fn&& fn) {
  try {
    fn();
  } catch (const EvaluationError& e) {
    if (e.stage() >= 0) throw;
    throw EvaluationError(e.what(), k);
  }
}

}  // namespace detail

inline void evaluate_values(const OcpProblem& problem,
                            const std::vector<Eigen::VectorXd>& w,
                            std::vector<StageValues>& out, int threads = 1) {
  const int n = problem.dims.K + 1;
  out.resize(n);
  for_each_stage(n, threads, [&](int k) {
    detail::at_stage(k, [&] {
      problem.stages[k].functions->values(detail::as_span(w[k]), out[k]);
    });
    detail::check_finite_values(out[k], k);
  });
}

/// Evaluates values and first derivatives; Hessians are filled separately
/// because they need the current multipliers.
inline void evaluate_first_order(const OcpProblem& problem,
                                 const std::vector<Eigen::VectorXd>& w,
                                 NlpEvaluation& ev, int threads = 1) {
  const int n = problem.dims.K + 1;
  ev.values.resize(n);
  ev.derivatives.resize(n);
  for_each_stage(n, threads, [&](int k) {
    detail::at_stage(k, [&] {
      problem.stages[k].functions->derivatives(
          detail::as_span(w[k]), ev.values[k], ev.derivatives[k]);
    });
    detail::check_finite_values(ev.values[k], k);
    detail::check_finite_derivatives(ev.derivatives[k], k);
  });
}

/// Multiplier of inequality row i of stage k in the Lagrangian Hessian:
/// Σ over its slack rows of sign·λ_g.
inline Eigen::VectorXd row_multipliers(const NlpView& view, const Iterate& it,
                                       int k) {
  Eigen::VectorXd lam = Eigen::VectorXd::Zero(view.dims.ng[k]);
  const int off = view.slack_offset[k];
  const auto rows = view.stage_slacks(k);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    lam[rows[r].row] += rows[r].sign() * it.lam_g[off + static_cast<int>(r)];
  }
  return lam;
}

inline void evaluate_hessians(const OcpProblem& problem, const NlpView& view,
                              const Iterate& it, NlpEvaluation& ev,
                              int threads = 1) {
  const int K = problem.dims.K;
  ev.hessians.resize(K + 1);
  for_each_stage(K + 1, threads, [&](int k) {
    const Eigen::VectorXd lam_g = row_multipliers(view, it, k);
    static const Eigen::VectorXd kEmpty;
    const Eigen::VectorXd& pi = k < K ? it.pi[k] : kEmpty;
    detail::at_stage(k, [&] {
      problem.stages[k].functions->lagrangian_hessian(
          detail::as_span(it.w[k]), 1.0, detail::as_span(pi),
          detail::as_span(lam_g), detail::as_span(it.lam_h[k]),
          ev.hessians[k]);
    });
    if (!ev.hessians[k].allFinite()) {
      throw EvaluationError("non-finite Lagrangian Hessian", k);
    }
  });
}

/// ĝ for every slack row.
inline Eigen::VectorXd shifted_inequalities(
    const NlpView& view, const std::vector<StageValues>& values) {
  Eigen::VectorXd g(view.n_slack);
  for (int j = 0; j < view.n_slack; ++j) {
    const SlackRow& r = view.slacks[j];
    g[j] = r.shifted(values[r.stage].g[r.row]);
  }
  return g;
}

/// Constraint residuals of the slack-form NLP.
struct ConstraintResiduals {
  std::vector<Eigen::VectorXd> dynamics;  // f_k − x_{k+1}, k < K
  std::vector<Eigen::VectorXd> equality;  // h_k
  Eigen::VectorXd slack;                  // ĝ − s
};

inline ConstraintResiduals constraint_residuals(
    const NlpView& view, const std::vector<StageValues>& values,
    const Iterate& it) {
  const int K = view.dims.K;
  ConstraintResiduals c;
  for (int k = 0; k <= K; ++k) {
    if (k < K) c.dynamics.push_back(values[k].f - it.x(k + 1));
    c.equality.push_back(values[k].h);
  }
  c.slack = shifted_inequalities(view, values) - it.s;
  return c;
}

/// ∞-norm of all equality, dynamics and ĝ−s residuals.
inline double infeasibility(const ConstraintResiduals& c) {
  double t = 0.0;
  for (const auto& v : c.dynamics) t = std::max(t, v.lpNorm<Eigen::Infinity>());
  for (const auto& v : c.equality) t = std::max(t, v.lpNorm<Eigen::Infinity>());
  if (c.slack.size() > 0) t = std::max(t, c.slack.lpNorm<Eigen::Infinity>());
  return t;
}

/// Gradient of the Lagrangian with respect to w_k.
inline Eigen::VectorXd stage_lagrangian_gradient(const NlpView& view,
                                                 const NlpEvaluation& ev,
                                                 const Iterate& it, int k) {
  const int K = view.dims.K;
  const StageDerivatives& d = ev.derivatives[k];
  Eigen::VectorXd grad = d.cost_gradient;
  if (k < K) grad.noalias() += d.f_jacobian.transpose() * it.pi[k];
  if (view.dims.nh[k] > 0) {
    grad.noalias() += d.h_jacobian.transpose() * it.lam_h[k];
  }
  if (view.dims.ng[k] > 0) {
    grad.noalias() +=
        d.g_jacobian.transpose() * row_multipliers(view, it, k);
  }
  if (k > 0) grad.tail(view.dims.nx[k]) -= it.pi[k - 1];
  return grad;
}

/// Residual norms of the barrier optimality conditions.
struct KktError {
  double stationarity = 0.0;
  double eq_violation = 0.0;
  double ineq_violation = 0.0;
  double centering = 0.0;
  double total = 0.0;
};

inline constexpr double kScalingMax = 100.0;

/// KKT error at a point whose first derivatives are already in `ev`.
inline KktError kkt_error(const NlpView& view, const NlpEvaluation& ev,
                          const Iterate& it, double mu) {
  const int K = view.dims.K;
  for (Eigen::Index j = 0; j < it.s.size(); ++j) {
    if (!(it.s[j] >= 0.0) || !(it.z[j] >= 0.0) || !std::isfinite(it.s[j]) ||
        !std::isfinite(it.z[j])) {
      throw DomainError("slack and bound duals must be nonnegative");
    }
  }
  KktError e;
  double stat = 0.0;
  double mult_l1 = 0.0;
  int mult_count = 0;
  for (int k = 0; k <= K; ++k) {
    stat = std::max(stat, stage_lagrangian_gradient(view, ev, it, k)
                              .lpNorm<Eigen::Infinity>());
    mult_l1 += it.lam_h[k].lpNorm<1>();
    mult_count += static_cast<int>(it.lam_h[k].size());
    if (k < K) {
      mult_l1 += it.pi[k].lpNorm<1>();
      mult_count += static_cast<int>(it.pi[k].size());
      e.eq_violation = std::max(
          e.eq_violation,
          (ev.values[k].f - it.x(k + 1)).lpNorm<Eigen::Infinity>());
    }
    if (view.dims.nh[k] > 0) {
      e.eq_violation = std::max(
          e.eq_violation, ev.values[k].h.lpNorm<Eigen::Infinity>());
    }
  }
  const int m = view.n_slack;
  double s_c = 1.0;
  if (m > 0) {
    stat = std::max(stat, (-it.lam_g - it.z).lpNorm<Eigen::Infinity>());
    mult_l1 += it.lam_g.lpNorm<1>() + it.z.lpNorm<1>();
    mult_count += 2 * m;
    e.ineq_violation = (shifted_inequalities(view, ev.values) - it.s)
                           .lpNorm<Eigen::Infinity>();
    e.centering = (it.s.cwiseProduct(it.z).array() - mu)
                      .matrix()
                      .lpNorm<Eigen::Infinity>();
    s_c = std::max(kScalingMax, it.z.lpNorm<1>() / m) / kScalingMax;
  }
  const double s_d =
      mult_count > 0
          ? std::max(kScalingMax, mult_l1 / mult_count) / kScalingMax
          : 1.0;
  e.stationarity = stat / s_d;
  e.centering /= s_c;
  e.total = std::max({e.stationarity, e.eq_violation, e.ineq_violation,
                      e.centering});
  return e;
}

/// KKT error of the barrier problem at `it` (mu = 0 gives the original
/// problem's error). Evaluates first derivatives itself.
inline KktError kkt_error(const OcpProblem& problem, const Iterate& it,
                          double mu) {
  const NlpView view = assemble_nlp(problem);
  if (static_cast<int>(it.w.size()) != problem.dims.K + 1 ||
      it.s.size() != view.n_slack || it.z.size() != view.n_slack ||
      it.lam_g.size() != view.n_slack) {
    throw DimensionError("iterate does not match the problem");
  }
  NlpEvaluation ev;
  evaluate_first_order(problem, it.w, ev);
  return kkt_error(view, ev, it, mu);
}

}  // namespace ocpik
