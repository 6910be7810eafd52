#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "ocpik/filter.hpp"
#include "ocpik/log.hpp"
#include "ocpik/ocp.hpp"
#include "ocpik/options.hpp"
#include "ocpik/riccati.hpp"
#include "ocpik/stage_blocks.hpp"

namespace ocpik {

enum class SolveStatus {
  Solved,
  MaxIterations,
  IndefiniteUnrecoverable,
  EvaluationFailure,
  SearchDirectionTooSmall,
};

inline std::string_view to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Solved: return "Solved";
    case SolveStatus::MaxIterations: return "MaxIterations";
    case SolveStatus::IndefiniteUnrecoverable: return "IndefiniteUnrecoverable";
    case SolveStatus::EvaluationFailure: return "EvaluationFailure";
    case SolveStatus::SearchDirectionTooSmall: return "SearchDirectionTooSmall";
  }
  return "Unknown";
}

/// One accepted step. objective, theta and the step ratios describe the new
/// point; kkt_total is its unbarriered KKT error.
struct IterationRecord {
  int iter = 0;
  double mu = 0.0;
  double objective = 0.0;
  double theta = 0.0;
  double kkt_total = 0.0;
  double alpha_primal = 0.0;
  double alpha_dual = 0.0;
  double delta = 0.0;
  int soc_count = 0;

  double tau = 0.0;
  double min_s = 0.0;  // +inf without inequalities
  double min_z = 0.0;
  double s_ratio = 1.0;  // min_i s_new/s_old
  double z_ratio = 1.0;  // min_i z_new/z_old, before the κ_Σ safeguard
  bool factorization_pd = false;
  bool tiny_step = false;
  double linear_residual = 0.0;
};

/// A barrier parameter decrease. forced is set when the decrease followed a
/// failed line search or a negligible step instead of inner convergence.
struct BarrierUpdate {
  int iter = 0;  // number of accepted steps before the update
  double mu_old = 0.0;
  double e_mu = 0.0;
  double mu_new = 0.0;
  bool forced = false;
};

struct SolveTiming {
  double total_ms = 0.0;
  double evaluation_ms = 0.0;
  double linear_algebra_ms = 0.0;
};

struct SolveResult {
  SolveStatus status = SolveStatus::MaxIterations;
  Iterate iterate;
  KktError kkt;
  double objective = 0.0;
  std::vector<IterationRecord> log;
  std::vector<BarrierUpdate> barrier_updates;
  SolveTiming timing;
  std::string message;

  int iterations() const { return static_cast<int>(log.size()); }
};

/// Search direction of the full primal-dual system.
struct Direction {
  StepDirection step;
  Eigen::VectorXd ds;
  Eigen::VectorXd dlam_g;
  Eigen::VectorXd dz;
  double delta = 0.0;
  double delta_c = 0.0;
  int attempts = 0;
};

/// Regularization carried across iterations.
struct RegularizationState {
  double delta_last = 0.0;
};

// --- elementary rules -----------------------------------------------------

/// Largest α ∈ (0,1] with v + α·dv ≥ (1−τ)·v.
inline double fraction_to_boundary(const Eigen::VectorXd& v,
                                   const Eigen::VectorXd& dv, double tau) {
  double alpha = 1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (dv[i] < 0.0) alpha = std::min(alpha, -tau * v[i] / dv[i]);
  }
  return alpha;
}

inline double update_barrier(double mu, const SolverOptions& o) {
  return std::max(o.tol / 10.0,
                  std::min(o.kappa_mu * mu, std::pow(mu, o.theta_mu)));
}

inline double boundary_fraction(double mu, const SolverOptions& o) {
  return std::max(o.tau_min, 1.0 - mu);
}

inline FilterRules filter_rules(const SolverOptions& o, double theta0) {
  FilterRules r;
  r.gamma_theta = o.gamma_theta;
  r.gamma_phi = o.gamma_phi;
  r.eta_phi = o.eta_phi;
  r.s_theta = o.s_theta;
  r.s_phi = o.s_phi;
  r.switching_delta = o.switching_delta;
  r.theta_min = 1e-4 * std::max(1.0, theta0);
  r.theta_max = 1e4 * std::max(1.0, theta0);
  return r;
}

// --- initialization -------------------------------------------------------

inline std::vector<Eigen::VectorXd> pack_guess(const OcpDims& d,
                                               const InitialGuess& g) {
  if (g.x.size() != static_cast<std::size_t>(d.K) + 1 ||
      g.u.size() < static_cast<std::size_t>(d.K)) {
    throw DimensionError("initial guess needs K+1 states and K controls");
  }
  std::vector<Eigen::VectorXd> w(d.K + 1);
  for (int k = 0; k <= d.K; ++k) {
    const Eigen::VectorXd u =
        k < static_cast<int>(g.u.size()) ? g.u[k] : Eigen::VectorXd(0);
    if (g.x[k].size() != d.nx[k] || u.size() != d.nu[k]) {
      throw DimensionError("initial guess dimension mismatch at stage " +
                           std::to_string(k));
    }
    if (!g.x[k].allFinite() || !u.allFinite()) {
      throw EvaluationError("non-finite initial guess", k);
    }
    w[k].resize(d.nw(k));
    w[k] << u, g.x[k];
  }
  return w;
}

/// Slacks pushed into the interior, bound duals from μ_init/s, equality and
/// dynamics duals zero.
inline Iterate init_slacks_duals(const OcpProblem& problem,
                                 const InitialGuess& guess,
                                 const SolverOptions& o = {}) {
  const NlpView view = assemble_nlp(problem);
  Iterate it(problem.dims, view.n_slack);
  it.w = pack_guess(problem.dims, guess);
  std::vector<StageValues> values;
  evaluate_values(problem, it.w, values, o.threads);
  const Eigen::VectorXd g = shifted_inequalities(view, values);
  for (int j = 0; j < view.n_slack; ++j) {
    it.s[j] = std::max(g[j], o.bound_relax * std::max(1.0, std::abs(g[j])));
    it.z[j] = std::clamp(o.mu_init / it.s[j], o.z_min, o.z_max);
  }
  it.lam_g = -it.z;
  it.mu = o.mu_init;
  return it;
}

// --- merit quantities -------------------------------------------------------

inline double objective_value(const std::vector<StageValues>& values) {
  double f = 0.0;
  for (const auto& v : values) f += v.cost;
  return f;
}

inline double barrier_objective(const std::vector<StageValues>& values,
                                const Eigen::VectorXd& s, double mu) {
  return objective_value(values) - mu * s.array().log().sum();
}

/// ∇φ'd over the primal part of a direction.
inline double barrier_directional_derivative(const NlpView& view,
                                             const NlpEvaluation& ev,
                                             const Iterate& it,
                                             const Direction& d, double mu) {
  double v = 0.0;
  for (int k = 0; k <= view.dims.K; ++k) {
    const StageStep& st = d.step.stages[k];
    const Eigen::VectorXd& g = ev.derivatives[k].cost_gradient;
    const int nu = view.dims.nu[k];
    v += g.head(nu).dot(st.du) + g.tail(view.dims.nx[k]).dot(st.dx);
  }
  if (view.n_slack > 0) v -= mu * d.ds.cwiseQuotient(it.s).sum();
  return v;
}

// --- search direction -----------------------------------------------------

/// Δs, Δλ_g and Δz from the reduced step.
inline void recover_slack_step(const NlpView& view, const NlpEvaluation& ev,
                               const Iterate& it, double mu,
                               const ConstraintResiduals& c, Direction& d) {
  d.ds.resize(view.n_slack);
  d.dz.resize(view.n_slack);
  d.dlam_g.resize(view.n_slack);
  for (int j = 0; j < view.n_slack; ++j) {
    const SlackRow& r = view.slacks[j];
    const StageStep& st = d.step.stages[r.stage];
    const auto G = ev.derivatives[r.stage].g_jacobian.row(r.row);
    const int nu = view.dims.nu[r.stage];
    const double dg =
        G.head(nu).dot(st.du) + G.tail(view.dims.nx[r.stage]).dot(st.dx);
    d.ds[j] = r.sign() * dg + c.slack[j];
    const double t = (mu - it.z[j] * d.ds[j]) / it.s[j];
    d.dz[j] = -it.z[j] + t;
    d.dlam_g[j] = -it.lam_g[j] - t;
  }
}

/// Reduced system data kept for second-order corrections.
struct LinearSystem {
  StageBlocks blocks;
  std::optional<RiccatiFactorization> factorization;
};

/// Factorizes the blocks with the regularization schedule: δ = 0 first, then
/// max(δ_0·scale, δ_last/3), growing by delta_growth up to delta_max. When
/// the equalities are rank deficient the same schedule is run once more with
/// dual regularization δ_c.
/// Returns false when no δ below the cap gives a positive definite reduced
/// Hessian.
inline bool factorize_regularized(LinearSystem& sys, double scale,
                                  RegularizationState& reg,
                                  const SolverOptions& o, Direction& d) {
  auto attempt = [&](double delta_c) -> bool {
    double delta = 0.0;
    d.attempts = 0;
    while (true) {
      ++d.attempts;
      auto res = factorize(sys.blocks, delta, o.linear, delta_c);
      if (auto* f = std::get_if<RiccatiFactorization>(&res)) {
        sys.factorization = std::move(*f);
        d.delta = delta;
        d.delta_c = delta_c;
        if (delta > 0.0) reg.delta_last = delta;
        return true;
      }
      if (delta == 0.0) {
        delta = std::max(o.delta_0 * scale, reg.delta_last / o.delta_decrease);
      } else {
        delta *= o.delta_growth;
      }
      if (delta > o.delta_max) return false;
    }
  };
  try {
    return attempt(0.0);
  } catch (const RankDeficientError&) {
    return attempt(o.delta_c);
  }
}

inline KktVector residual_rhs(const NlpView& view, const NlpEvaluation& ev,
                              const Iterate& it, double mu,
                              const ConstraintResiduals& c) {
  KktVector rhs(view.dims.K + 1);
  StageBlock tmp;
  for (int k = 0; k <= view.dims.K; ++k) {
    build_stage_block(view, ev, it, mu, c, k, tmp);
    rhs[k] = std::move(tmp.rhs);
  }
  return rhs;
}

/// Builds and factorizes the reduced system at `it` (Hessians in `ev` must
/// be current), then solves and recovers the full direction. Returns
/// std::nullopt when regularization hits its cap.
inline std::optional<Direction> compute_direction(
    const NlpView& view, const NlpEvaluation& ev, const Iterate& it,
    double mu, const ConstraintResiduals& c, RegularizationState& reg,
    const SolverOptions& o, LinearSystem& sys) {
  const int K = view.dims.K;
  sys.blocks.resize(K + 1);
  for_each_stage(K + 1, o.threads, [&](int k) {
    build_stage_block(view, ev, it, mu, c, k, sys.blocks[k]);
  });
  double scale = 1.0;
  for (const auto& h : ev.hessians) {
    if (h.size() > 0) scale = std::max(scale, h.diagonal().cwiseAbs().maxCoeff());
  }
  Direction d;
  if (!factorize_regularized(sys, scale, reg, o, d)) return std::nullopt;
  d.step = solve_refined(*sys.factorization, sys.blocks, rhs_of(sys.blocks),
                         o.linear);
  recover_slack_step(view, ev, it, mu, c, d);
  return d;
}

/// Convenience form: evaluates the problem at `it` and returns the
/// direction, throwing SingularSystemError if regularization fails.
inline Direction compute_direction(const OcpProblem& problem,
                                   const Iterate& it, double mu,
                                   RegularizationState& reg,
                                   const SolverOptions& o = {}) {
  const NlpView view = assemble_nlp(problem);
  NlpEvaluation ev;
  evaluate_first_order(problem, it.w, ev, o.threads);
  evaluate_hessians(problem, view, it, ev, o.threads);
  const ConstraintResiduals c = constraint_residuals(view, ev.values, it);
  LinearSystem sys;
  auto d = compute_direction(view, ev, it, mu, c, reg, o, sys);
  if (!d) throw SingularSystemError("regularization limit exceeded");
  return *d;
}

// --- trial points ----------------------------------------------------------

inline void apply_primal(const Iterate& base, const Direction& d,
                         double alpha, Iterate& out) {
  out.w = base.w;
  for (std::size_t k = 0; k < base.w.size(); ++k) {
    const StageStep& st = d.step.stages[k];
    const int nu = static_cast<int>(st.du.size());
    out.w[k].head(nu) += alpha * st.du;
    out.w[k].tail(st.dx.size()) += alpha * st.dx;
  }
  out.s = base.s + alpha * d.ds;
}

inline double min_ratio(const Eigen::VectorXd& now, const Eigen::VectorXd& before) {
  if (now.size() == 0) return 1.0;
  return now.cwiseQuotient(before).minCoeff();
}

// --- driver ------------------------------------------------------------------

namespace detail {

using Clock = std::chrono::steady_clock;

inline double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

class ScopedTimer {
 public:
  explicit ScopedTimer(double& acc) : acc_(acc), t0_(Clock::now()) {}
  ~ScopedTimer() { acc_ += ms_since(t0_); }
  ScopedTimer(const ScopedTimer&) = delete;
  ScopedTimer& operator=(const ScopedTimer&) = delete;

 private:
  double& acc_;
  Clock::time_point t0_;
};

struct TrialPoint {
  Iterate it;
  std::vector<StageValues> values;
  ConstraintResiduals c;
  double theta = 0.0;
  double phi = 0.0;
};

class IpSolver {
 public:
  IpSolver(const OcpProblem& problem, const SolverOptions& o)
      : problem_(problem), o_(o), view_(assemble_nlp(problem)),
        filter_(o.gamma_theta, o.gamma_phi) {}

  SolveResult run(const InitialGuess& guess) {
    const auto t_start = Clock::now();
    SolveResult res;
    try {
      {
        ScopedTimer t(res.timing.evaluation_ms);
        it_ = init_slacks_duals(problem_, guess, o_);
        evaluate_point();
      }
      loop(res);
    } catch (const EvaluationError& e) {
      res.status = SolveStatus::EvaluationFailure;
      res.message = e.what();
    }
    res.iterate = it_;
    res.timing.total_ms = ms_since(t_start);
    res.timing.evaluation_ms += eval_ms_;
    res.timing.linear_algebra_ms = linalg_ms_;
    return res;
  }

 private:
  void evaluate_point() {
    evaluate_first_order(problem_, it_.w, ev_, o_.threads);
    c_ = constraint_residuals(view_, ev_.values, it_);
    theta_ = infeasibility(c_);
    phi_ = barrier_objective(ev_.values, it_.s, mu_);
  }

  void reset_barrier(double mu) {
    mu_ = mu;
    it_.mu = mu;
    tau_ = boundary_fraction(mu, o_);
    filter_.clear();
    phi_ = barrier_objective(ev_.values, it_.s, mu_);
  }

  bool decrease_barrier(SolveResult& res, double e_mu, bool forced) {
    const double next = update_barrier(mu_, o_);
    if (!(next < mu_)) return false;
    res.barrier_updates.push_back(
        {static_cast<int>(res.log.size()), mu_, e_mu, next, forced});
    reset_barrier(next);
    return true;
  }

  void loop(SolveResult& res) {
    mu_ = o_.mu_init;
    reset_barrier(mu_);
    rules_ = filter_rules(o_, theta_);
    int tiny_streak = 0;
    while (true) {
      const KktError e0 = kkt_error(view_, ev_, it_, 0.0);
      res.kkt = e0;
      res.objective = objective_value(ev_.values);
      if (!res.log.empty()) res.log.back().kkt_total = e0.total;
      if (e0.total <= o_.tol) {
        res.status = SolveStatus::Solved;
        return;
      }
      // Inner loop exit: decrease μ while the barrier problem is solved to
      // κ_ε·μ.
      while (true) {
        const double e_mu = kkt_error(view_, ev_, it_, mu_).total;
        if (e_mu > o_.kappa_eps * mu_) break;
        if (!decrease_barrier(res, e_mu, false)) break;
      }
      if (static_cast<int>(res.log.size()) >= o_.max_iter) {
        res.status = SolveStatus::MaxIterations;
        return;
      }

      std::optional<Direction> dir;
      {
        ScopedTimer t(eval_ms_);
        evaluate_hessians(problem_, view_, it_, ev_, o_.threads);
      }
      {
        ScopedTimer t(linalg_ms_);
        dir = compute_direction(view_, ev_, it_, mu_, c_, reg_, o_, sys_);
      }
      if (!dir) {
        res.status = SolveStatus::IndefiniteUnrecoverable;
        res.message = "regularization exceeded delta_max";
        return;
      }

      IterationRecord rec;
      rec.mu = mu_;
      rec.delta = dir->delta;
      rec.tau = tau_;
      rec.factorization_pd = sys_.factorization->positive_definite;
      rec.linear_residual = dir->step.residual_norm;

      if (is_tiny(*dir)) {
        rec.tiny_step = true;
        take_step(*dir, 1.0, boundary_alpha_dual(*dir), rec);
        finish_record(res, rec);
        const double e_mu = kkt_error(view_, ev_, it_, mu_).total;
        if (!decrease_barrier(res, e_mu, true) && ++tiny_streak >= 2) {
          res.kkt = kkt_error(view_, ev_, it_, 0.0);
          res.log.back().kkt_total = res.kkt.total;
          res.status = res.kkt.total <= o_.tol
                           ? SolveStatus::Solved
                           : SolveStatus::SearchDirectionTooSmall;
          return;
        }
        continue;
      }
      tiny_streak = 0;

      if (!line_search(*dir, rec)) {
        // No acceptable step at this μ; move on to the next barrier problem
        // or stop when μ is already at its floor.
        const double e_mu = kkt_error(view_, ev_, it_, mu_).total;
        if (!decrease_barrier(res, e_mu, true)) {
          res.status = SolveStatus::SearchDirectionTooSmall;
          res.message = "line search failed at the smallest barrier parameter";
          return;
        }
        continue;
      }
      finish_record(res, rec);
    }
  }

  void finish_record(SolveResult& res, IterationRecord& rec) {
    rec.iter = static_cast<int>(res.log.size()) + 1;
    rec.objective = objective_value(ev_.values);
    rec.theta = theta_;
    constexpr double kEmpty = std::numeric_limits<double>::infinity();
    rec.min_s = it_.s.size() ? it_.s.minCoeff() : kEmpty;
    rec.min_z = it_.z.size() ? it_.z.minCoeff() : kEmpty;
    res.log.push_back(rec);
  }

  bool is_tiny(const Direction& d) const {
    double m = 0.0;
    for (std::size_t k = 0; k < it_.w.size(); ++k) {
      const StageStep& st = d.step.stages[k];
      const int nu = static_cast<int>(st.du.size());
      for (int i = 0; i < nu; ++i) {
        m = std::max(m, std::abs(st.du[i]) / (1.0 + std::abs(it_.w[k][i])));
      }
      for (Eigen::Index i = 0; i < st.dx.size(); ++i) {
        m = std::max(m, std::abs(st.dx[i]) / (1.0 + std::abs(it_.w[k][nu + i])));
      }
    }
    for (Eigen::Index j = 0; j < it_.s.size(); ++j) {
      m = std::max(m, std::abs(d.ds[j]) / (1.0 + std::abs(it_.s[j])));
    }
    return m < 10.0 * std::numeric_limits<double>::epsilon();
  }

  double boundary_alpha_dual(const Direction& d) const {
    return fraction_to_boundary(it_.z, d.dz, tau_);
  }

  bool evaluate_trial(TrialPoint& t) {
    try {
      ScopedTimer timer(eval_ms_);
      evaluate_values(problem_, t.it.w, t.values, o_.threads);
    } catch (const EvaluationError&) {
      return false;
    }
    t.c = constraint_residuals(view_, t.values, t.it);
    t.theta = infeasibility(t.c);
    t.phi = barrier_objective(t.values, t.it.s, mu_);
    return std::isfinite(t.theta) && std::isfinite(t.phi);
  }

  // c_soc = a·c_cur + c_trial over all constraint blocks.
  static ConstraintResiduals combine(const ConstraintResiduals& a, double w,
                                     const ConstraintResiduals& b) {
    ConstraintResiduals out = b;
    for (std::size_t k = 0; k < out.dynamics.size(); ++k) {
      out.dynamics[k] += w * a.dynamics[k];
    }
    for (std::size_t k = 0; k < out.equality.size(); ++k) {
      out.equality[k] += w * a.equality[k];
    }
    out.slack += w * a.slack;
    return out;
  }

  std::optional<Direction> soc_direction(const ConstraintResiduals& c_soc) {
    ScopedTimer t(linalg_ms_);
    Direction d;
    const KktVector rhs = residual_rhs(view_, ev_, it_, mu_, c_soc);
    d.step = solve_refined(*sys_.factorization, sys_.blocks, rhs, o_.linear);
    recover_slack_step(view_, ev_, it_, mu_, c_soc, d);
    return d;
  }

  bool line_search(const Direction& dir, IterationRecord& rec) {
    const double gd =
        barrier_directional_derivative(view_, ev_, it_, dir, mu_);
    const double alpha_max = fraction_to_boundary(it_.s, dir.ds, tau_);
    const double a_min = alpha_min(rules_, o_.gamma_alpha, theta_, gd);
    TrialPoint trial;
    trial.it = it_;
    double alpha = alpha_max;
    bool first = true;
    log_message(LogLevel::Debug,
                "line search: theta %.3e phi %.6e gd %.3e alpha_max %.3e "
                "alpha_min %.3e",
                theta_, phi_, gd, alpha_max, a_min);
    while (alpha >= a_min) {
      apply_primal(it_, dir, alpha, trial.it);
      const bool ok = evaluate_trial(trial);
      FilterVerdict v = FilterVerdict::Reject;
      if (ok) {
        v = filter_accept(filter_, rules_, trial.theta, trial.phi, theta_,
                          phi_, gd, alpha);
      }
      log_message(LogLevel::Debug, "  alpha %.3e theta %.3e phi %.6e -> %d",
                  alpha, trial.theta, trial.phi, static_cast<int>(v));
      if (is_accept(v)) {
        accept(dir, alpha, boundary_alpha_dual(dir), v, rec);
        return true;
      }
      if (first && ok && o_.max_soc > 0 && trial.theta >= theta_) {
        if (second_order_correction(alpha, trial, gd, rec)) return true;
      }
      first = false;
      alpha *= o_.backtrack;
    }
    return false;
  }

  bool second_order_correction(double alpha, const TrialPoint& first_trial,
                               double gd, IterationRecord& rec) {
    ConstraintResiduals c_soc = combine(c_, alpha, first_trial.c);
    double theta_old = theta_;
    TrialPoint trial;
    trial.it = it_;
    for (int p = 1; p <= o_.max_soc; ++p) {
      auto d = soc_direction(c_soc);
      if (!d) return false;
      const double a_soc = fraction_to_boundary(it_.s, d->ds, tau_);
      apply_primal(it_, *d, a_soc, trial.it);
      if (!evaluate_trial(trial)) return false;
      const FilterVerdict v = filter_accept(filter_, rules_, trial.theta,
                                            trial.phi, theta_, phi_, gd, alpha);
      if (is_accept(v)) {
        rec.soc_count = p;
        accept(*d, a_soc, boundary_alpha_dual(*d), v, rec);
        return true;
      }
      if (trial.theta > o_.kappa_soc * theta_old) return false;
      theta_old = trial.theta;
      c_soc = combine(c_soc, a_soc, trial.c);
    }
    return false;
  }

  void accept(const Direction& d, double alpha_p, double alpha_d,
              FilterVerdict v, IterationRecord& rec) {
    if (v == FilterVerdict::AcceptSufficientDecrease) {
      filter_.add((1.0 - o_.gamma_theta) * theta_,
                  phi_ - o_.gamma_phi * theta_);
    }
    take_step(d, alpha_p, alpha_d, rec);
  }

  void take_step(const Direction& d, double alpha_p, double alpha_d,
                 IterationRecord& rec) {
    const Iterate old = it_;
    apply_primal(old, d, alpha_p, it_);
    for (std::size_t k = 0; k < it_.w.size(); ++k) {
      const StageStep& st = d.step.stages[k];
      it_.lam_h[k] += alpha_p * st.dlam;
      if (k + 1 < it_.w.size()) it_.pi[k] += alpha_p * st.dpi;
    }
    it_.lam_g += alpha_p * d.dlam_g;
    it_.z += alpha_d * d.dz;
    rec.alpha_primal = alpha_p;
    rec.alpha_dual = alpha_d;
    rec.s_ratio = min_ratio(it_.s, old.s);
    rec.z_ratio = min_ratio(it_.z, old.z);
    for (Eigen::Index j = 0; j < it_.z.size(); ++j) {
      const double lo = mu_ / (o_.kappa_sigma * it_.s[j]);
      const double hi = o_.kappa_sigma * mu_ / it_.s[j];
      it_.z[j] = std::clamp(it_.z[j], lo, hi);
    }
    ScopedTimer t(eval_ms_);
    evaluate_point();
  }

  const OcpProblem& problem_;
  SolverOptions o_;
  NlpView view_;
  Filter filter_;
  FilterRules rules_;
  Iterate it_;
  NlpEvaluation ev_;
  ConstraintResiduals c_;
  LinearSystem sys_;
  RegularizationState reg_;
  double mu_ = 0.0;
  double tau_ = 0.0;
  double theta_ = 0.0;
  double phi_ = 0.0;
  double eval_ms_ = 0.0;
  double linalg_ms_ = 0.0;
};

}  // namespace detail

/// Primal-dual interior-point solve from an initial guess of states and
/// controls, which need not satisfy the dynamics.
inline SolveResult solve(const OcpProblem& problem, const InitialGuess& guess,
                         const SolverOptions& options = {}) {
  options.validate();
  detail::IpSolver solver(problem, options);
  return solver.run(guess);
}

}  // namespace ocpik
