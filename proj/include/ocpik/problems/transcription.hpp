#pragma once

#include <algorithm>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ocpik/autodiff_stage.hpp"
#include "ocpik/ocp.hpp"
#include "ocpik/problems/rk4.hpp"

namespace ocpik::problems {

/// Diagonal quadratic tracking cost plus a linear term on the time state.
struct QuadraticCost {
  Eigen::VectorXd x_weight;  // empty: no state term
  Eigen::VectorXd x_ref;
  Eigen::VectorXd u_weight;  // empty: no control term
  Eigen::VectorXd u_ref;
  double time_weight = 0.0;  // only used with a time state
};

/// A bound on one component of w = (u, x).
struct ComponentBound {
  int index = 0;
  Bound bound;
};

/// x_index-th state component fixed to value.
struct StateFix {
  int index = 0;
  double value = 0.0;
};

/// Per-stage content of a transcribed problem.
struct StageSpec {
  QuadraticCost cost;
  std::vector<ComponentBound> bounds;  // on w = (u, x)
  std::vector<StateFix> fixes;
};

/// Multiple-shooting transcription of a continuous model over K intervals of
/// length dt, each integrated with `substeps` RK4 steps.
template <ContinuousDynamics M>
struct TranscriptionSpec {
  M model;
  int K = 1;
  double dt = 0.1;
  int substeps = 1;
  std::vector<StageSpec> stages;  // K+1 entries
  std::vector<std::string> state_names;
};

/// Minimum-time form: a state T is appended, constant along the horizon,
/// with interval length T/K, the bound T_0 ≥ T_lower and objective T_0.
template <ContinuousDynamics M>
struct MinTimeSpec {
  TranscriptionSpec<M> base;
  double T_lower = 0.0;
  double T_guess = 1.0;
};

/// Stage functions of a transcribed problem. w = (u, x) where x may end in
/// the time state.
template <ContinuousDynamics M>
class ShootingStage {
 public:
  ShootingStage(M model, StageSpec spec, bool terminal, double dt,
                int substeps, bool time_state, int K)
      : model_(std::move(model)), spec_(std::move(spec)), terminal_(terminal),
        dt_(dt), substeps_(substeps), time_state_(time_state), K_(K) {}

  StageShape shape() const {
    StageShape s;
    s.nu = terminal_ ? 0 : M::nu;
    s.nx = M::nx + (time_state_ ? 1 : 0);
    s.nx_next = terminal_ ? 0 : s.nx;
    s.ng = static_cast<int>(spec_.bounds.size());
    s.nh = static_cast<int>(spec_.fixes.size());
    return s;
  }

  template <class T>
  T cost(std::span<const T> w) const {
    const int nu = terminal_ ? 0 : M::nu;
    T c = T(0.0);
    const QuadraticCost& q = spec_.cost;
    for (Eigen::Index i = 0; i < q.x_weight.size(); ++i) {
      const T e = w[nu + i] - q.x_ref[i];
      c += 0.5 * q.x_weight[i] * e * e;
    }
    for (Eigen::Index i = 0; i < q.u_weight.size() && i < nu; ++i) {
      const T e = w[i] - q.u_ref[i];
      c += 0.5 * q.u_weight[i] * e * e;
    }
    if (time_state_ && q.time_weight != 0.0) {
      c += q.time_weight * w[nu + M::nx];
    }
    return c;
  }

  template <class T>
  void dynamics(std::span<const T> w, std::span<T> out) const {
    if (terminal_) return;
    const auto u = w.subspan(0, M::nu);
    const auto x = w.subspan(M::nu, M::nx);
    const T dt = time_state_ ? w[M::nu + M::nx] / static_cast<double>(K_)
                             : T(dt_);
    rk4_integrate<T>(model_, x, u, dt, substeps_, out.subspan(0, M::nx));
    if (time_state_) out[M::nx] = w[M::nu + M::nx];
  }

  template <class T>
  void inequalities(std::span<const T> w, std::span<T> out) const {
    for (std::size_t i = 0; i < spec_.bounds.size(); ++i) {
      out[i] = w[spec_.bounds[i].index];
    }
  }

  template <class T>
  void equalities(std::span<const T> w, std::span<T> out) const {
    const int nu = terminal_ ? 0 : M::nu;
    for (std::size_t i = 0; i < spec_.fixes.size(); ++i) {
      out[i] = w[nu + spec_.fixes[i].index] - spec_.fixes[i].value;
    }
  }

  const StageSpec& spec() const { return spec_; }

 private:
  M model_;
  StageSpec spec_;
  bool terminal_;
  double dt_;
  int substeps_;
  bool time_state_;
  int K_;
};

namespace detail {

template <ContinuousDynamics M>
OcpProblem transcribe_impl(const TranscriptionSpec<M>& spec, bool time_state,
                           std::vector<StageSpec> stages,
                           std::vector<std::string> names) {
  if (spec.K < 1) throw DimensionError("horizon K must be at least 1");
  if (stages.size() != static_cast<std::size_t>(spec.K) + 1) {
    throw DimensionError("transcription needs K+1 stage specs");
  }
  std::vector<Stage> out;
  for (int k = 0; k <= spec.K; ++k) {
    Stage st;
    for (const auto& b : stages[k].bounds) st.bounds.push_back(b.bound);
    st.functions = make_autodiff_stage(
        ShootingStage<M>(spec.model, stages[k], k == spec.K, spec.dt,
                         spec.substeps, time_state, spec.K));
    out.push_back(std::move(st));
  }
  return make_problem(std::move(out), std::move(names));
}

}  // namespace detail

template <ContinuousDynamics M>
OcpProblem transcribe(const TranscriptionSpec<M>& spec) {
  return detail::transcribe_impl(spec, false, spec.stages, spec.state_names);
}

/// Appends the time state T with T_{k+1} = T_k, the bound T_0 ≥ T_lower at
/// stage 0 and the objective T_0. Throws ApiMisuseError when the base
/// already has a state named "T".
template <ContinuousDynamics M>
OcpProblem make_min_time(const MinTimeSpec<M>& spec) {
  const auto& names = spec.base.state_names;
  if (std::find(names.begin(), names.end(), "T") != names.end()) {
    throw ApiMisuseError("base problem already has a state named T");
  }
  std::vector<StageSpec> stages = spec.base.stages;
  if (stages.empty()) throw DimensionError("transcription needs stage specs");
  const int time_index = M::nu + M::nx;  // position of T in w at stage 0
  stages[0].bounds.push_back({time_index, Bound::at_least(spec.T_lower)});
  stages[0].cost.time_weight = 1.0;
  std::vector<std::string> out_names = names;
  if (!out_names.empty()) out_names.push_back("T");
  return detail::transcribe_impl(spec.base, true, std::move(stages),
                                 std::move(out_names));
}

/// Linear interpolation between two states with zero controls; the time
/// state, if present, is set to T_guess.
inline InitialGuess interpolated_guess(const OcpDims& d,
                                       const Eigen::VectorXd& x_start,
                                       const Eigen::VectorXd& x_end,
                                       std::optional<double> T_guess = {}) {
  InitialGuess g;
  for (int k = 0; k <= d.K; ++k) {
    const double t = static_cast<double>(k) / d.K;
    Eigen::VectorXd x(d.nx[k]);
    const auto n = x_start.size();
    x.head(n) = (1.0 - t) * x_start + t * x_end;
    if (T_guess) x[n] = *T_guess;
    g.x.push_back(x);
    if (k < d.K) g.u.push_back(Eigen::VectorXd::Zero(d.nu[k]));
  }
  return g;
}

}  // namespace ocpik::problems
