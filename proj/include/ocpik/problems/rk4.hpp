#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "ocpik/autodiff.hpp"
#include "ocpik/errors.hpp"

namespace ocpik::problems {

/// Continuous-time model ẋ = f_c(x, u) usable with any AD scalar:
///
///   static constexpr int nx, nu;
///   template <class T>
///   void rhs(std::span<const T> x, std::span<const T> u, std::span<T> xdot) const;
template <class M>
concept ContinuousDynamics =
    requires(const M& m, std::span<const double> x, std::span<double> out) {
      { M::nx } -> std::convertible_to<int>;
      { M::nu } -> std::convertible_to<int>;
      m.template rhs<double>(x, x, out);
    };

/// One classical Runge-Kutta 4 step with the control held constant.
template <class T, class M>
void rk4_step(const M& model, std::span<const T> x, std::span<const T> u,
              const T& dt, std::span<T> out) {
  const std::size_t n = x.size();
  std::vector<T> k(n), tmp(x.begin(), x.end());
  const T half = dt * 0.5;
  const T sixth = dt / 6.0;
  const T third = dt / 3.0;
  model.template rhs<T>(x, u, std::span<T>(k));
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = x[i] + sixth * k[i];
    tmp[i] = x[i] + half * k[i];
  }
  model.template rhs<T>(std::span<const T>(tmp), u, std::span<T>(k));
  for (std::size_t i = 0; i < n; ++i) {
    out[i] += third * k[i];
    tmp[i] = x[i] + half * k[i];
  }
  model.template rhs<T>(std::span<const T>(tmp), u, std::span<T>(k));
  for (std::size_t i = 0; i < n; ++i) {
    out[i] += third * k[i];
    tmp[i] = x[i] + dt * k[i];
  }
  model.template rhs<T>(std::span<const T>(tmp), u, std::span<T>(k));
  for (std::size_t i = 0; i < n; ++i) out[i] += sixth * k[i];
}

/// `steps` RK4 steps of length dt/steps.
template <class T, class M>
void rk4_integrate(const M& model, std::span<const T> x, std::span<const T> u,
                   const T& dt, int steps, std::span<T> out) {
  if (steps <= 1) {
    rk4_step<T>(model, x, u, dt, out);
    return;
  }
  const T h = dt / static_cast<double>(steps);
  std::vector<T> cur(x.begin(), x.end()), next(x.size());
  for (int s = 0; s < steps; ++s) {
    rk4_step<T>(model, std::span<const T>(cur), u, h, std::span<T>(next));
    cur.swap(next);
  }
  std::copy(cur.begin(), cur.end(), out.begin());
}

/// Double-precision convenience form; throws EvaluationError when the
/// result is not finite.
template <class M>
Eigen::VectorXd rk4_step(const M& model, const Eigen::VectorXd& x,
                         const Eigen::VectorXd& u, double dt) {
  Eigen::VectorXd out(x.size());
  rk4_step<double>(model, std::span<const double>(x.data(), x.size()),
                   std::span<const double>(u.data(), u.size()), dt,
                   std::span<double>(out.data(), out.size()));
  if (!out.allFinite()) throw EvaluationError("non-finite RK4 step");
  return out;
}

}  // namespace ocpik::problems
