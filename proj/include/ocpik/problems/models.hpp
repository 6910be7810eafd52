#pragma once

#include <array>
#include <cmath>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/LU>

#include "ocpik/autodiff.hpp"
#include "ocpik/errors.hpp"

/// Continuous-time models of the benchmark set. Parameters are round numbers
/// chosen for this library; none of them come with the benchmark
/// descriptions.
namespace ocpik::problems {

namespace detail {
using std::cos;
using std::sin;
using std::sqrt;
using ad::cos;
using ad::sin;
using ad::sqrt;
}  // namespace detail

/// Cart with a pendulum hinged on it, driven by a horizontal force.
/// State (p, θ, v, ω) with θ measured from the hanging position, control F.
struct CartPendulum {
  static constexpr int nx = 4;
  static constexpr int nu = 1;
  double cart_mass = 1.0;
  double pole_mass = 0.1;
  double length = 0.8;
  double gravity = 9.81;

  template <class T>
  void rhs(std::span<const T> x, std::span<const T> u, std::span<T> xd) const {
    using detail::cos, detail::sin;
    const T s = sin(x[1]);
    const T c = cos(x[1]);
    const T den = cart_mass + pole_mass * s * s;
    const T pdd = (u[0] + pole_mass * s * (gravity * c + length * x[3] * x[3])) / den;
    xd[0] = x[2];
    xd[1] = x[3];
    xd[2] = pdd;
    xd[3] = -(pdd * c + gravity * s) / length;
  }
};

/// Quadrotor with Euler-angle (Z-Y-X) attitude. State
/// (p[3], v[3], roll, pitch, yaw, a) where a is the mass-normalized thrust,
/// which follows its command with a first-order lag. Controls are the thrust
/// command relative to hover and the three Euler-angle rates.
struct Quadrotor {
  static constexpr int nx = 10;
  static constexpr int nu = 4;
  double gravity = 9.81;
  double thrust_lag = 0.1;

  template <class T>
  void rhs(std::span<const T> x, std::span<const T> u, std::span<T> xd) const {
    using detail::cos, detail::sin;
    const T cr = cos(x[6]), sr = sin(x[6]);
    const T cp = cos(x[7]), sp = sin(x[7]);
    const T cy = cos(x[8]), sy = sin(x[8]);
    const T a = x[9];
    xd[0] = x[3];
    xd[1] = x[4];
    xd[2] = x[5];
    xd[3] = a * (cr * sp * cy + sr * sy);
    xd[4] = a * (cr * sp * sy - sr * cy);
    xd[5] = a * (cr * cp) - gravity;
    xd[6] = u[1];
    xd[7] = u[2];
    xd[8] = u[3];
    xd[9] = (gravity + u[0] - a) / thrust_lag;
  }
};

/// Chain of six point masses joined by springs in D dimensions. The first
/// spring is attached to a fixed anchor at the origin, the last one to an
/// end mass whose velocity is the control. State
/// (p_1..p_6, v_1..v_6, p_end), gravity acts along the last axis.
template <int D>
struct HangingChain {
  static constexpr int masses = 6;
  static constexpr int nx = (2 * masses + 1) * D;
  static constexpr int nu = D;
  double mass = 0.03;
  double stiffness = 1.0;
  double rest_length = 0.033;
  double gravity = 9.81;

  template <class T>
  void rhs(std::span<const T> x, std::span<const T> u, std::span<T> xd) const {
    using detail::sqrt;
    // Springs s = 0..masses: anchor–p_1, p_1–p_2, …, p_6–p_end.
    const int end = 2 * masses;
    std::array<std::array<T, D>, masses + 1> force;
    for (int s = 0; s <= masses; ++s) {
      const int a = s - 1;
      const int b = s < masses ? s : end;
      T d2 = T(0.0);
      std::array<T, D> diff;
      for (int j = 0; j < D; ++j) {
        const T pa = a < 0 ? T(0.0) : x[a * D + j];
        diff[j] = x[b * D + j] - pa;
        d2 += diff[j] * diff[j];
      }
      const T scale = stiffness * (1.0 - rest_length / sqrt(d2));
      for (int j = 0; j < D; ++j) force[s][j] = scale * diff[j];
    }
    for (int i = 0; i < masses; ++i) {
      for (int j = 0; j < D; ++j) {
        xd[i * D + j] = x[(masses + i) * D + j];
        T acc = (force[i + 1][j] - force[i][j]) / mass;
        if (j == D - 1) acc -= gravity;
        xd[(masses + i) * D + j] = acc;
      }
    }
    for (int j = 0; j < D; ++j) xd[end * D + j] = u[j];
  }

  /// Resting state for a given end-mass position, by Newton's method on the
  /// static force balance.
  Eigen::VectorXd equilibrium(const Eigen::Matrix<double, D, 1>& p_end) const {
    const int n = masses * D;
    Eigen::VectorXd x = Eigen::VectorXd::Zero(nx);
    x.tail(D) = p_end;
    for (int i = 0; i < masses; ++i) {
      const double t = (i + 1.0) / (masses + 1.0);
      Eigen::Matrix<double, D, 1> p = t * p_end;
      p[D - 1] -= 0.3 * t * (1.0 - t);
      x.segment(i * D, D) = p;
    }
    auto residual = [&](auto pos, auto out) {
      using T = typename std::remove_cvref_t<decltype(out)>::value_type;
      std::vector<T> full(nx, T(0.0)), xd(nx);
      for (int i = 0; i < n; ++i) full[i] = pos[i];
      for (int j = 0; j < D; ++j) full[2 * masses * D + j] = p_end[j];
      const std::vector<T> zero(D, T(0.0));
      rhs<T>(std::span<const T>(full), std::span<const T>(zero),
             std::span<T>(xd));
      for (int i = 0; i < n; ++i) out[i] = xd[n + i];
    };
    Eigen::VectorXd pos = x.head(n);
    auto eval = [&](const Eigen::VectorXd& q) {
      Eigen::VectorXd r(n);
      residual(std::span<const double>(q.data(), n),
               std::span<double>(r.data(), n));
      return r;
    };
    Eigen::VectorXd r = eval(pos);
    for (int iter = 0; iter < 100 && r.lpNorm<Eigen::Infinity>() > 1e-13;
         ++iter) {
      const Eigen::MatrixXd J = ad::jacobian(
          [&](std::span<const ad::Dual> q, std::span<ad::Dual> out) {
            residual(q, out);
          },
          n, pos);
      const Eigen::VectorXd step = J.partialPivLu().solve(-r);
      double alpha = 1.0;
      while (alpha > 1e-8) {
        const Eigen::VectorXd trial = pos + alpha * step;
        const Eigen::VectorXd rt = eval(trial);
        if (rt.allFinite() && rt.norm() < r.norm()) {
          pos = trial;
          r = rt;
          break;
        }
        alpha *= 0.5;
      }
      if (alpha <= 1e-8) break;
    }
    if (!(r.lpNorm<Eigen::Infinity>() <= 1e-10)) {
      throw EvaluationError("hanging chain equilibrium did not converge");
    }
    x.head(n) = pos;
    return x;
  }
};

/// Point mass on a line: (p, v) with acceleration control.
struct DoubleIntegrator {
  static constexpr int nx = 2;
  static constexpr int nu = 1;

  template <class T>
  void rhs(std::span<const T> x, std::span<const T> u, std::span<T> xd) const {
    xd[0] = x[1];
    xd[1] = u[0];
  }
};

/// Point mass in the plane: (px, py, vx, vy) with acceleration controls.
struct PointMass2D {
  static constexpr int nx = 4;
  static constexpr int nu = 2;

  template <class T>
  void rhs(std::span<const T> x, std::span<const T> u, std::span<T> xd) const {
    xd[0] = x[2];
    xd[1] = x[3];
    xd[2] = u[0];
    xd[3] = u[1];
  }
};

}  // namespace ocpik::problems
