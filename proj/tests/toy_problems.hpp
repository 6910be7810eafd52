#pragma once

#include <cmath>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "ocpik/autodiff_stage.hpp"
#include "ocpik/ocp.hpp"
#include "ocpik/random_blocks.hpp"

namespace ocpik::test_support {

using synthetic::random_matrix;
using synthetic::random_vector;

using std::cos;
using std::sin;
using ad::cos;
using ad::sin;

/// Quadratic cost, affine dynamics and constraints, plus an optional smooth
/// nonlinear perturbation of amplitude eps in every function.
struct PolyStage {
  StageShape sh;
  Eigen::MatrixXd P;  // nw × nw, symmetric
  Eigen::VectorXd p;
  Eigen::MatrixXd F;  // nx_next × nw
  Eigen::VectorXd f0;
  Eigen::MatrixXd G;  // ng × nw
  Eigen::MatrixXd H;  // nh × nw
  Eigen::VectorXd h0;
  double eps = 0.0;

  StageShape shape() const { return sh; }

  template <class T>
  T cost(std::span<const T> w) const {
    T c = T(0.0);
    const int n = sh.nw();
    for (int i = 0; i < n; ++i) {
      c += p[i] * w[i];
      for (int j = 0; j < n; ++j) c += 0.5 * P(i, j) * w[i] * w[j];
      if (eps != 0.0) c += eps * cos(w[i]);
    }
    return c;
  }

  template <class T>
  void dynamics(std::span<const T> w, std::span<T> out) const {
    affine(F, f0, w, out);
    const int n = sh.nw();
    for (int i = 0; i < sh.nx_next && eps != 0.0; ++i) {
      out[i] += eps * sin(w[i % n]) * w[(i + 1) % n];
    }
  }

  template <class T>
  void inequalities(std::span<const T> w, std::span<T> out) const {
    affine(G, Eigen::VectorXd::Zero(sh.ng), w, out);
    for (int i = 0; i < sh.ng && eps != 0.0; ++i) {
      const T v = w[i % sh.nw()];
      out[i] += eps * v * v;
    }
  }

  template <class T>
  void equalities(std::span<const T> w, std::span<T> out) const {
    affine(H, h0, w, out);
    for (int i = 0; i < sh.nh && eps != 0.0; ++i) {
      out[i] += eps * sin(w[(i + 2) % sh.nw()]);
    }
  }

 private:
  template <class T>
  static void affine(const Eigen::MatrixXd& M, const Eigen::VectorXd& c,
                     std::span<const T> w, std::span<T> out) {
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
      T acc = T(c[i]);
      for (Eigen::Index j = 0; j < M.cols(); ++j) acc += M(i, j) * w[j];
      out[i] = acc;
    }
  }
};

inline PolyStage zero_poly(const StageShape& sh) {
  PolyStage s;
  s.sh = sh;
  const int n = sh.nw();
  s.P = Eigen::MatrixXd::Zero(n, n);
  s.p = Eigen::VectorXd::Zero(n);
  s.F = Eigen::MatrixXd::Zero(sh.nx_next, n);
  s.f0 = Eigen::VectorXd::Zero(sh.nx_next);
  s.G = Eigen::MatrixXd::Zero(sh.ng, n);
  s.H = Eigen::MatrixXd::Zero(sh.nh, n);
  s.h0 = Eigen::VectorXd::Zero(sh.nh);
  return s;
}

/// Random nonlinear problem with a mix of one-sided and two-sided bounds.
inline OcpProblem random_problem(std::mt19937_64& rng, int K, double eps,
                                 int max_dim = 4) {
  std::uniform_int_distribution<int> dim(1, max_dim);
  std::uniform_int_distribution<int> side(0, 2);
  std::vector<int> nx(K + 1);
  for (auto& n : nx) n = dim(rng);
  std::vector<Stage> stages;
  for (int k = 0; k <= K; ++k) {
    StageShape sh;
    sh.nx = nx[k];
    sh.nu = k < K ? dim(rng) : 0;
    sh.nx_next = k < K ? nx[k + 1] : 0;
    sh.ng = std::uniform_int_distribution<int>(0, 3)(rng);
    sh.nh = std::uniform_int_distribution<int>(0, std::min(2, sh.nu))(rng);
    PolyStage s = zero_poly(sh);
    const int n = sh.nw();
    const Eigen::MatrixXd M = random_matrix(rng, n, n);
    s.P = M * M.transpose() / n;
    s.p = random_vector(rng, n);
    s.F = random_matrix(rng, sh.nx_next, n);
    s.f0 = random_vector(rng, sh.nx_next);
    s.G = random_matrix(rng, sh.ng, n);
    s.H = random_matrix(rng, sh.nh, n);
    s.h0 = random_vector(rng, sh.nh);
    s.eps = eps;
    Stage st;
    for (int i = 0; i < sh.ng; ++i) {
      const double lo = -1.0 - std::abs(random_vector(rng, 1)[0]);
      const double hi = 1.0 + std::abs(random_vector(rng, 1)[0]);
      switch (side(rng)) {
        case 0: st.bounds.push_back(Bound::at_least(lo)); break;
        case 1: st.bounds.push_back(Bound::at_most(hi)); break;
        default: st.bounds.push_back(Bound::between(lo, hi)); break;
      }
    }
    st.functions = make_autodiff_stage(std::move(s));
    stages.push_back(std::move(st));
  }
  return make_problem(std::move(stages));
}

/// Random primal-dual point with s, z in [0.5, 2].
inline Iterate random_iterate(std::mt19937_64& rng, const OcpProblem& problem,
                              int n_slack) {
  std::uniform_real_distribution<double> pos(0.5, 2.0);
  Iterate it(problem.dims, n_slack);
  for (auto& w : it.w) w = random_vector(rng, static_cast<int>(w.size()));
  for (auto& l : it.lam_h) l = random_vector(rng, static_cast<int>(l.size()));
  for (auto& p : it.pi) p = random_vector(rng, static_cast<int>(p.size()));
  for (int j = 0; j < n_slack; ++j) {
    it.s[j] = pos(rng);
    it.z[j] = pos(rng);
  }
  it.lam_g = random_vector(rng, n_slack);
  return it;
}

/// min ½x₀² subject to x₀ ≥ lower, x₁ = x₀; one state, no controls.
inline OcpProblem scalar_bound_problem(double lower) {
  StageShape s0{0, 1, 1, 1, 0};
  PolyStage a = zero_poly(s0);
  a.P(0, 0) = 1.0;
  a.F(0, 0) = 1.0;
  a.G(0, 0) = 1.0;
  StageShape s1{0, 1, 0, 0, 0};
  PolyStage b = zero_poly(s1);
  std::vector<Stage> stages(2);
  stages[0].functions = make_autodiff_stage(std::move(a));
  stages[0].bounds = {Bound::at_least(lower)};
  stages[1].functions = make_autodiff_stage(std::move(b));
  return make_problem(std::move(stages));
}

}  // namespace ocpik::test_support
