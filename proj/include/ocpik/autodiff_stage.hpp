#pragma once

#include <algorithm>
#include <concepts>
#include <memory>
#include <span>
#include <vector>

#include "ocpik/autodiff.hpp"
#include "ocpik/ocp.hpp"

namespace ocpik {

/// A stage written once over a generic scalar T:
///
///   StageShape shape() const;
///   template <class T> T cost(std::span<const T> w) const;
///   template <class T> void dynamics(std::span<const T> w, std::span<T> out) const;
///   template <class T> void inequalities(std::span<const T> w, std::span<T> out) const;
///   template <class T> void equalities(std::span<const T> w, std::span<T> out) const;
///
/// with w = (u, x).
template <class M>
concept GenericStage = requires(const M& m, std::span<const double> w,
                                std::span<double> out) {
  { m.shape() } -> std::convertible_to<StageShape>;
  { m.template cost<double>(w) } -> std::convertible_to<double>;
  m.template dynamics<double>(w, out);
  m.template inequalities<double>(w, out);
  m.template equalities<double>(w, out);
};

/// StageFunctions backed by forward-mode AD: n dual sweeps for first
/// derivatives and n(n+1)/2 hyper-dual sweeps for the contracted Hessian,
/// both evaluated four lanes at a time.
template <GenericStage M>
class AutodiffStage final : public StageFunctions {
 public:
  explicit AutodiffStage(M model) : model_(std::move(model)) {}

  const M& model() const { return model_; }

  StageShape shape() const override { return model_.shape(); }

  void values(std::span<const double> w, StageValues& out) const override {
    const StageShape sh = model_.shape();
    out.f.resize(sh.nx_next);
    out.g.resize(sh.ng);
    out.h.resize(sh.nh);
    out.cost = model_.template cost<double>(w);
    model_.template dynamics<double>(w, span_of(out.f));
    model_.template inequalities<double>(w, span_of(out.g));
    model_.template equalities<double>(w, span_of(out.h));
  }

  void derivatives(std::span<const double> w, StageValues& vals,
                   StageDerivatives& out) const override {
    values(w, vals);
    const StageShape sh = model_.shape();
    const int n = sh.nw();
    out.cost_gradient.resize(n);
    out.f_jacobian.resize(sh.nx_next, n);
    out.g_jacobian.resize(sh.ng, n);
    out.h_jacobian.resize(sh.nh, n);
    using D = ad::DualBatch<kLanes>;
    std::vector<D> wd(w.begin(), w.end());
    std::vector<D> f(sh.nx_next), g(sh.ng), h(sh.nh);
    for (int j0 = 0; j0 < n; j0 += kLanes) {
      const int lanes = std::min(kLanes, n - j0);
      for (int k = 0; k < lanes; ++k) wd[j0 + k].deriv[k] = 1.0;
      const std::span<const D> ws(wd);
      const D c = model_.template cost<D>(ws);
      model_.template dynamics<D>(ws, std::span<D>(f));
      model_.template inequalities<D>(ws, std::span<D>(g));
      model_.template equalities<D>(ws, std::span<D>(h));
      for (int k = 0; k < lanes; ++k) {
        const int j = j0 + k;
        out.cost_gradient[j] = c.deriv[k];
        for (int i = 0; i < sh.nx_next; ++i) out.f_jacobian(i, j) = f[i].deriv[k];
        for (int i = 0; i < sh.ng; ++i) out.g_jacobian(i, j) = g[i].deriv[k];
        for (int i = 0; i < sh.nh; ++i) out.h_jacobian(i, j) = h[i].deriv[k];
        wd[j].deriv[k] = 0.0;
      }
    }
  }

  void lagrangian_hessian(std::span<const double> w, double cost_weight,
                          std::span<const double> pi,
                          std::span<const double> lam_g,
                          std::span<const double> lam_h,
                          Eigen::MatrixXd& out) const override {
    const StageShape sh = model_.shape();
    const int n = sh.nw();
    out.resize(n, n);
    using HD = ad::HyperDualBatch<kLanes>;
    std::vector<HD> wh(w.begin(), w.end());
    std::vector<HD> f(sh.nx_next), g(sh.ng), h(sh.nh);
    const bool any_g = has_nonzero(lam_g);
    const bool any_h = has_nonzero(lam_h);
    const bool any_f = has_nonzero(pi);
    auto contraction = [&](std::span<const HD> ws) {
      HD acc = cost_weight * model_.template cost<HD>(ws);
      if (any_f) {
        model_.template dynamics<HD>(ws, std::span<HD>(f));
        for (int i = 0; i < sh.nx_next; ++i) acc += pi[i] * f[i];
      }
      if (any_g) {
        model_.template inequalities<HD>(ws, std::span<HD>(g));
        for (int i = 0; i < sh.ng; ++i) acc += lam_g[i] * g[i];
      }
      if (any_h) {
        model_.template equalities<HD>(ws, std::span<HD>(h));
        for (int i = 0; i < sh.nh; ++i) acc += lam_h[i] * h[i];
      }
      return acc;
    };
    // Row i, columns j0..j0+kLanes−1 per evaluation.
    for (int i = 0; i < n; ++i) {
      wh[i].d1 = 1.0;
      for (int j0 = i; j0 < n; j0 += kLanes) {
        const int lanes = std::min(kLanes, n - j0);
        for (int k = 0; k < lanes; ++k) wh[j0 + k].d2[k] = 1.0;
        const HD v = contraction(std::span<const HD>(wh));
        for (int k = 0; k < lanes; ++k) {
          wh[j0 + k].d2[k] = 0.0;
          out(i, j0 + k) = v.d12[k];
          out(j0 + k, i) = v.d12[k];
        }
      }
      wh[i].d1 = 0.0;
    }
  }

 private:
  static constexpr int kLanes = 4;

  static std::span<double> span_of(Eigen::VectorXd& v) {
    return {v.data(), static_cast<std::size_t>(v.size())};
  }
  static bool has_nonzero(std::span<const double> v) {
    for (double x : v) {
      if (x != 0.0) return true;
    }
    return false;
  }

  M model_;
};

template <GenericStage M>
std::shared_ptr<const StageFunctions> make_autodiff_stage(M model) {
  return std::make_shared<const AutodiffStage<M>>(std::move(model));
}

}  // namespace ocpik
