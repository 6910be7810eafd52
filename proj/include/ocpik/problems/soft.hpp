#pragma once

#include <memory>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "ocpik/autodiff.hpp"
#include "ocpik/ocp.hpp"

namespace ocpik::problems {

/// Smooth exact-penalty form of c(u, x) ≤ 0: a control-like slack t with
/// t ≥ 0, c − t ≤ 0 and cost ρ·t. `c` is generic over the scalar type:
///
///   template <class T> T operator()(std::span<const T> w) const;
///
/// with w = (u, x) of the stage being softened.
template <class C>
struct SoftConstraintSpec {
  C c;
  double rho = 1.0;
};

/// Wraps a stage, inserting t after the original controls:
/// w = (u, t, x), g = (g_base, t, c − t).
template <class C>
class L1SoftStage final : public StageFunctions {
 public:
  L1SoftStage(std::shared_ptr<const StageFunctions> base, C c, double rho)
      : base_(std::move(base)), c_(std::move(c)), rho_(rho),
        shape_(base_->shape()) {}

  StageShape shape() const override {
    StageShape s = shape_;
    s.nu += 1;
    s.ng += 2;
    return s;
  }

  void values(std::span<const double> w, StageValues& out) const override {
    const Eigen::VectorXd wb = base_w(w);
    base_->values(as_span(wb), out);
    const double t = w[shape_.nu];
    out.cost += rho_ * t;
    const double cv = c_(as_span(wb));
    append(out.g, t, cv - t);
  }

  void derivatives(std::span<const double> w, StageValues& vals,
                   StageDerivatives& out) const override {
    const Eigen::VectorXd wb = base_w(w);
    StageDerivatives bd;
    base_->derivatives(as_span(wb), vals, bd);
    const double t = w[shape_.nu];
    vals.cost += rho_ * t;
    const double cv = c_(as_span(wb));
    append(vals.g, t, cv - t);

    const int n = shape_.nw() + 1;
    const int tu = shape_.nu;
    out.cost_gradient = insert(bd.cost_gradient.transpose()).transpose();
    out.cost_gradient[tu] = rho_;
    out.f_jacobian = insert(bd.f_jacobian);
    out.h_jacobian = insert(bd.h_jacobian);
    out.g_jacobian.resize(shape_.ng + 2, n);
    out.g_jacobian.topRows(shape_.ng) = insert(bd.g_jacobian);
    out.g_jacobian.row(shape_.ng).setZero();
    out.g_jacobian(shape_.ng, tu) = 1.0;
    const Eigen::VectorXd gc = ad::gradient(c_, wb);
    out.g_jacobian.row(shape_.ng + 1) = insert(gc.transpose());
    out.g_jacobian(shape_.ng + 1, tu) = -1.0;
  }

  void lagrangian_hessian(std::span<const double> w, double cost_weight,
                          std::span<const double> pi,
                          std::span<const double> lam_g,
                          std::span<const double> lam_h,
                          Eigen::MatrixXd& out) const override {
    const Eigen::VectorXd wb = base_w(w);
    Eigen::MatrixXd hb;
    base_->lagrangian_hessian(as_span(wb), cost_weight, pi,
                              lam_g.subspan(0, shape_.ng), lam_h, hb);
    const double lam_c = lam_g[shape_.ng + 1];
    if (lam_c != 0.0) hb += lam_c * ad::hessian(c_, wb);
    const int n = shape_.nw() + 1;
    const int tu = shape_.nu;
    out = Eigen::MatrixXd::Zero(n, n);
    auto map = [tu](int i) { return i < tu ? i : i + 1; };
    for (int j = 0; j < hb.cols(); ++j) {
      for (int i = 0; i < hb.rows(); ++i) out(map(i), map(j)) = hb(i, j);
    }
  }

 private:
  static std::span<const double> as_span(const Eigen::VectorXd& v) {
    return {v.data(), static_cast<std::size_t>(v.size())};
  }

  Eigen::VectorXd base_w(std::span<const double> w) const {
    Eigen::VectorXd wb(shape_.nw());
    for (int i = 0; i < shape_.nu; ++i) wb[i] = w[i];
    for (int i = 0; i < shape_.nx; ++i) wb[shape_.nu + i] = w[shape_.nu + 1 + i];
    return wb;
  }

  // Inserts a zero column for t.
  Eigen::MatrixXd insert(const Eigen::MatrixXd& m) const {
    Eigen::MatrixXd out(m.rows(), m.cols() + 1);
    out.leftCols(shape_.nu) = m.leftCols(shape_.nu);
    out.col(shape_.nu).setZero();
    out.rightCols(shape_.nx) = m.rightCols(shape_.nx);
    return out;
  }

  static void append(Eigen::VectorXd& g, double a, double b) {
    const auto n = g.size();
    g.conservativeResize(n + 2);
    g[n] = a;
    g[n + 1] = b;
  }

  std::shared_ptr<const StageFunctions> base_;
  C c_;
  double rho_;
  StageShape shape_;
};

/// Softens c ≤ 0 on every non-terminal stage of `problem`.
template <class C>
OcpProblem l1_soften(const SoftConstraintSpec<C>& spec,
                     const OcpProblem& problem) {
  if (!(spec.rho > 0.0)) throw DomainError("penalty weight must be positive");
  std::vector<Stage> stages = problem.stages;
  for (int k = 0; k < problem.dims.K; ++k) {
    Stage& st = stages[k];
    st.functions = std::make_shared<const L1SoftStage<C>>(st.functions,
                                                          spec.c, spec.rho);
    st.bounds.push_back(Bound::at_least(0.0));
    st.bounds.push_back(Bound::at_most(0.0));
  }
  return make_problem(std::move(stages), problem.state_names);
}

}  // namespace ocpik::problems
