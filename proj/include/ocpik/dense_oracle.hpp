#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Core>
#include <lapacke.h>

#include "ocpik/errors.hpp"
#include "ocpik/stage_blocks.hpp"

/// Flat reference for the structured solver: the whole reduced primal-dual
/// system is assembled as one dense symmetric matrix and solved with a
/// Bunch-Kaufman factorization (LAPACK dsytrf/dsytrs). Test and benchmark
/// use only.
namespace ocpik {

struct Inertia {
  int positive = 0;
  int negative = 0;
  int zero = 0;
};

/// Unknown ordering per stage: (Δu_k, Δx_k, Δλ_k, Δπ_k).
struct DenseLayout {
  std::vector<int> u, x, lam, pi;
  int size = 0;
  int n_primal = 0;
  int n_dual = 0;

  explicit DenseLayout(const StageBlocks& blocks) {
    const int K = static_cast<int>(blocks.size()) - 1;
    for (int k = 0; k <= K; ++k) {
      const StageBlock& b = blocks[k];
      u.push_back(size);
      size += b.nu();
      x.push_back(size);
      size += b.nx();
      lam.push_back(size);
      size += b.nh();
      pi.push_back(size);
      size += k < K ? b.nx_next() : 0;
      n_primal += b.nu() + b.nx();
      n_dual += b.nh() + (k < K ? b.nx_next() : 0);
    }
  }
};

/// The δ-regularized matrix, with −δ_c·I in the stage-equality dual block.
inline Eigen::MatrixXd dense_kkt_matrix(const StageBlocks& blocks,
                                        double delta, double delta_c = 0.0) {
  const DenseLayout L(blocks);
  const int K = static_cast<int>(blocks.size()) - 1;
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(L.size, L.size);
  for (int k = 0; k <= K; ++k) {
    const StageBlock& b = blocks[k];
    const int nu = b.nu(), nx = b.nx(), nh = b.nh();
    M.block(L.u[k], L.u[k], nu, nu) =
        b.R.selfadjointView<Eigen::Lower>();
    M.block(L.x[k], L.x[k], nx, nx) =
        b.Q.selfadjointView<Eigen::Lower>();
    M.block(L.u[k], L.u[k], nu, nu).diagonal().array() += delta;
    M.block(L.x[k], L.x[k], nx, nx).diagonal().array() += delta;
    M.block(L.x[k], L.u[k], nx, nu) = b.S;
    M.block(L.u[k], L.x[k], nu, nx) = b.S.transpose();
    M.block(L.lam[k], L.u[k], nh, nu) = b.Hu;
    M.block(L.u[k], L.lam[k], nu, nh) = b.Hu.transpose();
    M.block(L.lam[k], L.x[k], nh, nx) = b.Hx;
    M.block(L.x[k], L.lam[k], nx, nh) = b.Hx.transpose();
    M.block(L.lam[k], L.lam[k], nh, nh).diagonal().array() -= delta_c;
    if (k < K) {
      const int nn = b.nx_next();
      M.block(L.pi[k], L.u[k], nn, nu) = b.B;
      M.block(L.u[k], L.pi[k], nu, nn) = b.B.transpose();
      M.block(L.pi[k], L.x[k], nn, nx) = b.A;
      M.block(L.x[k], L.pi[k], nx, nn) = b.A.transpose();
      M.block(L.pi[k], L.x[k + 1], nn, nn).diagonal().array() -= 1.0;
      M.block(L.x[k + 1], L.pi[k], nn, nn).diagonal().array() -= 1.0;
    }
  }
  return M;
}

inline Eigen::VectorXd dense_vector(const StageBlocks& blocks,
                                    const KktVector& v) {
  const DenseLayout L(blocks);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(L.size);
  const int K = static_cast<int>(blocks.size()) - 1;
  for (int k = 0; k <= K; ++k) {
    out.segment(L.u[k], v[k].r.size()) = v[k].r;
    out.segment(L.x[k], v[k].q.size()) = v[k].q;
    out.segment(L.lam[k], v[k].h.size()) = v[k].h;
    if (k < K) out.segment(L.pi[k], v[k].b.size()) = v[k].b;
  }
  return out;
}

inline StepDirection unpack_direction(const StageBlocks& blocks,
                                      const Eigen::VectorXd& sol) {
  const DenseLayout L(blocks);
  const int K = static_cast<int>(blocks.size()) - 1;
  StepDirection d;
  d.stages.resize(K + 1);
  for (int k = 0; k <= K; ++k) {
    const StageBlock& b = blocks[k];
    d.stages[k].du = sol.segment(L.u[k], b.nu());
    d.stages[k].dx = sol.segment(L.x[k], b.nx());
    d.stages[k].dlam = sol.segment(L.lam[k], b.nh());
    d.stages[k].dpi = sol.segment(L.pi[k], k < K ? b.nx_next() : 0);
  }
  return d;
}

struct DenseOracleResult {
  StepDirection direction;
  Inertia inertia;
  /// Inertia (n_primal, n_dual, 0): the reduced Hessian is positive definite.
  bool reduced_pd = false;
};

namespace detail {

struct BunchKaufman {
  Eigen::MatrixXd lu;  // column-major factor from dsytrf
  std::vector<lapack_int> ipiv;
  lapack_int info = 0;
};

inline BunchKaufman bunch_kaufman(const Eigen::MatrixXd& M) {
  BunchKaufman f;
  const auto n = static_cast<lapack_int>(M.rows());
  f.lu = M;
  f.ipiv.assign(std::max<lapack_int>(n, 1), 0);
  if (n > 0) {
    f.info = LAPACKE_dsytrf(LAPACK_COL_MAJOR, 'L', n, f.lu.data(), n,
                            f.ipiv.data());
  }
  return f;
}

// Inertia from the block-diagonal D of L·D·L'; 2×2 blocks are flagged by a
// negative pivot index on both of their rows.
inline Inertia inertia_of(const BunchKaufman& f, double zero_tol) {
  Inertia in;
  const auto n = f.lu.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (f.ipiv[i] < 0 && i + 1 < n) {
      const double a = f.lu(i, i);
      const double b = f.lu(i + 1, i);
      const double c = f.lu(i + 1, i + 1);
      const double det = a * c - b * b;
      const double tr = a + c;
      if (std::abs(det) <= zero_tol * zero_tol) {
        ++in.zero;
        if (tr > 0) ++in.positive;
        else if (tr < 0) ++in.negative;
        else ++in.zero;
      } else if (det < 0) {
        ++in.positive;
        ++in.negative;
      } else if (tr > 0) {
        in.positive += 2;
      } else {
        in.negative += 2;
      }
      ++i;
    } else {
      const double d = f.lu(i, i);
      if (std::abs(d) <= zero_tol) ++in.zero;
      else if (d > 0) ++in.positive;
      else ++in.negative;
    }
  }
  return in;
}

}  // namespace detail

inline Inertia dense_inertia(const Eigen::MatrixXd& M) {
  const auto f = detail::bunch_kaufman(M);
  const double scale =
      M.size() > 0 ? std::max(1.0, M.cwiseAbs().maxCoeff()) : 1.0;
  return detail::inertia_of(f, 1e-13 * scale);
}

/// Solves the dense δ-regularized system M·Δ = −rhs. Throws
/// SingularSystemError when M is singular.
inline DenseOracleResult dense_oracle_solve(const StageBlocks& blocks,
                                            const KktVector& rhs,
                                            double delta,
                                            double delta_c = 0.0) {
  const DenseLayout L(blocks);
  const Eigen::MatrixXd M = dense_kkt_matrix(blocks, delta, delta_c);
  const auto f = detail::bunch_kaufman(M);
  if (f.info != 0) throw SingularSystemError("dense system is singular");
  const double scale =
      M.size() > 0 ? std::max(1.0, M.cwiseAbs().maxCoeff()) : 1.0;
  DenseOracleResult out;
  out.inertia = detail::inertia_of(f, 1e-13 * scale);
  if (out.inertia.zero > 0) {
    throw SingularSystemError("dense system is numerically singular");
  }
  out.reduced_pd =
      out.inertia.positive == L.n_primal && out.inertia.negative == L.n_dual;
  Eigen::VectorXd x = -dense_vector(blocks, rhs);
  const auto n = static_cast<lapack_int>(L.size);
  if (n > 0) {
    const lapack_int info =
        LAPACKE_dsytrs(LAPACK_COL_MAJOR, 'L', n, 1, f.lu.data(), n,
                       f.ipiv.data(), x.data(), n);
    if (info != 0 || !x.allFinite()) {
      throw SingularSystemError("dense solve failed");
    }
  }
  out.direction = unpack_direction(blocks, x);
  return out;
}

inline DenseOracleResult dense_oracle_solve(const StageBlocks& blocks,
                                            double delta,
                                            double delta_c = 0.0) {
  return dense_oracle_solve(blocks, rhs_of(blocks), delta, delta_c);
}

}  // namespace ocpik
