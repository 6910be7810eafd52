#pragma once

#include <random>
#include <vector>

#include <Eigen/Core>

#include "ocpik/stage_blocks.hpp"

/// Random stage-block instances for solver comparisons and timing.
namespace ocpik::synthetic {

struct BlockShape {
  std::vector<int> nx, nu, nh;
};

inline Eigen::MatrixXd random_matrix(std::mt19937_64& rng, int r, int c) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd m(r, c);
  for (int j = 0; j < c; ++j)
    for (int i = 0; i < r; ++i) m(i, j) = n(rng);
  return m;
}

inline Eigen::VectorXd random_vector(std::mt19937_64& rng, int n) {
  return random_matrix(rng, n, 1);
}

/// Random stage dimensions with nh[k] ≤ nu[k]. Terminal rows not absorbed by
/// the controls are handed back to earlier stages; nh is trimmed so those
/// never outnumber the states, which keeps generic instances full rank.
inline BlockShape random_shape(std::mt19937_64& rng, int K, int max_dim = 6) {
  std::uniform_int_distribution<int> dim(1, max_dim);
  BlockShape s;
  s.nx.resize(K + 1);
  s.nu.resize(K + 1);
  s.nh.resize(K + 1);
  for (int k = 0; k <= K; ++k) {
    s.nx[k] = dim(rng);
    s.nu[k] = k < K ? dim(rng) : 0;
  }
  s.nh[K] = std::uniform_int_distribution<int>(0, std::min(s.nx[K], 2))(rng);
  int carry = s.nh[K];
  for (int k = K - 1; k >= 0; --k) {
    int nh = std::uniform_int_distribution<int>(0, s.nu[k])(rng);
    while (nh > 0 && std::max(0, nh + carry - s.nu[k]) > s.nx[k]) --nh;
    s.nh[k] = nh;
    carry = std::max(0, nh + carry - s.nu[k]);
  }
  return s;
}

/// Random blocks; with `convex` the stage Hessians are positive definite,
/// otherwise symmetric with eigenvalues of both signs.
inline StageBlocks random_blocks(std::mt19937_64& rng, const BlockShape& s,
                                 bool convex = true) {
  const int K = static_cast<int>(s.nx.size()) - 1;
  StageBlocks blocks(K + 1);
  for (int k = 0; k <= K; ++k) {
    const int nu = s.nu[k], nx = s.nx[k], nh = s.nh[k];
    const int nw = nu + nx;
    Eigen::MatrixXd H;
    if (convex) {
      const Eigen::MatrixXd M = random_matrix(rng, nw, nw);
      H = M * M.transpose() / nw;
      H.diagonal().array() += 0.5;
    } else {
      const Eigen::MatrixXd M = random_matrix(rng, nw, nw);
      H = 0.5 * (M + M.transpose());
    }
    StageBlock& b = blocks[k];
    b.R = H.topLeftCorner(nu, nu);
    b.S = H.bottomLeftCorner(nx, nu);
    b.Q = H.bottomRightCorner(nx, nx);
    const int nn = k < K ? s.nx[k + 1] : 0;
    b.A = random_matrix(rng, nn, nx);
    b.B = k < K ? random_matrix(rng, nn, nu) : Eigen::MatrixXd(0, 0);
    b.Hu = random_matrix(rng, nh, nu);
    b.Hx = random_matrix(rng, nh, nx);
    b.rhs.r = random_vector(rng, nu);
    b.rhs.q = random_vector(rng, nx);
    b.rhs.b = random_vector(rng, nn);
    b.rhs.h = random_vector(rng, nh);
  }
  return blocks;
}

/// Relative ∞-distance between two directions of the same layout.
inline double relative_difference(const StepDirection& a,
                                  const StepDirection& b) {
  StepDirection diff = a;
  double scale = 1.0;
  for (std::size_t k = 0; k < a.stages.size(); ++k) {
    diff.stages[k].du -= b.stages[k].du;
    diff.stages[k].dx -= b.stages[k].dx;
    diff.stages[k].dpi -= b.stages[k].dpi;
    diff.stages[k].dlam -= b.stages[k].dlam;
  }
  scale = std::max(scale, b.inf_norm());
  return diff.inf_norm() / scale;
}

}  // namespace ocpik::synthetic
