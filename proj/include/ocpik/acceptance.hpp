#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "ocpik/dense_oracle.hpp"
#include "ocpik/derivative_check.hpp"
#include "ocpik/io.hpp"
#include "ocpik/ip_solver.hpp"
#include "ocpik/problems/benchmarks.hpp"
#include "ocpik/random_blocks.hpp"
#include "ocpik/riccati.hpp"

namespace ocpik::acceptance {

struct Outcome {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

inline std::string format_outcome(const Outcome& o) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%s %2d %-28s %6.1fs  %s",
                o.pass ? "PASS" : "FAIL", o.id, o.name.c_str(), o.seconds,
                o.detail.c_str());
  return buf;
}

namespace detail {

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

template <class... Args>
std::string format(const char* fmt, Args... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct TimedSolve {
  problems::Benchmark bench;
  SolveResult result;
  double seconds = 0.0;
};

}  // namespace detail

/// Least-squares slope of log(t) against log(K).
inline double growth_exponent(const std::vector<int>& K,
                              const std::vector<double>& t) {
  const std::size_t n = K.size();
  if (n < 2) return 0.0;
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += std::log(K[i]);
    my += std::log(t[i]);
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = std::log(K[i]) - mx;
    sxy += dx * (std::log(t[i]) - my);
    sxx += dx * dx;
  }
  return sxx > 0 ? sxy / sxx : 0.0;
}

/// The same convex stage repeated K times, nx = 8, nu = 4, no equalities.
/// Dynamics A = I + 0.05·M, B = 0.1·N, a sampled continuous-time system.
inline StageBlocks repeated_lqr(int K, unsigned seed) {
  std::mt19937_64 rng(seed);
  StageBlocks one = synthetic::random_blocks(rng, {{8, 8}, {4, 0}, {0, 0}});
  one[0].A = Eigen::MatrixXd::Identity(8, 8) + 0.05 * one[0].A;
  one[0].B *= 0.1;
  StageBlocks blocks(K + 1);
  for (int k = 0; k < K; ++k) blocks[k] = one[0];
  blocks[K] = one[1];
  return blocks;
}

namespace detail {

// Wall time in ms of one structured solve (factorize, solve, refinement),
// averaged over `batch` solves.
inline double structured_batch_ms(const StageBlocks& blocks,
                                  const KktVector& rhs, int batch) {
  double sink = 0.0;
  const auto t0 = Clock::now();
  for (int b = 0; b < batch; ++b) {
    const auto f = std::get<RiccatiFactorization>(factorize(blocks, 0.0));
    sink += solve_refined(f, blocks, rhs).inf_norm();
  }
  const double ms = 1e3 * seconds_since(t0) / batch;
  return std::isfinite(sink) ? ms : INFINITY;
}

}  // namespace detail

/// Median over `samples` of the per-solve structured time in ms.
inline double structured_solve_ms(const StageBlocks& blocks, int samples,
                                  int batch) {
  const KktVector rhs = rhs_of(blocks);
  std::vector<double> t;
  for (int s = 0; s < samples; ++s) {
    t.push_back(detail::structured_batch_ms(blocks, rhs, batch));
  }
  return detail::median(t);
}

inline double dense_solve_ms(const StageBlocks& blocks, int samples) {
  std::vector<double> t;
  for (int s = 0; s < samples; ++s) {
    const auto t0 = detail::Clock::now();
    (void)dense_oracle_solve(blocks, 0.0);
    t.push_back(1e3 * detail::seconds_since(t0));
  }
  return detail::median(t);
}

struct ScalingRow {
  int K = 0;
  double ms = 0.0;
};

/// Per-solve structured time over a list of horizons of repeated_lqr. The
/// horizons are sampled round-robin so slow phases of a busy machine hit
/// all of them alike; each entry is the median over samples.
inline std::vector<ScalingRow> lqr_scaling(const std::vector<int>& Ks,
                                           unsigned seed, int samples = 15) {
  std::vector<StageBlocks> blocks;
  std::vector<KktVector> rhs;
  for (int K : Ks) {
    blocks.push_back(repeated_lqr(K, seed));
    rhs.push_back(rhs_of(blocks.back()));
  }
  std::vector<std::vector<double>> t(Ks.size());
  for (int s = 0; s < samples; ++s) {
    for (std::size_t i = 0; i < Ks.size(); ++i) {
      const int batch = std::max(1, 2000 / std::max(Ks[i], 1));
      t[i].push_back(detail::structured_batch_ms(blocks[i], rhs[i], batch));
    }
  }
  std::vector<ScalingRow> rows;
  for (std::size_t i = 0; i < Ks.size(); ++i) {
    rows.push_back({Ks[i], detail::median(t[i])});
  }
  return rows;
}

/// Runs and caches benchmark solves shared between criteria.
class Battery {
 public:
  explicit Battery(unsigned seed = 1) : seed_(seed) {}

  Outcome oracle_equivalence() {
    return timed(1, "linear-solver oracle", [&](Outcome& o) {
      std::mt19937_64 rng(seed_);
      const int horizons[] = {1, 2, 5, 10};
      double worst = 0.0;
      int agree = 0, pd = 0;
      for (int trial = 0; trial < 100; ++trial) {
        const int K = horizons[trial % 4];
        const auto blocks = synthetic::random_blocks(
            rng, synthetic::random_shape(rng, K), trial % 3 != 2);
        const auto res = factorize(blocks, 0.0);
        const auto oracle = dense_oracle_solve(blocks, 0.0);
        const bool is_pd = std::holds_alternative<RiccatiFactorization>(res);
        if (is_pd == oracle.reduced_pd) ++agree;
        if (!is_pd) continue;
        ++pd;
        const auto d = solve_refined(std::get<RiccatiFactorization>(res),
                                     blocks, rhs_of(blocks));
        worst = std::max(worst,
                         synthetic::relative_difference(d, oracle.direction));
      }
      o.detail = detail::format(
          "inertia agree %d/100, %d solved, max rel err %.2e", agree, pd,
          worst);
      o.pass = agree == 100 && worst <= 1e-8;
    }, 10.0);
  }

  Outcome min_time_convergence() {
    return timed(2, "minimum-time convergence", [&](Outcome& o) {
      const auto& swing = solved("cart_pendulum_swing");
      const auto& p2p = solved("quadrotor_p2p");
      const int a = swing.result.iterations();
      const int b = p2p.result.iterations();
      o.detail = detail::format(
          "swing %s %d it %.1fs, p2p %s %d it %.1fs",
          std::string(to_string(swing.result.status)).c_str(), a,
          swing.seconds, std::string(to_string(p2p.result.status)).c_str(), b,
          p2p.seconds);
      o.pass = solved_to_tol(swing) && solved_to_tol(p2p) && a >= 40 &&
               a <= 200 && b >= 30 && b <= 250 && swing.seconds < 30 &&
               p2p.seconds < 30;
    });
  }

  Outcome mpc_convergence() {
    return timed(3, "MPC convergence", [&](Outcome& o) {
      bool ok = true;
      std::string parts;
      for (const char* name :
           {"cart_pendulum_mpc", "quadrotor_mpc", "hanging_chain_2d"}) {
        const auto& r = solved(name);
        ok = ok && solved_to_tol(r) && r.result.iterations() <= 30 &&
             r.seconds < 10;
        parts += detail::format("%s %d it %.2fs; ", name,
                                r.result.iterations(), r.seconds);
      }
      o.detail = parts;
      o.pass = ok;
    });
  }

  Outcome analytic_min_time() {
    return timed(4, "double-integrator T*", [&](Outcome& o) {
      const auto b = problems::double_integrator_min_time();
      const auto r = solve(b.problem, b.guess);
      const int K = b.problem.dims.K;
      const int iT = static_cast<int>(r.iterate.x(0).size()) - 1;
      const double T0 = r.iterate.x(0)[iT];
      double spread = 0.0;
      for (int k = 0; k <= K; ++k) {
        spread = std::max(spread, std::abs(r.iterate.x(k)[iT] - T0));
      }
      o.detail = detail::format("T* = %.10f, max |T_k - T_0| = %.1e", T0,
                                spread);
      o.pass = r.status == SolveStatus::Solved &&
               std::abs(T0 - 2.0) <= 1e-4 && spread <= 1e-8;
    });
  }

  Outcome derivatives() {
    return timed(5, "derivative correctness", [&](Outcome& o) {
      double worst = 0.0;
      std::string worst_name;
      for (const auto& name : problems::benchmark_names()) {
        const auto b = problems::build_benchmark(name);
        const double m =
            check_problem_derivatives(b.problem,
                                      pack_guess(b.problem.dims, b.guess), 50,
                                      12345)
                .worst();
        if (m >= worst) {
          worst = m;
          worst_name = name;
        }
      }
      o.detail = detail::format("max rel mismatch %.2e (%s)", worst,
                                worst_name.c_str());
      o.pass = worst <= 1e-6;
    }, 20.0);
  }

  Outcome interior_point_invariants() {
    return timed(6, "interior-point invariants", [&](Outcome& o) {
      const SolverOptions opt;
      int records = 0, violations = 0;
      for (const char* name :
           {"cart_pendulum_swing", "quadrotor_p2p", "cart_pendulum_mpc",
            "quadrotor_mpc", "hanging_chain_2d"}) {
        const auto& r = solved(name).result;
        double mu_prev = INFINITY;
        for (const auto& rec : r.log) {
          ++records;
          const bool ok = rec.min_s > 0 && rec.min_z > 0 &&
                          rec.s_ratio >= 1 - rec.tau - 1e-12 &&
                          rec.z_ratio >= 1 - rec.tau - 1e-12 &&
                          rec.mu <= mu_prev;
          mu_prev = rec.mu;
          if (!ok) ++violations;
        }
        for (const auto& u : r.barrier_updates) {
          if (!(u.mu_new < u.mu_old) ||
              (!u.forced && u.e_mu > opt.kappa_eps * u.mu_old)) {
            ++violations;
          }
        }
      }
      o.detail = detail::format("%d logged iterations, %d violations",
                                records, violations);
      o.pass = records > 0 && violations == 0;
    });
  }

  Outcome regularization() {
    return timed(7, "regularization path", [&](Outcome& o) {
      const auto b = problems::double_well();
      const auto r = solve(b.problem, b.guess);
      double max_delta = 0.0;
      for (const auto& rec : r.log) max_delta = std::max(max_delta, rec.delta);

      // One stage, control curvature −1: indefinite reduced Hessian.
      StageBlocks blocks(2);
      for (int k = 0; k < 2; ++k) {
        StageBlock& s = blocks[k];
        const int nu = k == 0 ? 1 : 0;
        s.Q = Eigen::MatrixXd::Constant(1, 1, 1.0);
        s.R = Eigen::MatrixXd::Constant(nu, nu, -1.0);
        s.S = Eigen::MatrixXd::Zero(1, nu);
        s.A = Eigen::MatrixXd::Constant(1 - k, 1, 1.0);
        s.B = Eigen::MatrixXd::Zero(1 - k, nu);
        s.Hu.resize(0, nu);
        s.Hx.resize(0, 1);
        s.rhs.r = Eigen::VectorXd::Zero(nu);
        s.rhs.q = Eigen::VectorXd::Zero(1);
        s.rhs.b = Eigen::VectorXd::Zero(1 - k);
        s.rhs.h.resize(0);
      }
      const auto f = factorize(blocks, 0.0);
      const auto dense = dense_oracle_solve(blocks, 0.0);
      const bool report = std::holds_alternative<IndefiniteReport>(f);
      o.detail = detail::format(
          "double_well %s, max delta %.3g; indefinite report %s, dense "
          "inertia (+%d, -%d, 0:%d)",
          std::string(to_string(r.status)).c_str(), max_delta,
          report ? "yes" : "no", dense.inertia.positive,
          dense.inertia.negative, dense.inertia.zero);
      o.pass = r.status == SolveStatus::Solved && max_delta > 0 && report &&
               !dense.reduced_pd;
    });
  }

  Outcome horizon_scaling() {
    return timed(8, "linear horizon scaling", [&](Outcome& o) {
      const auto rows = lqr_scaling({100, 200, 400}, seed_);
      std::vector<int> Ks;
      std::vector<double> ts;
      for (const auto& r : rows) {
        Ks.push_back(r.K);
        ts.push_back(r.ms);
      }
      const double r1 = ts[1] / ts[0], r2 = ts[2] / ts[1];
      const double p = growth_exponent(Ks, ts);
      const StageBlocks k50 = repeated_lqr(50, seed_);
      const double structured = structured_solve_ms(k50, 9, 40);
      const double dense = dense_solve_ms(k50, 5);
      o.detail = detail::format(
          "ratios %.2f %.2f, exponent %.2f, K=50 dense/structured %.1fx",
          r1, r2, p, dense / structured);
      o.pass = r1 >= 1.5 && r1 <= 3 && r2 >= 1.5 && r2 <= 3 && p <= 1.3 &&
               dense >= 5 * structured;
    });
  }

  Outcome exact_penalty() {
    return timed(9, "L1 exact penalty", [&](Outcome& o) {
      const std::vector<double> sweep = {1, 10, 30, 100, 1e3, 1e4};
      std::vector<std::vector<Eigen::VectorXd>> traj;
      std::vector<double> worst;
      bool all_solved = true;
      for (double rho : sweep) {
        const auto b = problems::toy_obstacle(rho);
        const auto r = solve(b.problem, b.guess);
        all_solved = all_solved && r.status == SolveStatus::Solved;
        std::vector<Eigen::VectorXd> xs;
        double v = 0.0;
        for (int k = 0; k <= b.problem.dims.K; ++k) {
          xs.push_back(r.iterate.x(k));
          v = std::max(v, problems::toy_obstacle_violation(xs.back()));
        }
        traj.push_back(std::move(xs));
        worst.push_back(v);
      }
      std::size_t first = sweep.size();
      while (first > 0 && worst[first - 1] <= 1e-6) --first;
      double dist = 0.0;
      for (std::size_t i = first + 1; i < sweep.size(); ++i) {
        for (std::size_t k = 0; k < traj[first].size(); ++k) {
          dist = std::max(
              dist, (traj[i][k] - traj[first][k]).lpNorm<Eigen::Infinity>());
        }
      }
      const bool plateau = first + 1 < sweep.size();
      o.detail = detail::format(
          "threshold rho = %g, plateau spread %.1e",
          plateau ? sweep[first] : NAN, dist);
      o.pass = all_solved && plateau && dist <= 1e-6;
    });
  }

  Outcome determinism() {
    return timed(10, "determinism", [&](Outcome& o) {
      auto log_text = [] {
        const auto b = problems::build_benchmark("quadrotor_mpc");
        std::ostringstream os;
        write_log_csv(os, solve(b.problem, b.guess).log);
        return os.str();
      };
      const std::string a = log_text();
      const std::string b = log_text();
      o.detail = detail::format("%zu log bytes, identical: %s", a.size(),
                                a == b ? "yes" : "no");
      o.pass = !a.empty() && a == b;
    });
  }

  std::vector<Outcome> run_all(
      const std::function<void(const Outcome&)>& on_outcome = {}) {
    std::vector<Outcome> out;
    for (auto fn : {&Battery::oracle_equivalence,
                    &Battery::min_time_convergence,
                    &Battery::mpc_convergence, &Battery::analytic_min_time,
                    &Battery::derivatives,
                    &Battery::interior_point_invariants,
                    &Battery::regularization, &Battery::horizon_scaling,
                    &Battery::exact_penalty, &Battery::determinism}) {
      out.push_back((this->*fn)());
      if (on_outcome) on_outcome(out.back());
    }
    return out;
  }

 private:
  template <class Body>
  Outcome timed(int id, const char* name, Body&& body,
                double budget_s = INFINITY) {
    Outcome o;
    o.id = id;
    o.name = name;
    const auto t0 = detail::Clock::now();
    try {
      body(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    o.seconds = detail::seconds_since(t0);
    if (o.seconds >= budget_s) {
      o.pass = false;
      o.detail += detail::format(" [over %.0fs budget]", budget_s);
    }
    return o;
  }

  const detail::TimedSolve& solved(const std::string& name) {
    auto it = cache_.find(name);
    if (it == cache_.end()) {
      detail::TimedSolve t{problems::build_benchmark(name), {}, 0.0};
      const auto t0 = detail::Clock::now();
      t.result = solve(t.bench.problem, t.bench.guess);
      t.seconds = detail::seconds_since(t0);
      it = cache_.emplace(name, std::move(t)).first;
    }
    return it->second;
  }

  static bool solved_to_tol(const detail::TimedSolve& t) {
    return t.result.status == SolveStatus::Solved &&
           t.result.kkt.total <= SolverOptions{}.tol;
  }

  unsigned seed_;
  std::map<std::string, detail::TimedSolve> cache_;
};

}  // namespace ocpik::acceptance
