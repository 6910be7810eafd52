#pragma once

#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ocpik/errors.hpp"
#include "ocpik/ocp.hpp"
#include "ocpik/problems/models.hpp"
#include "ocpik/problems/rk4.hpp"
#include "ocpik/problems/soft.hpp"
#include "ocpik/problems/transcription.hpp"

namespace ocpik::problems {

/// A problem ready to solve with its deterministic cold-start guess.
struct Benchmark {
  std::string name;
  OcpProblem problem;
  InitialGuess guess;
};

/// (K, nx, nu, ni, ne[0], ne[K]) with ni and nu read at stage 1 and nx at
/// stage 0, the layout of the usual dimension tables.
struct TableRow {
  int K, nx, nu, ni, ne0, neK;
  friend bool operator==(const TableRow&, const TableRow&) = default;
};

inline TableRow table_row(const OcpDims& d) {
  return {d.K, d.nx[0], d.nu[0], d.ng[1], d.nh[0], d.nh[d.K]};
}

/// Optional overrides of builder parameters. Keys not used by the chosen
/// builder are rejected.
using BenchmarkParams = std::map<std::string, double>;

namespace detail {

class ParamReader {
 public:
  explicit ParamReader(const BenchmarkParams& p) : params_(p) {}

  double get(const std::string& key, double fallback) {
    used_.push_back(key);
    const auto it = params_.find(key);
    return it == params_.end() ? fallback : it->second;
  }
  int get_int(const std::string& key, int fallback) {
    const double v = get(key, fallback);
    if (v != std::floor(v) || v < 1) {
      throw ConfigError("parameter '" + key + "' must be a positive integer");
    }
    return static_cast<int>(v);
  }
  void finish() const {
    for (const auto& [k, v] : params_) {
      if (std::find(used_.begin(), used_.end(), k) == used_.end()) {
        throw ConfigError("unknown problem parameter '" + k + "'");
      }
    }
  }

 private:
  const BenchmarkParams& params_;
  std::vector<std::string> used_;
};

inline Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

inline std::vector<StateFix> fix_all(const Eigen::VectorXd& x) {
  std::vector<StateFix> f;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    f.push_back({static_cast<int>(i), x[i]});
  }
  return f;
}

inline InitialGuess constant_guess(const OcpDims& d, const Eigen::VectorXd& x) {
  return interpolated_guess(d, x, x);
}

}  // namespace detail

// --- cart pendulum ------------------------------------------------------------

inline Benchmark cart_pendulum_mpc(const BenchmarkParams& params = {}) {
  detail::ParamReader p(params);
  TranscriptionSpec<CartPendulum> spec;
  spec.K = p.get_int("K", 25);
  spec.dt = p.get("dt", 0.05);
  p.finish();
  spec.state_names = {"p", "theta", "v", "omega"};
  const double pi = std::numbers::pi;
  const Eigen::VectorXd ref = detail::vec({0.0, pi, 0.0, 0.0});
  const Eigen::VectorXd x0 = detail::vec({0.1, pi - 0.25, 0.2, 0.8});
  spec.stages.resize(spec.K + 1);
  for (int k = 0; k <= spec.K; ++k) {
    StageSpec& s = spec.stages[k];
    s.cost.x_weight = detail::vec({1.0, 10.0, 0.1, 0.1});
    s.cost.x_ref = ref;
    if (k < spec.K) {
      s.cost.u_weight = detail::vec({0.01});
      s.cost.u_ref = detail::vec({0.0});
    }
  }
  spec.stages[0].fixes = detail::fix_all(x0);
  Benchmark b{"cart_pendulum_mpc", transcribe(spec), {}};
  b.guess = detail::constant_guess(b.problem.dims, x0);
  return b;
}

inline Benchmark cart_pendulum_swing(const BenchmarkParams& params = {}) {
  detail::ParamReader p(params);
  MinTimeSpec<CartPendulum> spec;
  spec.base.K = p.get_int("K", 100);
  const double f_max = p.get("force_max", 50.0);
  const double p_max = p.get("position_max", 1.5);
  const double v_max = p.get("velocity_max", 2.0);
  spec.T_guess = p.get("T_guess", 1.0);
  spec.base.model.length = p.get("length", 0.5);
  spec.base.model.pole_mass = p.get("pole_mass", spec.base.model.pole_mass);
  const double u_weight = p.get("control_weight", 1e-4);
  p.finish();
  spec.base.state_names = {"p", "theta", "v", "omega"};
  const double pi = std::numbers::pi;
  const int K = spec.base.K;
  spec.base.stages.resize(K + 1);
  for (int k = 0; k <= K; ++k) {
    StageSpec& s = spec.base.stages[k];
    const int off = k < K ? CartPendulum::nu : 0;
    if (k < K) {
      s.bounds.push_back({0, Bound::between(-f_max, f_max)});
      s.cost.u_weight = detail::vec({u_weight});
      s.cost.u_ref = detail::vec({0.0});
    }
    s.bounds.push_back({off + 0, Bound::between(-p_max, p_max)});
    s.bounds.push_back({off + 2, Bound::between(-v_max, v_max)});
  }
  spec.base.stages[0].fixes = detail::fix_all(detail::vec({0, 0, 0, 0}));
  spec.base.stages[K].fixes = {{1, pi}, {2, 0.0}, {3, 0.0}};
  Benchmark b{"cart_pendulum_swing", make_min_time(spec), {}};
  b.guess = interpolated_guess(b.problem.dims, detail::vec({0, 0, 0, 0}),
                               detail::vec({0, pi, 0, 0}), spec.T_guess);
  return b;
}

// --- hanging chain ------------------------------------------------------------

template <int D>
Benchmark hanging_chain(const std::string& name,
                        const BenchmarkParams& params) {
  detail::ParamReader p(params);
  TranscriptionSpec<HangingChain<D>> spec;
  spec.K = p.get_int("K", 25);
  spec.dt = p.get("dt", 0.2);
  spec.substeps = p.get_int("substeps", 4);
  const double u_max = p.get("control_max", 1.0);
  p.finish();
  using Chain = HangingChain<D>;
  Eigen::Matrix<double, D, 1> end = Eigen::Matrix<double, D, 1>::Zero();
  end[0] = 1.0;
  const Eigen::VectorXd ref = spec.model.equilibrium(end);

  // Disturbance: a constant end-mass velocity applied for a few intervals.
  Eigen::VectorXd x0 = ref;
  Eigen::VectorXd push = Eigen::VectorXd::Zero(D);
  push[0] = -1.0;
  push[D - 1] = 1.0;
  if (D == 3) push[1] = 1.0;
  for (int i = 0; i < 3; ++i) {
    Eigen::VectorXd next(Chain::nx);
    rk4_integrate<double>(spec.model, std::span<const double>(x0.data(), x0.size()),
                          std::span<const double>(push.data(), D), 0.1, 4,
                          std::span<double>(next.data(), next.size()));
    x0 = next;
  }

  spec.stages.resize(spec.K + 1);
  for (int k = 0; k <= spec.K; ++k) {
    StageSpec& s = spec.stages[k];
    s.cost.x_weight = Eigen::VectorXd::Constant(Chain::nx, 1.0);
    s.cost.x_weight.tail(D).setConstant(25.0);
    s.cost.x_ref = ref;
    if (k < spec.K) {
      s.cost.u_weight = Eigen::VectorXd::Constant(D, 1.0);
      s.cost.u_ref = Eigen::VectorXd::Zero(D);
      for (int j = 0; j < D; ++j) {
        s.bounds.push_back({j, Bound::between(-u_max, u_max)});
      }
    }
  }
  spec.stages[0].fixes = detail::fix_all(x0);
  Benchmark b{name, transcribe(spec), {}};
  b.guess = detail::constant_guess(b.problem.dims, x0);
  return b;
}

// --- quadrotor ----------------------------------------------------------------

namespace detail {

struct QuadLimits {
  double thrust = 5.0;  // |thrust command − hover|
  double rate = 3.0;
  double tilt = 0.7;  // |roll|, |pitch|
};

inline void quad_bounds(StageSpec& s, const QuadLimits& l, bool terminal) {
  const int off = terminal ? 0 : Quadrotor::nu;
  if (!terminal) {
    s.bounds.push_back({0, Bound::between(-l.thrust, l.thrust)});
    for (int j = 1; j < 4; ++j) {
      s.bounds.push_back({j, Bound::between(-l.rate, l.rate)});
    }
  }
  s.bounds.push_back({off + 6, Bound::between(-l.tilt, l.tilt)});
  s.bounds.push_back({off + 7, Bound::between(-l.tilt, l.tilt)});
}

inline Eigen::VectorXd hover(double x, double y, double z, double g) {
  Eigen::VectorXd s = Eigen::VectorXd::Zero(Quadrotor::nx);
  s[0] = x;
  s[1] = y;
  s[2] = z;
  s[9] = g;
  return s;
}

}  // namespace detail

inline Benchmark quadrotor_mpc(const BenchmarkParams& params = {}) {
  detail::ParamReader p(params);
  TranscriptionSpec<Quadrotor> spec;
  spec.K = p.get_int("K", 25);
  spec.dt = p.get("dt", 0.1);
  p.finish();
  spec.state_names = {"px", "py", "pz", "vx", "vy", "vz",
                      "roll", "pitch", "yaw", "thrust"};
  const detail::QuadLimits lim;
  const double g = spec.model.gravity;
  const Eigen::VectorXd ref = detail::hover(0, 0, 0, g);
  Eigen::VectorXd x0 = ref;
  x0.segment(3, 3) << 1.0, -0.5, 0.3;
  x0.segment(6, 3) << 0.2, -0.15, 0.1;
  spec.stages.resize(spec.K + 1);
  for (int k = 0; k <= spec.K; ++k) {
    StageSpec& s = spec.stages[k];
    s.cost.x_weight = detail::vec({10, 10, 10, 1, 1, 1, 1, 1, 1, 0.01});
    s.cost.x_ref = ref;
    if (k < spec.K) {
      s.cost.u_weight = detail::vec({0.1, 0.1, 0.1, 0.1});
      s.cost.u_ref = Eigen::VectorXd::Zero(Quadrotor::nu);
    }
    detail::quad_bounds(s, lim, k == spec.K);
  }
  // Terminal stage keeps only the input-independent tilt bounds, so the
  // inequality count read at stage 1 is the full set of six.
  spec.stages[0].fixes = detail::fix_all(x0);
  Benchmark b{"quadrotor_mpc", transcribe(spec), {}};
  b.guess = detail::constant_guess(b.problem.dims, x0);
  return b;
}

namespace detail {

struct P2pSetup {
  MinTimeSpec<Quadrotor> spec;
  Eigen::VectorXd start;
  Eigen::VectorXd goal;
};

inline P2pSetup quadrotor_p2p_setup(ParamReader& p) {
  MinTimeSpec<Quadrotor> spec;
  spec.base.K = p.get_int("K", 25);
  spec.T_guess = p.get("T_guess", 1.0);
  const double u_weight = p.get("control_weight", 1e-3);
  QuadLimits lim;
  lim.thrust = p.get("thrust_max", lim.thrust);
  lim.rate = p.get("rate_max", 2.0);
  lim.tilt = p.get("tilt_max", lim.tilt);
  Eigen::VectorXd goal_pos(3);
  goal_pos << p.get("goal_x", 3.0), p.get("goal_y", 2.0), p.get("goal_z", 1.0);
  spec.base.state_names = {"px", "py", "pz", "vx", "vy", "vz",
                           "roll", "pitch", "yaw", "thrust"};
  const double g = spec.base.model.gravity;
  const int K = spec.base.K;
  spec.base.stages.resize(K + 1);
  for (int k = 0; k <= K; ++k) {
    quad_bounds(spec.base.stages[k], lim, k == K);
    if (k < K) {
      spec.base.stages[k].cost.u_weight =
          Eigen::VectorXd::Constant(Quadrotor::nu, u_weight);
      spec.base.stages[k].cost.u_ref = Eigen::VectorXd::Zero(Quadrotor::nu);
    }
  }
  const Eigen::VectorXd start = hover(0, 0, 0, g);
  const Eigen::VectorXd goal = hover(goal_pos[0], goal_pos[1], goal_pos[2], g);
  spec.base.stages[0].fixes = fix_all(start);
  for (int i = 0; i < 8; ++i) {
    spec.base.stages[K].fixes.push_back({i, goal[i]});
  }
  return {spec, start, goal};
}

/// Vertical cylinder: r² − (px − cx)² − (py − cy)² ≤ 0 on w = (u, x).
struct CylinderObstacle {
  int px_index = 0;
  double cx = 0.0, cy = 0.0, radius = 0.0;

  template <class T>
  T operator()(std::span<const T> w) const {
    const T dx = w[px_index] - cx;
    const T dy = w[px_index + 1] - cy;
    return radius * radius - dx * dx - dy * dy;
  }
};

}  // namespace detail

inline Benchmark quadrotor_p2p(const BenchmarkParams& params = {}) {
  detail::ParamReader p(params);
  const auto setup = detail::quadrotor_p2p_setup(p);
  p.finish();
  Benchmark b{"quadrotor_p2p", make_min_time(setup.spec), {}};
  b.guess = interpolated_guess(b.problem.dims, setup.start, setup.goal,
                               setup.spec.T_guess);
  return b;
}

inline Benchmark quadrotor_p2p_one_obstacle_soft(
    const BenchmarkParams& params = {}) {
  detail::ParamReader p(params);
  const auto setup = detail::quadrotor_p2p_setup(p);
  const double rho = p.get("rho", 100.0);
  const double radius = p.get("obstacle_radius", 0.4);
  p.finish();
  const OcpProblem base = make_min_time(setup.spec);
  // Centered slightly off the straight path so the detour side is defined.
  const double mx = 0.5 * setup.goal[0], my = 0.5 * setup.goal[1];
  const double len = std::max(1e-9, std::hypot(mx, my));
  detail::CylinderObstacle obs{Quadrotor::nu + 0, mx + 0.1 * my / len,
                               my - 0.1 * mx / len, radius};
  Benchmark b{"quadrotor_p2p_one_obstacle_soft",
              l1_soften(SoftConstraintSpec<detail::CylinderObstacle>{obs, rho},
                        base),
              {}};
  b.guess = interpolated_guess(b.problem.dims, setup.start, setup.goal,
                               setup.spec.T_guess);
  return b;
}

// --- registry -----------------------------------------------------------------

inline const std::vector<std::string>& benchmark_names() {
  static const std::vector<std::string> names = {
      "cart_pendulum_mpc", "cart_pendulum_swing", "hanging_chain_2d",
      "hanging_chain_3d",  "quadrotor_mpc",       "quadrotor_p2p",
      "quadrotor_p2p_one_obstacle_soft"};
  return names;
}

/// Throws UnknownProblemError for names outside benchmark_names().
inline Benchmark build_benchmark(const std::string& name,
                                 const BenchmarkParams& params = {}) {
  if (name == "cart_pendulum_mpc") return cart_pendulum_mpc(params);
  if (name == "cart_pendulum_swing") return cart_pendulum_swing(params);
  if (name == "hanging_chain_2d") return hanging_chain<2>(name, params);
  if (name == "hanging_chain_3d") return hanging_chain<3>(name, params);
  if (name == "quadrotor_mpc") return quadrotor_mpc(params);
  if (name == "quadrotor_p2p") return quadrotor_p2p(params);
  if (name == "quadrotor_p2p_one_obstacle_soft") {
    return quadrotor_p2p_one_obstacle_soft(params);
  }
  throw UnknownProblemError("unknown problem '" + name + "'");
}

// --- analytic and toy problems ----------------------------------------------

/// Rest-to-rest over a distance with |u| ≤ u_max in minimum time. The exact
/// optimum is bang-bang with T* = 2·sqrt(distance/u_max); with K even the
/// switch falls on a grid point and RK4 reproduces it exactly.
inline Benchmark double_integrator_min_time(int K = 20, double distance = 1.0,
                                            double u_max = 1.0) {
  MinTimeSpec<DoubleIntegrator> spec;
  spec.base.K = K;
  spec.base.state_names = {"p", "v"};
  spec.base.stages.resize(K + 1);
  for (int k = 0; k < K; ++k) {
    spec.base.stages[k].bounds.push_back({0, Bound::between(-u_max, u_max)});
  }
  spec.base.stages[0].fixes = detail::fix_all(detail::vec({0.0, 0.0}));
  spec.base.stages[K].fixes = detail::fix_all(detail::vec({distance, 0.0}));
  Benchmark b{"double_integrator_min_time", make_min_time(spec), {}};
  b.guess = interpolated_guess(b.problem.dims, detail::vec({0.0, 0.0}),
                               detail::vec({distance, 0.0}), 1.0);
  return b;
}

/// Planar point mass moving rest-to-rest from (0,0) to (2,0) in fixed time
/// with minimum control effort, around a disc obstacle centered slightly
/// above the straight path. The obstacle is an L1-softened constraint with
/// weight rho.
inline Benchmark toy_obstacle(double rho, int K = 30, double dt = 0.1) {
  TranscriptionSpec<PointMass2D> spec;
  spec.K = K;
  spec.dt = dt;
  spec.state_names = {"px", "py", "vx", "vy"};
  spec.stages.resize(K + 1);
  for (int k = 0; k < K; ++k) {
    spec.stages[k].cost.u_weight = detail::vec({1.0, 1.0});
    spec.stages[k].cost.u_ref = detail::vec({0.0, 0.0});
  }
  const Eigen::VectorXd start = detail::vec({0, 0, 0, 0});
  const Eigen::VectorXd goal = detail::vec({2, 0, 0, 0});
  spec.stages[0].fixes = detail::fix_all(start);
  spec.stages[K].fixes = detail::fix_all(goal);
  const OcpProblem base = transcribe(spec);
  detail::CylinderObstacle obs{PointMass2D::nu, 1.0, 0.1, 0.3};
  Benchmark b{"toy_obstacle",
              l1_soften(SoftConstraintSpec<detail::CylinderObstacle>{obs, rho},
                        base),
              {}};
  b.guess = interpolated_guess(b.problem.dims, start, goal);
  return b;
}

/// The obstacle function of toy_obstacle, evaluated at a state.
inline double toy_obstacle_violation(const Eigen::VectorXd& x) {
  const double dx = x[0] - 1.0, dy = x[1] - 0.1;
  return std::max(0.0, 0.09 - dx * dx - dy * dy);
}

namespace detail {

// Stage of double_well: x⁺ = x + dt·u, cost ½x² + ¼u⁴ − ½u², |u| ≤ u_max.
struct DoubleWellStage {
  bool terminal = false;
  bool first = false;
  double dt = 0.1;
  double u_max = 2.0;
  double x0 = 1.0;

  StageShape shape() const {
    if (terminal) return {0, 1, 0, 0, 0};
    return {1, 1, 1, 1, first ? 1 : 0};
  }

  template <class T>
  T cost(std::span<const T> w) const {
    if (terminal) return 0.5 * w[0] * w[0];
    const T u2 = w[0] * w[0];
    return 0.5 * w[1] * w[1] + 0.25 * u2 * u2 - 0.5 * u2;
  }
  template <class T>
  void dynamics(std::span<const T> w, std::span<T> out) const {
    if (!terminal) out[0] = w[1] + dt * w[0];
  }
  template <class T>
  void inequalities(std::span<const T> w, std::span<T> out) const {
    if (!terminal) out[0] = w[0];
  }
  template <class T>
  void equalities(std::span<const T> w, std::span<T> out) const {
    if (first) out[0] = w[1] - x0;
  }
};

}  // namespace detail

/// Nonconvex control cost with two wells at u = ±1 and a local maximum at
/// u = 0. The cold start u = 0 sits on negative curvature, so the first
/// reduced Hessian is indefinite.
inline Benchmark double_well(int K = 10) {
  std::vector<Stage> stages;
  for (int k = 0; k <= K; ++k) {
    detail::DoubleWellStage m;
    m.terminal = k == K;
    m.first = k == 0;
    Stage st;
    if (!m.terminal) st.bounds = {Bound::between(-m.u_max, m.u_max)};
    st.functions = make_autodiff_stage(m);
    stages.push_back(std::move(st));
  }
  Benchmark b{"double_well", make_problem(std::move(stages)), {}};
  b.guess = detail::constant_guess(b.problem.dims, detail::vec({1.0}));
  return b;
}

}  // namespace ocpik::problems
