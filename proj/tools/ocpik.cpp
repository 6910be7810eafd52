// ocpik command-line harness: run, check, scaling, suite.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ocpik/acceptance.hpp"
#include "ocpik/io.hpp"
#include "ocpik/ip_solver.hpp"
#include "ocpik/log.hpp"
#include "ocpik/problems/benchmarks.hpp"
#include "ocpik/run_config.hpp"

namespace {

namespace fs = std::filesystem;
using namespace ocpik;

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;

struct Flags {
  std::string problem;
  std::string config;
  std::optional<std::string> tol, mu_init, gamma_theta, max_iter;
  std::optional<int> reps;
  std::optional<std::string> out;
  std::optional<unsigned> seed;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--problem", f.problem, "Benchmark name");
  cmd->add_option("--config", f.config, "INI run configuration");
  cmd->add_option("--tol", f.tol, "KKT tolerance");
  cmd->add_option("--mu-init", f.mu_init, "Initial barrier parameter");
  cmd->add_option("--gamma-theta", f.gamma_theta, "Filter margin on theta");
  cmd->add_option("--max-iter", f.max_iter, "Iteration limit");
  cmd->add_option("--reps", f.reps, "Timing repetitions");
  cmd->add_option("--out", f.out, "Output directory");
  cmd->add_option("--seed", f.seed, "Random seed");
}

// File values first, then flags on top.
RunConfig resolve(const Flags& f) {
  RunConfig c = f.config.empty() ? RunConfig{} : load_run_config(f.config);
  if (!f.problem.empty()) c.problem = f.problem;
  if (f.tol) c.solver["tol"] = *f.tol;
  if (f.mu_init) c.solver["mu_init"] = *f.mu_init;
  if (f.gamma_theta) c.solver["gamma_theta"] = *f.gamma_theta;
  if (f.max_iter) c.solver["max_iter"] = *f.max_iter;
  if (f.reps) c.reps = *f.reps;
  if (f.out) c.out_dir = *f.out;
  if (f.seed) c.seed = *f.seed;
  validate(c);
  return c;
}

problems::Benchmark require_problem(const RunConfig& c) {
  if (c.problem.empty()) throw ConfigError("no problem given (--problem)");
  return problems::build_benchmark(c.problem, c.problem_params);
}

// Bad configuration, unknown problem or unreadable input files.
bool is_input_error(const std::exception& e) {
  return dynamic_cast<const ConfigError*>(&e) ||
         dynamic_cast<const DomainError*>(&e) ||
         dynamic_cast<const UnknownProblemError*>(&e) ||
         dynamic_cast<const FormatError*>(&e) ||
         dynamic_cast<const DimensionError*>(&e);
}

double median(std::vector<double> v) { return acceptance::detail::median(v); }

int cmd_run(const Flags& flags) {
  const RunConfig cfg = resolve(flags);
  const auto bench = require_problem(cfg);
  const SolverOptions opt = cfg.options();

  SolveResult first;
  std::vector<double> total, eval, lin;
  for (int r = 0; r < cfg.reps; ++r) {
    SolveResult res = solve(bench.problem, bench.guess, opt);
    total.push_back(res.timing.total_ms);
    eval.push_back(res.timing.evaluation_ms);
    lin.push_back(res.timing.linear_algebra_ms);
    if (r == 0) first = std::move(res);
  }

  if (log_level() >= LogLevel::Info) {
    std::ostringstream os;
    write_log_csv(os, first.log);
    std::cerr << os.str();
  }

  const fs::path dir(cfg.out_dir);
  fs::create_directories(dir);
  {
    std::ofstream os(dir / (bench.name + ".log.csv"));
    write_log_csv(os, first.log);
  }
  {
    std::ofstream os(dir / (bench.name + ".sol"));
    write_solution(os, first.iterate);
  }
  SummaryRow row{bench.name,         first.iterations(), median(total),
                 median(eval),       median(lin),        first.status,
                 first.kkt.total};
  append_summary(dir / "summary.csv", row);
  std::cout << kSummaryHeader << '\n' << format_summary_row(row) << '\n';
  if (first.status != SolveStatus::Solved && !first.message.empty()) {
    std::cerr << "ocpik: " << first.message << '\n';
  }
  return first.status == SolveStatus::Solved ? kExitOk : kExitFailure;
}

int cmd_check(const Flags& flags, const std::string& solution_path) {
  const RunConfig cfg = resolve(flags);
  const auto bench = require_problem(cfg);
  const SolverOptions opt = cfg.options();
  std::ifstream is(solution_path);
  if (!is) throw FormatError("cannot open " + solution_path);
  const NlpView view = assemble_nlp(bench.problem);
  const Iterate it = read_solution(is, bench.problem.dims, view.n_slack);

  std::vector<StageValues> values;
  evaluate_values(bench.problem, it.w, values);
  double dynamics = 0.0;
  for (int k = 0; k < bench.problem.dims.K; ++k) {
    dynamics = std::max(
        dynamics, (values[k].f - it.x(k + 1)).lpNorm<Eigen::Infinity>());
  }
  const KktError e = kkt_error(bench.problem, it, 0.0);
  std::printf("stationarity      %.3e\n", e.stationarity);
  std::printf("eq_violation      %.3e\n", e.eq_violation);
  std::printf("dynamics_residual %.3e\n", dynamics);
  std::printf("ineq_violation    %.3e\n", e.ineq_violation);
  std::printf("complementarity   %.3e\n", e.centering);
  std::printf("kkt_total         %.3e (tol %.1e)\n", e.total, opt.tol);
  return e.total <= opt.tol ? kExitOk : kExitFailure;
}

int cmd_scaling(const Flags& flags, std::vector<int> Ks) {
  const RunConfig cfg = resolve(flags);
  const std::string base = cfg.problem.empty() ? "lqr" : cfg.problem;
  if (Ks.size() < 2 || !std::is_sorted(Ks.begin(), Ks.end()) ||
      std::adjacent_find(Ks.begin(), Ks.end()) != Ks.end() || Ks[0] < 1) {
    throw ConfigError("--k needs at least two ascending positive horizons");
  }
  const SolverOptions opt = cfg.options();
  std::printf("problem %s\n%6s %16s %6s\n", base.c_str(), "K",
              "linsolve_ms/iter", "status");
  std::vector<double> times;
  bool ok = true;
  for (int K : Ks) {
    double ms = 0.0;
    std::string status = "Solved";
    if (base == "lqr") {
      ms = acceptance::lqr_scaling({K}, cfg.seed, std::max(cfg.reps, 5))[0].ms;
    } else {
      auto params = cfg.problem_params;
      params["K"] = K;
      const auto b = problems::build_benchmark(base, params);
      std::vector<double> per_iter;
      for (int r = 0; r < cfg.reps; ++r) {
        const SolveResult res = solve(b.problem, b.guess, opt);
        status = std::string(to_string(res.status));
        if (res.status != SolveStatus::Solved) break;
        per_iter.push_back(res.timing.linear_algebra_ms /
                           std::max(1, res.iterations()));
      }
      if (status != "Solved") {
        std::printf("%6d %16s %6s\n", K, "-", status.c_str());
        ok = false;
        break;
      }
      ms = median(per_iter);
    }
    times.push_back(ms);
    std::printf("%6d %16.4f %6s\n", K, ms, status.c_str());
    std::fflush(stdout);
  }
  if (!ok) return kExitFailure;
  const double p = acceptance::growth_exponent(Ks, times);
  // Fits at tiny horizons are dominated by fixed costs.
  const bool asserted = Ks.front() >= 50;
  std::printf("exponent %.3f%s\n", p,
              asserted ? (p <= 1.3 ? " (<= 1.3)" : " (> 1.3)")
                       : " (not asserted)");
  if (base == "lqr") {
    const StageBlocks k50 = acceptance::repeated_lqr(50, cfg.seed);
    const double s = acceptance::structured_solve_ms(k50, 9, 40);
    const double d = acceptance::dense_solve_ms(k50, 5);
    std::printf("K=50 structured %.4f ms, dense %.4f ms, speedup %.1fx\n", s,
                d, d / s);
  }
  return !asserted || p <= 1.3 ? kExitOk : kExitFailure;
}

int cmd_suite(const Flags& flags) {
  const RunConfig cfg = resolve(flags);
  acceptance::Battery battery(cfg.seed);
  const auto outcomes = battery.run_all([](const acceptance::Outcome& o) {
    std::printf("%s\n", acceptance::format_outcome(o).c_str());
    std::fflush(stdout);
  });
  for (const auto& o : outcomes) {
    if (!o.pass) return kExitFailure;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  if (const char* env = std::getenv("OCPIK_LOG_LEVEL")) {
    if (!parse_log_level(env)) {
      std::cerr << "ocpik: OCPIK_LOG_LEVEL must be quiet, info or debug\n";
      return kExitConfig;
    }
  }

  CLI::App app{"Interior-point optimal control solver harness"};
  app.require_subcommand(1);
  Flags flags;
  std::string solution;
  std::vector<int> Ks = {100, 200, 400};

  auto* run = app.add_subcommand("run", "Solve a problem and write artifacts");
  add_common(run, flags);
  auto* check = app.add_subcommand("check", "Verify a solution file");
  add_common(check, flags);
  check->add_option("solution", solution, "Solution file")->required();
  auto* scaling =
      app.add_subcommand("scaling", "Per-iteration linear-solve time vs K");
  add_common(scaling, flags);
  scaling->add_option("--k", Ks, "Horizons, ascending");
  auto* suite = app.add_subcommand("suite", "Run the acceptance battery");
  add_common(suite, flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run) return cmd_run(flags);
    if (*check) return cmd_check(flags, solution);
    if (*scaling) return cmd_scaling(flags, Ks);
    if (*suite) return cmd_suite(flags);
  } catch (const std::exception& e) {
    std::cerr << "ocpik: " << e.what() << '\n';
    return is_input_error(e) ? kExitConfig : kExitFailure;
  }
  return kExitFailure;
}
