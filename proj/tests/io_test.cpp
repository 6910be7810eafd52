#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "ocpik/acceptance.hpp"
#include "ocpik/io.hpp"
#include "ocpik/problems/benchmarks.hpp"
#include "ocpik/run_config.hpp"

namespace {

using namespace ocpik;
namespace fs = std::filesystem;

struct Solved {
  problems::Benchmark bench;
  SolveResult result;
  int n_slack = 0;
};

const Solved& quad_p2p() {
  static const Solved s = [] {
    Solved out{problems::build_benchmark("quadrotor_p2p"), {}, 0};
    out.result = solve(out.bench.problem, out.bench.guess);
    out.n_slack = assemble_nlp(out.bench.problem).n_slack;
    return out;
  }();
  return s;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("ocpik_io_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

Iterate parse(const std::string& text) {
  std::istringstream is(text);
  const auto& s = quad_p2p();
  return read_solution(is, s.bench.problem.dims, s.n_slack);
}

std::string written(const Iterate& it) {
  std::ostringstream os;
  write_solution(os, it);
  return os.str();
}

// --- solution files -------------------------------------------------------------

TEST(SolutionFile, RoundTripIsBitwise) {
  const auto& s = quad_p2p();
  ASSERT_EQ(s.result.status, SolveStatus::Solved);
  ASSERT_GT(s.n_slack, 0);
  const Iterate back = parse(written(s.result.iterate));
  const Iterate& it = s.result.iterate;
  for (std::size_t k = 0; k < it.w.size(); ++k) {
    EXPECT_EQ(back.w[k], it.w[k]) << k;
    EXPECT_EQ(back.lam_h[k], it.lam_h[k]) << k;
  }
  for (std::size_t k = 0; k < it.pi.size(); ++k) EXPECT_EQ(back.pi[k], it.pi[k]);
  EXPECT_EQ(back.s, it.s);
  EXPECT_EQ(back.z, it.z);
  EXPECT_EQ(back.lam_g, it.lam_g);
  EXPECT_EQ(back.mu, it.mu);
  EXPECT_EQ(written(back), written(it));
}

TEST(SolutionFile, ExtremeValuesSurvive) {
  Iterate it = quad_p2p().result.iterate;
  it.w[0][0] = 0.1;
  it.w[1][0] = -1.0 / 3.0;
  it.w[2][0] = 1e-300;
  it.w[3][0] = 6.02214076e23;
  const Iterate back = parse(written(it));
  for (int k = 0; k < 4; ++k) EXPECT_EQ(back.w[k][0], it.w[k][0]);
}

TEST(SolutionFile, EmptyInputIsRejected) {
  EXPECT_THROW(parse(""), FormatError);
  EXPECT_THROW(parse("# only a comment\n\n"), FormatError);
}

TEST(SolutionFile, MalformedLinesAreRejected) {
  const std::string good = written(quad_p2p().result.iterate);
  auto replace_line = [&](const std::string& label, const std::string& line) {
    std::istringstream is(good);
    std::ostringstream os;
    std::string l;
    while (std::getline(is, l)) {
      os << (l.rfind(label + " ", 0) == 0 ? line : l) << '\n';
    }
    return os.str();
  };
  EXPECT_THROW(parse(replace_line("mu", "mu 1 abc")), FormatError);
  EXPECT_THROW(parse(replace_line("mu", "mu 2 1 2")), FormatError);
  EXPECT_THROW(parse(replace_line("mu", "mu 1")), FormatError);
  EXPECT_THROW(parse(replace_line("mu", "mu 1 1 2")), FormatError);
  EXPECT_THROW(parse(replace_line("mu", "mu -1")), FormatError);
  EXPECT_THROW(parse(replace_line("mu", "")), FormatError);
  EXPECT_THROW(parse(replace_line("K", "K 1 7")), FormatError);
  EXPECT_THROW(parse(good + "extra 1 0\n"), FormatError);
  EXPECT_THROW(parse(good + "mu 1 0\n"), FormatError);
  EXPECT_THROW(parse(replace_line("x[3]", "x[3] 1 0")), FormatError);
}

// --- logs -------------------------------------------------------------------------

TEST(LogCsv, HeaderAndOneRowPerIteration) {
  const auto& s = quad_p2p();
  std::ostringstream os;
  write_log_csv(os, s.result.log);
  std::istringstream is(os.str());
  std::string header;
  std::getline(is, header);
  EXPECT_EQ(header,
            "iter,mu,objective,theta,kkt_total,alpha_primal,alpha_dual,delta,"
            "soc_count");
  std::istringstream again(os.str());
  const auto rows = read_log_csv(again);
  ASSERT_EQ(rows.size(), s.result.log.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i][0], static_cast<double>(i + 1));
    EXPECT_EQ(rows[i][1], s.result.log[i].mu);
    EXPECT_EQ(rows[i][4], s.result.log[i].kkt_total);
    EXPECT_EQ(rows[i][8], s.result.log[i].soc_count);
  }
}

TEST(LogCsv, RepeatedSolvesGiveIdenticalText) {
  const auto b = problems::build_benchmark("hanging_chain_2d");
  std::ostringstream a, c;
  write_log_csv(a, solve(b.problem, b.guess).log);
  write_log_csv(c, solve(b.problem, b.guess).log);
  EXPECT_EQ(a.str(), c.str());
}

TEST(LogCsv, WrongHeaderIsRejected) {
  std::istringstream is("iter,mu\n1,2\n");
  EXPECT_THROW(read_log_csv(is), FormatError);
}

// --- summary ----------------------------------------------------------------------

TEST(Summary, HeaderWrittenOnce) {
  const fs::path dir = fresh_dir("summary");
  const fs::path file = dir / "summary.csv";
  SummaryRow r{"p", 3, 1.5, 0.5, 0.25, SolveStatus::Solved, 1e-9};
  append_summary(file, r);
  r.problem = "q";
  append_summary(file, r);
  std::ifstream is(file);
  std::string l1, l2, l3, l4;
  std::getline(is, l1);
  std::getline(is, l2);
  std::getline(is, l3);
  EXPECT_FALSE(std::getline(is, l4));
  EXPECT_EQ(l1, kSummaryHeader);
  EXPECT_EQ(l2.substr(0, 4), "p,3,");
  EXPECT_EQ(l3.substr(0, 4), "q,3,");
  EXPECT_NE(l2.find("Solved"), std::string::npos);
}

TEST(Summary, TotalCoversEvaluationAndLinearAlgebra) {
  const auto& s = quad_p2p();
  const auto& t = s.result.timing;
  EXPECT_GE(t.total_ms + 0.05, t.evaluation_ms + t.linear_algebra_ms);
  EXPECT_GT(t.evaluation_ms, 0.0);
  EXPECT_GT(t.linear_algebra_ms, 0.0);
}

// --- run configuration -----------------------------------------------------------

RunConfig config(const std::string& text) {
  std::istringstream is(text);
  return parse_run_config(is);
}

TEST(RunConfig, ParsesAllSections) {
  const RunConfig c = config(
      "[problem]\nname = hanging_chain_2d\nK = 12\n"
      "[solver]\ntol = 1e-6\nmax_iter = 40\n"
      "[output]\ndir = out\n[run]\nreps = 3\nseed = 9\n");
  EXPECT_EQ(c.problem, "hanging_chain_2d");
  EXPECT_EQ(c.problem_params.at("K"), 12.0);
  EXPECT_EQ(c.out_dir, "out");
  EXPECT_EQ(c.reps, 3);
  EXPECT_EQ(c.seed, 9u);
  const SolverOptions o = c.options();
  EXPECT_EQ(o.tol, 1e-6);
  EXPECT_EQ(o.max_iter, 40);
}

TEST(RunConfig, DefaultsWithoutFile) {
  const RunConfig c = config("");
  EXPECT_EQ(c.reps, 1);
  EXPECT_EQ(c.options().tol, SolverOptions{}.tol);
}

TEST(RunConfig, RejectsUnknownAndMalformedInput) {
  EXPECT_THROW(config("[solver]\nbogus = 1\n"), ConfigError);
  EXPECT_THROW(config("[solver]\ntol = fast\n"), ConfigError);
  EXPECT_THROW(config("[extra]\nx = 1\n"), ConfigError);
  EXPECT_THROW(config("[run]\nthreads = 2\n"), ConfigError);
  EXPECT_THROW(config("[run]\nreps = 0\n"), ConfigError);
  EXPECT_THROW(config("[run]\nseed = -1\n"), ConfigError);
  EXPECT_THROW(config("[output]\npath = x\n"), ConfigError);
  EXPECT_THROW(config("[problem]\nK = many\n"), ConfigError);
  EXPECT_THROW(config("tol = 1\n"), ConfigError);
  EXPECT_THROW(config("[solver\ntol = 1\n"), ConfigError);
  EXPECT_THROW(config("[solver]\ntol = -1\n"), DomainError);
}

TEST(RunConfig, MissingFileIsConfigError) {
  EXPECT_THROW(load_run_config("/nonexistent/run.ini"), ConfigError);
}

// --- scaling helpers -------------------------------------------------------------

TEST(Scaling, GrowthExponentOfPowerLaws) {
  const std::vector<int> K = {10, 20, 40, 80};
  std::vector<double> lin, quad, flat;
  for (int k : K) {
    lin.push_back(3.0 * k);
    quad.push_back(0.5 * k * k);
    flat.push_back(7.0);
  }
  EXPECT_NEAR(acceptance::growth_exponent(K, lin), 1.0, 1e-12);
  EXPECT_NEAR(acceptance::growth_exponent(K, quad), 2.0, 1e-12);
  EXPECT_NEAR(acceptance::growth_exponent(K, flat), 0.0, 1e-12);
}

TEST(Scaling, RepeatedLqrIsConvexAndSolvable) {
  const StageBlocks b = acceptance::repeated_lqr(20, 1);
  ASSERT_EQ(b.size(), 21u);
  const auto f = factorize(b, 0.0);
  ASSERT_TRUE(std::holds_alternative<RiccatiFactorization>(f));
  const auto d = solve_refined(std::get<RiccatiFactorization>(f), b, rhs_of(b));
  const auto oracle = dense_oracle_solve(b, 0.0);
  EXPECT_LE(synthetic::relative_difference(d, oracle.direction), 1e-8);
}

}  // namespace
