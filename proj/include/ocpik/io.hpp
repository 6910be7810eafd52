#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ocpik/errors.hpp"
#include "ocpik/ip_solver.hpp"

namespace ocpik {

namespace detail {

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double parse_token(const std::string& tok, const std::string& where) {
  double v = 0.0;
  const char* end = tok.data() + tok.size();
  const auto r = std::from_chars(tok.data(), end, v);
  if (r.ec != std::errc() || r.ptr != end) {
    throw FormatError(where + ": bad number '" + tok + "'");
  }
  return v;
}

inline void write_vector(std::ostream& os, const std::string& label,
                         const Eigen::VectorXd& v) {
  os << label << ' ' << v.size();
  for (Eigen::Index i = 0; i < v.size(); ++i) os << ' ' << format_double(v[i]);
  os << '\n';
}

inline std::string indexed(const char* name, int k) {
  return std::string(name) + "[" + std::to_string(k) + "]";
}

}  // namespace detail

// --- solution files -------------------------------------------------------------

/// One labeled vector per line, "label n v_1 … v_n", with 17 significant
/// digits so values survive the round trip exactly.
inline void write_solution(std::ostream& os, const Iterate& it) {
  os << "# ocpik solution\n";
  const int K = it.K();
  os << "K 1 " << K << '\n';
  for (int k = 0; k <= K; ++k) {
    detail::write_vector(os, detail::indexed("x", k), it.x(k));
    if (k < K) detail::write_vector(os, detail::indexed("u", k), it.u(k));
  }
  for (int k = 0; k < K; ++k) {
    detail::write_vector(os, detail::indexed("pi", k), it.pi[k]);
  }
  for (int k = 0; k <= K; ++k) {
    detail::write_vector(os, detail::indexed("lam_h", k), it.lam_h[k]);
  }
  detail::write_vector(os, "s", it.s);
  detail::write_vector(os, "z", it.z);
  detail::write_vector(os, "lam_g", it.lam_g);
  detail::write_vector(os, "mu", Eigen::VectorXd::Constant(1, it.mu));
}

/// Parses a solution for a problem with dimensions `d` and `n_slack` slack
/// rows. Throws FormatError on any malformed, missing, duplicate or
/// mis-sized entry.
inline Iterate read_solution(std::istream& is, const OcpDims& d, int n_slack) {
  std::map<std::string, Eigen::VectorXd> entries;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string label, count_tok;
    if (!(ls >> label >> count_tok)) {
      throw FormatError("line " + std::to_string(line_no) +
                        ": expected 'label count values...'");
    }
    const std::string where = "line " + std::to_string(line_no);
    const double count = detail::parse_token(count_tok, where);
    if (count < 0 || count != static_cast<int>(count)) {
      throw FormatError(where + ": bad count");
    }
    Eigen::VectorXd v(static_cast<int>(count));
    std::string tok;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      if (!(ls >> tok)) throw FormatError(where + ": too few values");
      v[i] = detail::parse_token(tok, where);
    }
    if (ls >> tok) throw FormatError(where + ": too many values");
    if (!entries.emplace(label, v).second) {
      throw FormatError(where + ": duplicate entry '" + label + "'");
    }
  }
  if (entries.empty()) throw FormatError("empty solution file");

  auto take = [&](const std::string& label, Eigen::Index size) {
    const auto it = entries.find(label);
    if (it == entries.end()) throw FormatError("missing entry '" + label + "'");
    if (it->second.size() != size) {
      throw FormatError("entry '" + label + "' has " +
                        std::to_string(it->second.size()) + " values, expected " +
                        std::to_string(size));
    }
    Eigen::VectorXd v = std::move(it->second);
    entries.erase(it);
    return v;
  };
  if (take("K", 1)[0] != d.K) throw FormatError("horizon does not match");
  Iterate it(d, n_slack);
  for (int k = 0; k <= d.K; ++k) {
    it.x(k) = take(detail::indexed("x", k), d.nx[k]);
    if (k < d.K) it.u(k) = take(detail::indexed("u", k), d.nu[k]);
  }
  for (int k = 0; k < d.K; ++k) {
    it.pi[k] = take(detail::indexed("pi", k), d.nx[k + 1]);
  }
  for (int k = 0; k <= d.K; ++k) {
    it.lam_h[k] = take(detail::indexed("lam_h", k), d.nh[k]);
  }
  it.s = take("s", n_slack);
  it.z = take("z", n_slack);
  it.lam_g = take("lam_g", n_slack);
  it.mu = take("mu", 1)[0];
  if (!entries.empty()) {
    throw FormatError("unknown entry '" + entries.begin()->first + "'");
  }
  return it;
}

// --- iteration logs ----------------------------------------------------------------

inline constexpr const char* kLogHeader =
    "iter,mu,objective,theta,kkt_total,alpha_primal,alpha_dual,delta,soc_count";

/// Per-iteration log as comma-separated text. No timing columns, so two runs
/// of the same configuration produce identical files.
inline void write_log_csv(std::ostream& os,
                          const std::vector<IterationRecord>& log) {
  os << kLogHeader << '\n';
  for (const auto& r : log) {
    os << r.iter << ',' << detail::format_double(r.mu) << ','
       << detail::format_double(r.objective) << ','
       << detail::format_double(r.theta) << ','
       << detail::format_double(r.kkt_total) << ','
       << detail::format_double(r.alpha_primal) << ','
       << detail::format_double(r.alpha_dual) << ','
       << detail::format_double(r.delta) << ',' << r.soc_count << '\n';
  }
}

/// Parsed log rows, one vector of 9 numbers per iteration.
inline std::vector<std::vector<double>> read_log_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kLogHeader) {
    throw FormatError("log header mismatch");
  }
  std::vector<std::vector<double>> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::istringstream ls(line);
    std::string tok;
    while (std::getline(ls, tok, ',')) {
      row.push_back(detail::parse_token(tok, "log row"));
    }
    if (row.size() != 9) throw FormatError("log row with wrong column count");
    rows.push_back(std::move(row));
  }
  return rows;
}

// --- summary tables ----------------------------------------------------------------

struct SummaryRow {
  std::string problem;
  int iterations = 0;
  double total_ms = 0.0;
  double evaluation_ms = 0.0;
  double linear_algebra_ms = 0.0;
  SolveStatus status = SolveStatus::MaxIterations;
  double kkt = 0.0;
};

inline constexpr const char* kSummaryHeader =
    "problem,iterations,total_ms,evaluation_ms,linear_algebra_ms,status,kkt";

inline std::string format_summary_row(const SummaryRow& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s,%d,%.3f,%.3f,%.3f,%s,%.3e",
                r.problem.c_str(), r.iterations, r.total_ms, r.evaluation_ms,
                r.linear_algebra_ms, std::string(to_string(r.status)).c_str(),
                r.kkt);
  return buf;
}

/// Appends a row, writing the header first when the file is new or empty.
inline void append_summary(const std::filesystem::path& path,
                           const SummaryRow& r) {
  const bool fresh =
      !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  std::ofstream os(path, std::ios::app);
  if (!os) throw ConfigError("cannot write " + path.string());
  if (fresh) os << kSummaryHeader << '\n';
  os << format_summary_row(r) << '\n';
}

}  // namespace ocpik
