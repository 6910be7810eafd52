#pragma once

#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <string>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "ocpik/errors.hpp"
#include "ocpik/options.hpp"

namespace ocpik {

/// Settings of one bench run.
///
///   [problem]  name = hanging_chain_2d, plus numeric builder parameters
///   [solver]   any SolverOptions key (tol, mu_init, max_iter, ...)
///   [output]   dir = results
///   [run]      reps = 3, seed = 1
struct RunConfig {
  std::string problem;
  std::map<std::string, double> problem_params;
  std::map<std::string, std::string> solver;
  std::string out_dir = ".";
  int reps = 1;
  unsigned seed = 1;

  SolverOptions options() const { return options_from_key_values(solver); }
};

namespace detail {

inline void check_keys(const boost::property_tree::ptree& section,
                       const std::string& name,
                       std::initializer_list<const char*> allowed) {
  for (const auto& [key, child] : section) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError("unknown key '" + key + "' in [" + name + "]");
  }
}

}  // namespace detail

inline void validate(const RunConfig& c) {
  if (c.reps < 1) throw ConfigError("reps must be at least 1");
  (void)c.options();
}

/// Parses INI text. Unknown sections and keys, malformed numbers and parse
/// failures throw ConfigError.
inline RunConfig parse_run_config(std::istream& is) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  RunConfig c;
  for (const auto& [section, body] : tree) {
    if (!body.data().empty()) {
      throw ConfigError("key '" + section + "' outside of any section");
    }
    if (section == "problem") {
      for (const auto& [key, child] : body) {
        if (key == "name") {
          c.problem = child.data();
        } else {
          c.problem_params[key] = detail::parse_double(key, child.data());
        }
      }
    } else if (section == "solver") {
      for (const auto& [key, child] : body) c.solver[key] = child.data();
    } else if (section == "output") {
      detail::check_keys(body, section, {"dir"});
      c.out_dir = body.get<std::string>("dir", c.out_dir);
    } else if (section == "run") {
      detail::check_keys(body, section, {"reps", "seed"});
      if (auto v = body.get_optional<std::string>("reps")) {
        c.reps = detail::parse_int("reps", *v);
      }
      if (auto v = body.get_optional<std::string>("seed")) {
        const int s = detail::parse_int("seed", *v);
        if (s < 0) throw ConfigError("seed must be nonnegative");
        c.seed = static_cast<unsigned>(s);
      }
    } else {
      throw ConfigError("unknown section [" + section + "]");
    }
  }
  validate(c);
  return c;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open " + path.string());
  return parse_run_config(is);
}

}  // namespace ocpik
