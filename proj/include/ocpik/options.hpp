#pragma once

#include <charconv>
#include <map>
#include <string>

#include "ocpik/errors.hpp"
#include "ocpik/riccati.hpp"

namespace ocpik {

struct SolverOptions {
  double tol = 1e-8;
  double mu_init = 1e2;
  double gamma_theta = 1e-12;
  double gamma_phi = 1e-8;

  // Monotone barrier decrease.
  double kappa_mu = 0.2;
  double theta_mu = 1.5;
  double kappa_eps = 10.0;
  double tau_min = 0.99;

  // Filter line search.
  double eta_phi = 1e-4;  // Armijo
  double s_theta = 1.1;
  double s_phi = 2.3;
  double switching_delta = 1.0;
  double backtrack = 0.5;
  double gamma_alpha = 0.05;
  int max_soc = 4;
  double kappa_soc = 0.99;

  // Hessian regularization.
  double delta_0 = 1e-4;
  double delta_growth = 8.0;
  double delta_decrease = 3.0;
  double delta_max = 1e14;
  double delta_c = 1e-8;  // dual regularization on rank-deficient equalities

  // Initialization and safeguards.
  double bound_relax = 1e-2;
  double z_min = 1e-4;
  double z_max = 1e4;
  double kappa_sigma = 1e10;

  int max_iter = 1000;
  int threads = 1;
  RiccatiOptions linear;

  /// Throws DomainError when an option is out of range.
  void validate() const {
    auto require = [](bool ok, const char* what) {
      if (!ok) throw DomainError(std::string("invalid option: ") + what);
    };
    require(tol > 0, "tol > 0");
    require(mu_init > 0, "mu_init > 0");
    require(kappa_mu > 0 && kappa_mu < 1, "0 < kappa_mu < 1");
    require(theta_mu > 1 && theta_mu < 2, "1 < theta_mu < 2");
    require(gamma_theta > 0 && gamma_theta < 1, "0 < gamma_theta < 1");
    require(gamma_phi > 0 && gamma_phi < 1, "0 < gamma_phi < 1");
    require(kappa_eps > 0, "kappa_eps > 0");
    require(tau_min > 0 && tau_min < 1, "0 < tau_min < 1");
    require(eta_phi > 0 && eta_phi < 0.5, "0 < eta_phi < 0.5");
    require(backtrack > 0 && backtrack < 1, "0 < backtrack < 1");
    require(max_soc >= 0, "max_soc >= 0");
    require(delta_0 > 0 && delta_growth > 1 && delta_max >= delta_0,
            "regularization schedule");
    require(delta_c > 0, "delta_c > 0");
    require(bound_relax > 0, "bound_relax > 0");
    require(z_min > 0 && z_max >= z_min, "0 < z_min <= z_max");
    require(kappa_sigma >= 1, "kappa_sigma >= 1");
    require(max_iter >= 0, "max_iter >= 0");
    require(threads >= 1, "threads >= 1");
  }
};

namespace detail {

inline double parse_double(const std::string& key, const std::string& text) {
  double v = 0.0;
  const char* end = text.data() + text.size();
  const auto r = std::from_chars(text.data(), end, v);
  if (r.ec != std::errc() || r.ptr != end) {
    throw ConfigError("option '" + key + "' expects a number, got '" + text +
                      "'");
  }
  return v;
}

inline int parse_int(const std::string& key, const std::string& text) {
  int v = 0;
  const char* end = text.data() + text.size();
  const auto r = std::from_chars(text.data(), end, v);
  if (r.ec != std::errc() || r.ptr != end) {
    throw ConfigError("option '" + key + "' expects an integer, got '" +
                      text + "'");
  }
  return v;
}

}  // namespace detail

/// Applies key-value overrides on top of `base`. Unknown keys and malformed
/// values throw ConfigError; out-of-range values throw DomainError.
inline SolverOptions options_from_key_values(
    const std::map<std::string, std::string>& kv, SolverOptions base = {}) {
  std::map<std::string, double*> reals = {
      {"tol", &base.tol},
      {"mu_init", &base.mu_init},
      {"gamma_theta", &base.gamma_theta},
      {"gamma_phi", &base.gamma_phi},
      {"kappa_mu", &base.kappa_mu},
      {"theta_mu", &base.theta_mu},
      {"kappa_eps", &base.kappa_eps},
      {"tau_min", &base.tau_min},
      {"eta_phi", &base.eta_phi},
      {"s_theta", &base.s_theta},
      {"s_phi", &base.s_phi},
      {"switching_delta", &base.switching_delta},
      {"backtrack", &base.backtrack},
      {"gamma_alpha", &base.gamma_alpha},
      {"kappa_soc", &base.kappa_soc},
      {"delta_0", &base.delta_0},
      {"delta_growth", &base.delta_growth},
      {"delta_decrease", &base.delta_decrease},
      {"delta_max", &base.delta_max},
      {"delta_c", &base.delta_c},
      {"bound_relax", &base.bound_relax},
      {"z_min", &base.z_min},
      {"z_max", &base.z_max},
      {"kappa_sigma", &base.kappa_sigma},
      {"pivot_tol", &base.linear.pivot_tol},
      {"rank_tol", &base.linear.rank_tol},
      {"refine_tol", &base.linear.refine_tol},
  };
  std::map<std::string, int*> ints = {
      {"max_iter", &base.max_iter},
      {"max_soc", &base.max_soc},
      {"threads", &base.threads},
      {"max_refine", &base.linear.max_refine},
  };
  for (const auto& [key, text] : kv) {
    if (auto it = reals.find(key); it != reals.end()) {
      *it->second = detail::parse_double(key, text);
    } else if (auto jt = ints.find(key); jt != ints.end()) {
      *jt->second = detail::parse_int(key, text);
    } else {
      throw ConfigError("unknown solver option '" + key + "'");
    }
  }
  base.validate();
  return base;
}

}  // namespace ocpik
