#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace ocpik {

struct FilterEntry {
  double theta = 0.0;
  double phi = 0.0;
};

/// Set of (constraint violation, barrier objective) pairs. A point is blocked
/// by an entry when it fails to improve on either of them by a margin.
class Filter {
 public:
  Filter(double gamma_theta, double gamma_phi)
      : gamma_theta_(gamma_theta), gamma_phi_(gamma_phi) {}

  bool blocks(double theta, double phi) const {
    return std::any_of(entries_.begin(), entries_.end(),
                       [&](const FilterEntry& e) {
                         return theta >= (1.0 - gamma_theta_) * e.theta &&
                                phi >= e.phi - gamma_phi_ * e.theta;
                       });
  }

  /// Adds (theta, phi) and drops the entries it dominates.
  void add(double theta, double phi) {
    std::erase_if(entries_, [&](const FilterEntry& e) {
      return e.theta >= theta && e.phi >= phi;
    });
    entries_.push_back({theta, phi});
  }

  void clear() { entries_.clear(); }
  const std::vector<FilterEntry>& entries() const { return entries_; }

 private:
  double gamma_theta_;
  double gamma_phi_;
  std::vector<FilterEntry> entries_;
};

/// Step acceptance parameters; theta_min and theta_max are fixed from the
/// initial constraint violation.
struct FilterRules {
  double gamma_theta = 1e-12;
  double gamma_phi = 1e-8;
  double eta_phi = 1e-4;
  double s_theta = 1.1;
  double s_phi = 2.3;
  double switching_delta = 1.0;
  double theta_min = 1e-4;
  double theta_max = 1e4;
};

enum class FilterVerdict { Reject, AcceptArmijo, AcceptSufficientDecrease };

inline bool is_accept(FilterVerdict v) { return v != FilterVerdict::Reject; }

/// Switching condition: the step promises enough decrease of the barrier
/// objective relative to the current infeasibility.
inline bool switching_condition(const FilterRules& r, double theta_cur,
                                double grad_phi_dot_d, double alpha) {
  return grad_phi_dot_d < 0.0 &&
         alpha * std::pow(-grad_phi_dot_d, r.s_phi) >
             r.switching_delta * std::pow(theta_cur, r.s_theta);
}

/// Decides on a trial point. AcceptArmijo steps leave the filter unchanged;
/// after AcceptSufficientDecrease the caller augments the filter with the
/// current pair.
inline FilterVerdict filter_accept(const Filter& filter,
                                   const FilterRules& r, double theta_new,
                                   double phi_new, double theta_cur,
                                   double phi_cur, double grad_phi_dot_d,
                                   double alpha) {
  if (!std::isfinite(theta_new) || !std::isfinite(phi_new)) {
    return FilterVerdict::Reject;
  }
  if (theta_new > r.theta_max) return FilterVerdict::Reject;
  if (filter.blocks(theta_new, phi_new)) return FilterVerdict::Reject;
  // Objective comparisons tolerate rounding of phi itself.
  const double slack = 10.0 * std::numeric_limits<double>::epsilon() *
                       std::abs(phi_cur);
  if (theta_cur <= r.theta_min &&
      switching_condition(r, theta_cur, grad_phi_dot_d, alpha)) {
    return phi_new <= phi_cur + r.eta_phi * alpha * grad_phi_dot_d + slack
               ? FilterVerdict::AcceptArmijo
               : FilterVerdict::Reject;
  }
  if (theta_new <= (1.0 - r.gamma_theta) * theta_cur ||
      phi_new <= phi_cur - r.gamma_phi * theta_cur + slack) {
    return FilterVerdict::AcceptSufficientDecrease;
  }
  return FilterVerdict::Reject;
}

/// Smallest step worth trying before the line search gives up.
inline double alpha_min(const FilterRules& r, double gamma_alpha,
                        double theta_cur, double grad_phi_dot_d) {
  double a = r.gamma_theta;
  if (grad_phi_dot_d < 0.0) {
    a = std::min(a, r.gamma_phi * theta_cur / -grad_phi_dot_d);
    if (theta_cur <= r.theta_min) {
      a = std::min(a, r.switching_delta * std::pow(theta_cur, r.s_theta) /
                          std::pow(-grad_phi_dot_d, r.s_phi));
    }
  }
  return gamma_alpha * a;
}

}  // namespace ocpik
