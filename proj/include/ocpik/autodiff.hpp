#pragma once

#include <array>
#include <cmath>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "ocpik/errors.hpp"

/// Forward-mode automatic differentiation.
///
/// Dual carries one tangent and yields first derivatives in n sweeps.
/// HyperDual carries two independent first-order channels plus the mixed
/// second-order channel, so seeding (e_i, e_j) yields ∂²f/∂x_i∂x_j exactly.
///
/// Functions to differentiate are written once, generically over the scalar
/// type, and must only use the primitives overloaded here. abs/min/max are
/// deliberately absent: calling them on a Dual fails to compile.
namespace ocpik::ad {

struct Dual {
  double value = 0.0;
  double deriv = 0.0;

  constexpr Dual() = default;
  constexpr Dual(double v) : value(v) {}  // NOLINT: implicit by design of AD
  constexpr Dual(double v, double d) : value(v), deriv(d) {}

  Dual& operator+=(const Dual& o) {
    value += o.value;
    deriv += o.deriv;
    return *this;
  }
  Dual& operator-=(const Dual& o) {
    value -= o.value;
    deriv -= o.deriv;
    return *this;
  }
  Dual& operator*=(const Dual& o) {
    deriv = deriv * o.value + value * o.deriv;
    value *= o.value;
    return *this;
  }
  Dual& operator/=(const Dual& o) {
    const double inv = 1.0 / o.value;
    deriv = (deriv - value * inv * o.deriv) * inv;
    value *= inv;
    return *this;
  }
};

inline Dual operator-(const Dual& a) { return {-a.value, -a.deriv}; }
inline Dual operator+(Dual a, const Dual& b) { return a += b; }
inline Dual operator-(Dual a, const Dual& b) { return a -= b; }
inline Dual operator*(Dual a, const Dual& b) { return a *= b; }
inline Dual operator/(Dual a, const Dual& b) { return a /= b; }
inline Dual operator+(Dual a, double b) { return {a.value + b, a.deriv}; }
inline Dual operator+(double a, const Dual& b) { return {a + b.value, b.deriv}; }
inline Dual operator-(Dual a, double b) { return {a.value - b, a.deriv}; }
inline Dual operator-(double a, const Dual& b) {
  return {a - b.value, -b.deriv};
}
inline Dual operator*(const Dual& a, double b) {
  return {a.value * b, a.deriv * b};
}
inline Dual operator*(double a, const Dual& b) {
  return {a * b.value, a * b.deriv};
}
inline Dual operator/(const Dual& a, double b) {
  return {a.value / b, a.deriv / b};
}
inline Dual operator/(double a, const Dual& b) {
  const double inv = 1.0 / b.value;
  return {a * inv, -a * inv * inv * b.deriv};
}

namespace detail {
inline Dual apply(const Dual& x, double f, double fp) {
  return {f, fp * x.deriv};
}
}  // namespace detail

inline Dual sin(const Dual& x) {
  return detail::apply(x, std::sin(x.value), std::cos(x.value));
}
inline Dual cos(const Dual& x) {
  return detail::apply(x, std::cos(x.value), -std::sin(x.value));
}
inline Dual tan(const Dual& x) {
  const double t = std::tan(x.value);
  return detail::apply(x, t, 1.0 + t * t);
}
inline Dual exp(const Dual& x) {
  const double e = std::exp(x.value);
  return detail::apply(x, e, e);
}
inline Dual log(const Dual& x) {
  return detail::apply(x, std::log(x.value), 1.0 / x.value);
}
inline Dual sqrt(const Dual& x) {
  const double r = std::sqrt(x.value);
  return detail::apply(x, r, 0.5 / r);
}
inline Dual pow(const Dual& x, double p) {
  return detail::apply(x, std::pow(x.value, p),
                       p * std::pow(x.value, p - 1.0));
}
inline Dual pow(const Dual& x, const Dual& y) { return exp(y * log(x)); }
inline Dual pow(double x, const Dual& y) { return exp(y * std::log(x)); }

/// Value with two first-order channels and their mixed product channel.
struct HyperDual {
  double value = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
  double d12 = 0.0;

  constexpr HyperDual() = default;
  constexpr HyperDual(double v) : value(v) {}  // NOLINT
  constexpr HyperDual(double v, double a, double b, double ab)
      : value(v), d1(a), d2(b), d12(ab) {}

  HyperDual& operator+=(const HyperDual& o) {
    value += o.value;
    d1 += o.d1;
    d2 += o.d2;
    d12 += o.d12;
    return *this;
  }
  HyperDual& operator-=(const HyperDual& o) {
    value -= o.value;
    d1 -= o.d1;
    d2 -= o.d2;
    d12 -= o.d12;
    return *this;
  }
  HyperDual& operator*=(const HyperDual& o) {
    d12 = value * o.d12 + d1 * o.d2 + d2 * o.d1 + d12 * o.value;
    d1 = value * o.d1 + d1 * o.value;
    d2 = value * o.d2 + d2 * o.value;
    value *= o.value;
    return *this;
  }
  HyperDual& operator/=(const HyperDual& o);
};

namespace detail {
// f(x) expanded to second order: f + f'·(d1,d2) + (f'·d12 + f''·d1·d2).
inline HyperDual apply(const HyperDual& x, double f, double fp, double fpp) {
  return {f, fp * x.d1, fp * x.d2, fp * x.d12 + fpp * x.d1 * x.d2};
}
inline HyperDual inverse(const HyperDual& x) {
  const double inv = 1.0 / x.value;
  return apply(x, inv, -inv * inv, 2.0 * inv * inv * inv);
}
}  // namespace detail

inline HyperDual& HyperDual::operator/=(const HyperDual& o) {
  return *this *= detail::inverse(o);
}

inline HyperDual operator-(const HyperDual& a) {
  return {-a.value, -a.d1, -a.d2, -a.d12};
}
inline HyperDual operator+(HyperDual a, const HyperDual& b) { return a += b; }
inline HyperDual operator-(HyperDual a, const HyperDual& b) { return a -= b; }
inline HyperDual operator*(HyperDual a, const HyperDual& b) { return a *= b; }
inline HyperDual operator/(HyperDual a, const HyperDual& b) { return a /= b; }
inline HyperDual operator+(HyperDual a, double b) {
  a.value += b;
  return a;
}
inline HyperDual operator+(double a, HyperDual b) {
  b.value += a;
  return b;
}
inline HyperDual operator-(HyperDual a, double b) {
  a.value -= b;
  return a;
}
inline HyperDual operator-(double a, const HyperDual& b) {
  return {a - b.value, -b.d1, -b.d2, -b.d12};
}
inline HyperDual operator*(const HyperDual& a, double b) {
  return {a.value * b, a.d1 * b, a.d2 * b, a.d12 * b};
}
inline HyperDual operator*(double a, const HyperDual& b) { return b * a; }
inline HyperDual operator/(const HyperDual& a, double b) {
  return a * (1.0 / b);
}
inline HyperDual operator/(double a, const HyperDual& b) {
  return a * detail::inverse(b);
}

inline HyperDual sin(const HyperDual& x) {
  const double s = std::sin(x.value);
  return detail::apply(x, s, std::cos(x.value), -s);
}
inline HyperDual cos(const HyperDual& x) {
  const double c = std::cos(x.value);
  return detail::apply(x, c, -std::sin(x.value), -c);
}
inline HyperDual tan(const HyperDual& x) {
  const double t = std::tan(x.value);
  const double sec2 = 1.0 + t * t;
  return detail::apply(x, t, sec2, 2.0 * t * sec2);
}
inline HyperDual exp(const HyperDual& x) {
  const double e = std::exp(x.value);
  return detail::apply(x, e, e, e);
}
inline HyperDual log(const HyperDual& x) {
  const double inv = 1.0 / x.value;
  return detail::apply(x, std::log(x.value), inv, -inv * inv);
}
inline HyperDual sqrt(const HyperDual& x) {
  const double r = std::sqrt(x.value);
  return detail::apply(x, r, 0.5 / r, -0.25 / (r * x.value));
}
inline HyperDual pow(const HyperDual& x, double p) {
  return detail::apply(x, std::pow(x.value, p),
                       p * std::pow(x.value, p - 1.0),
                       p * (p - 1.0) * std::pow(x.value, p - 2.0));
}
inline HyperDual pow(const HyperDual& x, const HyperDual& y) {
  return exp(y * log(x));
}
inline HyperDual pow(double x, const HyperDual& y) {
  return exp(y * std::log(x));
}

// Comparisons look at the value only so generic code may branch.
#define OCPIK_AD_COMPARE(T, op)                                              \
  inline bool operator op(const T& a, const T& b) {                          \
    return a.value op b.value;                                               \
  }                                                                          \
  inline bool operator op(const T& a, double b) { return a.value op b; }     \
  inline bool operator op(double a, const T& b) { return a op b.value; }
OCPIK_AD_COMPARE(Dual, <)
OCPIK_AD_COMPARE(Dual, >)
OCPIK_AD_COMPARE(Dual, <=)
OCPIK_AD_COMPARE(Dual, >=)
OCPIK_AD_COMPARE(HyperDual, <)
OCPIK_AD_COMPARE(HyperDual, >)
OCPIK_AD_COMPARE(HyperDual, <=)
OCPIK_AD_COMPARE(HyperDual, >=)
#undef OCPIK_AD_COMPARE

inline double value_of(double x) { return x; }
inline double value_of(const Dual& x) { return x.value; }
inline double value_of(const HyperDual& x) { return x.value; }

/// N Dual sweeps sharing the value: lane k carries the tangent of seed k.
template <int N>
struct DualBatch {
  double value = 0.0;
  std::array<double, N> deriv{};

  constexpr DualBatch() = default;
  constexpr DualBatch(double v) : value(v) {}  // NOLINT

  DualBatch& operator+=(const DualBatch& o) {
    value += o.value;
    for (int k = 0; k < N; ++k) deriv[k] += o.deriv[k];
    return *this;
  }
  DualBatch& operator-=(const DualBatch& o) {
    value -= o.value;
    for (int k = 0; k < N; ++k) deriv[k] -= o.deriv[k];
    return *this;
  }
  DualBatch& operator*=(const DualBatch& o) {
    for (int k = 0; k < N; ++k) {
      deriv[k] = deriv[k] * o.value + value * o.deriv[k];
    }
    value *= o.value;
    return *this;
  }
  DualBatch& operator/=(const DualBatch& o) {
    const double inv = 1.0 / o.value;
    for (int k = 0; k < N; ++k) {
      deriv[k] = (deriv[k] - value * inv * o.deriv[k]) * inv;
    }
    value *= inv;
    return *this;
  }

  friend DualBatch operator-(DualBatch a) {
    a.value = -a.value;
    for (int k = 0; k < N; ++k) a.deriv[k] = -a.deriv[k];
    return a;
  }
  friend DualBatch operator+(DualBatch a, const DualBatch& b) { return a += b; }
  friend DualBatch operator-(DualBatch a, const DualBatch& b) { return a -= b; }
  friend DualBatch operator*(DualBatch a, const DualBatch& b) { return a *= b; }
  friend DualBatch operator/(DualBatch a, const DualBatch& b) { return a /= b; }
  friend DualBatch operator+(DualBatch a, double b) {
    a.value += b;
    return a;
  }
  friend DualBatch operator+(double a, DualBatch b) {
    b.value += a;
    return b;
  }
  friend DualBatch operator-(DualBatch a, double b) {
    a.value -= b;
    return a;
  }
  friend DualBatch operator-(double a, const DualBatch& b) { return -b + a; }
  friend DualBatch operator*(DualBatch a, double b) {
    a.value *= b;
    for (int k = 0; k < N; ++k) a.deriv[k] *= b;
    return a;
  }
  friend DualBatch operator*(double a, const DualBatch& b) { return b * a; }
  friend DualBatch operator/(const DualBatch& a, double b) {
    return a * (1.0 / b);
  }
  friend DualBatch operator/(double a, const DualBatch& b) {
    const double inv = 1.0 / b.value;
    return apply(b, a * inv, -a * inv * inv);
  }

  friend bool operator<(const DualBatch& a, const DualBatch& b) {
    return a.value < b.value;
  }
  friend bool operator>(const DualBatch& a, const DualBatch& b) {
    return a.value > b.value;
  }
  friend bool operator<=(const DualBatch& a, const DualBatch& b) {
    return a.value <= b.value;
  }
  friend bool operator>=(const DualBatch& a, const DualBatch& b) {
    return a.value >= b.value;
  }

  friend DualBatch sin(const DualBatch& x) {
    return apply(x, std::sin(x.value), std::cos(x.value));
  }
  friend DualBatch cos(const DualBatch& x) {
    return apply(x, std::cos(x.value), -std::sin(x.value));
  }
  friend DualBatch tan(const DualBatch& x) {
    const double t = std::tan(x.value);
    return apply(x, t, 1.0 + t * t);
  }
  friend DualBatch exp(const DualBatch& x) {
    const double e = std::exp(x.value);
    return apply(x, e, e);
  }
  friend DualBatch log(const DualBatch& x) {
    return apply(x, std::log(x.value), 1.0 / x.value);
  }
  friend DualBatch sqrt(const DualBatch& x) {
    const double r = std::sqrt(x.value);
    return apply(x, r, 0.5 / r);
  }
  friend DualBatch pow(const DualBatch& x, double p) {
    return apply(x, std::pow(x.value, p), p * std::pow(x.value, p - 1.0));
  }
  friend DualBatch pow(const DualBatch& x, const DualBatch& y) {
    return exp(y * log(x));
  }
  friend DualBatch pow(double x, const DualBatch& y) {
    return exp(y * std::log(x));
  }
  friend double value_of(const DualBatch& x) { return x.value; }

 private:
  static DualBatch apply(const DualBatch& x, double f, double fp) {
    DualBatch r(f);
    for (int k = 0; k < N; ++k) r.deriv[k] = fp * x.deriv[k];
    return r;
  }
};

/// N HyperDual sweeps sharing the value and the first channel: lane k seeds
/// (e_i, e_j[k]) and carries its own d2 and d12. Results equal N separate
/// HyperDual evaluations; the value and transcendental calls are done once.
template <int N>
struct HyperDualBatch {
  double value = 0.0;
  double d1 = 0.0;
  std::array<double, N> d2{};
  std::array<double, N> d12{};

  constexpr HyperDualBatch() = default;
  constexpr HyperDualBatch(double v) : value(v) {}  // NOLINT

  HyperDualBatch& operator+=(const HyperDualBatch& o) {
    value += o.value;
    d1 += o.d1;
    for (int k = 0; k < N; ++k) {
      d2[k] += o.d2[k];
      d12[k] += o.d12[k];
    }
    return *this;
  }
  HyperDualBatch& operator-=(const HyperDualBatch& o) {
    value -= o.value;
    d1 -= o.d1;
    for (int k = 0; k < N; ++k) {
      d2[k] -= o.d2[k];
      d12[k] -= o.d12[k];
    }
    return *this;
  }
  HyperDualBatch& operator*=(const HyperDualBatch& o) {
    for (int k = 0; k < N; ++k) {
      d12[k] = value * o.d12[k] + d1 * o.d2[k] + d2[k] * o.d1 +
               d12[k] * o.value;
      d2[k] = value * o.d2[k] + d2[k] * o.value;
    }
    d1 = value * o.d1 + d1 * o.value;
    value *= o.value;
    return *this;
  }
  HyperDualBatch& operator/=(const HyperDualBatch& o) {
    return *this *= inverse(o);
  }

  friend HyperDualBatch operator-(HyperDualBatch a) {
    a.value = -a.value;
    a.d1 = -a.d1;
    for (int k = 0; k < N; ++k) {
      a.d2[k] = -a.d2[k];
      a.d12[k] = -a.d12[k];
    }
    return a;
  }
  friend HyperDualBatch operator+(HyperDualBatch a, const HyperDualBatch& b) {
    return a += b;
  }
  friend HyperDualBatch operator-(HyperDualBatch a, const HyperDualBatch& b) {
    return a -= b;
  }
  friend HyperDualBatch operator*(HyperDualBatch a, const HyperDualBatch& b) {
    return a *= b;
  }
  friend HyperDualBatch operator/(HyperDualBatch a, const HyperDualBatch& b) {
    return a /= b;
  }
  friend HyperDualBatch operator+(HyperDualBatch a, double b) {
    a.value += b;
    return a;
  }
  friend HyperDualBatch operator+(double a, HyperDualBatch b) {
    b.value += a;
    return b;
  }
  friend HyperDualBatch operator-(HyperDualBatch a, double b) {
    a.value -= b;
    return a;
  }
  friend HyperDualBatch operator-(double a, const HyperDualBatch& b) {
    return -b + a;
  }
  friend HyperDualBatch operator*(HyperDualBatch a, double b) {
    a.value *= b;
    a.d1 *= b;
    for (int k = 0; k < N; ++k) {
      a.d2[k] *= b;
      a.d12[k] *= b;
    }
    return a;
  }
  friend HyperDualBatch operator*(double a, const HyperDualBatch& b) {
    return b * a;
  }
  friend HyperDualBatch operator/(const HyperDualBatch& a, double b) {
    return a * (1.0 / b);
  }
  friend HyperDualBatch operator/(double a, const HyperDualBatch& b) {
    return a * inverse(b);
  }

  friend bool operator<(const HyperDualBatch& a, const HyperDualBatch& b) {
    return a.value < b.value;
  }
  friend bool operator>(const HyperDualBatch& a, const HyperDualBatch& b) {
    return a.value > b.value;
  }
  friend bool operator<=(const HyperDualBatch& a, const HyperDualBatch& b) {
    return a.value <= b.value;
  }
  friend bool operator>=(const HyperDualBatch& a, const HyperDualBatch& b) {
    return a.value >= b.value;
  }

  friend HyperDualBatch sin(const HyperDualBatch& x) {
    const double s = std::sin(x.value);
    return apply(x, s, std::cos(x.value), -s);
  }
  friend HyperDualBatch cos(const HyperDualBatch& x) {
    const double c = std::cos(x.value);
    return apply(x, c, -std::sin(x.value), -c);
  }
  friend HyperDualBatch tan(const HyperDualBatch& x) {
    const double t = std::tan(x.value);
    const double sec2 = 1.0 + t * t;
    return apply(x, t, sec2, 2.0 * t * sec2);
  }
  friend HyperDualBatch exp(const HyperDualBatch& x) {
    const double e = std::exp(x.value);
    return apply(x, e, e, e);
  }
  friend HyperDualBatch log(const HyperDualBatch& x) {
    const double inv = 1.0 / x.value;
    return apply(x, std::log(x.value), inv, -inv * inv);
  }
  friend HyperDualBatch sqrt(const HyperDualBatch& x) {
    const double r = std::sqrt(x.value);
    return apply(x, r, 0.5 / r, -0.25 / (r * x.value));
  }
  friend HyperDualBatch pow(const HyperDualBatch& x, double p) {
    return apply(x, std::pow(x.value, p), p * std::pow(x.value, p - 1.0),
                 p * (p - 1.0) * std::pow(x.value, p - 2.0));
  }
  friend HyperDualBatch pow(const HyperDualBatch& x, const HyperDualBatch& y) {
    return exp(y * log(x));
  }
  friend HyperDualBatch pow(double x, const HyperDualBatch& y) {
    return exp(y * std::log(x));
  }
  friend double value_of(const HyperDualBatch& x) { return x.value; }

 private:
  static HyperDualBatch apply(const HyperDualBatch& x, double f, double fp,
                              double fpp) {
    HyperDualBatch r(f);
    r.d1 = fp * x.d1;
    const double c = fpp * x.d1;
    for (int k = 0; k < N; ++k) {
      r.d2[k] = fp * x.d2[k];
      r.d12[k] = fp * x.d12[k] + c * x.d2[k];
    }
    return r;
  }
  static HyperDualBatch inverse(const HyperDualBatch& x) {
    const double inv = 1.0 / x.value;
    return apply(x, inv, -inv * inv, 2.0 * inv * inv * inv);
  }
};

namespace detail {
inline void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) {
    throw EvaluationError(std::string("non-finite value in ") + what);
  }
}
}  // namespace detail

/// Gradient of a scalar function f(std::span<const T>) -> T at x, one Dual
/// sweep per coordinate.
template <class F>
Eigen::VectorXd gradient(F&& f, const Eigen::VectorXd& x) {
  const auto n = x.size();
  std::vector<Dual> xd(x.data(), x.data() + n);
  Eigen::VectorXd g(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    xd[i].deriv = 1.0;
    const Dual y = f(std::span<const Dual>(xd));
    xd[i].deriv = 0.0;
    detail::require_finite(y.value, "gradient");
    detail::require_finite(y.deriv, "gradient");
    g[i] = y.deriv;
  }
  return g;
}

/// Jacobian (m×n) of F(std::span<const T> x, std::span<T> out).
template <class F>
Eigen::MatrixXd jacobian(F&& fun, Eigen::Index m, const Eigen::VectorXd& x) {
  const auto n = x.size();
  std::vector<Dual> xd(x.data(), x.data() + n);
  std::vector<Dual> out(m);
  Eigen::MatrixXd J(m, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    xd[j].deriv = 1.0;
    fun(std::span<const Dual>(xd), std::span<Dual>(out));
    xd[j].deriv = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      detail::require_finite(out[i].value, "jacobian");
      detail::require_finite(out[i].deriv, "jacobian");
      J(i, j) = out[i].deriv;
    }
  }
  return J;
}

/// Hessian of a scalar function; n(n+1)/2 HyperDual sweeps, the upper
/// triangle is mirrored so the result is bitwise symmetric.
template <class F>
Eigen::MatrixXd hessian(F&& f, const Eigen::VectorXd& x) {
  const auto n = x.size();
  std::vector<HyperDual> xh(x.data(), x.data() + n);
  Eigen::MatrixXd H(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    xh[i].d1 = 1.0;
    for (Eigen::Index j = i; j < n; ++j) {
      xh[j].d2 = 1.0;
      const HyperDual y = f(std::span<const HyperDual>(xh));
      xh[j].d2 = 0.0;
      detail::require_finite(y.d12, "hessian");
      H(i, j) = y.d12;
      H(j, i) = y.d12;
    }
    xh[i].d1 = 0.0;
  }
  return H;
}

}  // namespace ocpik::ad
