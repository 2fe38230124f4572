#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <string_view>

#include <boost/math/tools/roots.hpp>

#include "common.hpp"

namespace robust_scatter {

enum class UKind { Student, Huber };

inline std::string_view to_string(UKind kind) { return kind == UKind::Student ? "student" : "huber"; }

inline UKind parse_ukind(std::string_view s) {
  if (s == "student") return UKind::Student;
  if (s == "huber") return UKind::Huber;
  throw ConfigError("unknown u-function kind '" + std::string(s) + "' (expected student|huber)");
}

namespace detail {

// Inverts an increasing map f with f(0) = 0 by expanding a bracket from `hint`
// and refining with TOMS 748.
template <typename F>
double invert_increasing(F&& f, double y, double hint = 1.0) {
  if (!(y >= 0.0) || !std::isfinite(y)) throw DomainError("cannot invert at non-finite or negative value");
  if (y == 0.0) return 0.0;
  double lo = 0.0;
  double hi = std::max(hint, 1e-300);
  for (int k = 0; f(hi) < y; ++k) {
    lo = hi;
    hi *= 2.0;
    if (k > 2100 || !std::isfinite(hi)) throw DomainError("bracket expansion failed while inverting a monotone map");
  }
  const double f_lo = f(lo) - y;
  const double f_hi = f(hi) - y;
  if (f_lo == 0.0) return lo;
  if (f_hi == 0.0) return hi;
  std::uintmax_t max_iter = 200;
  const auto r = boost::math::tools::toms748_solve([&](double x) { return f(x) - y; }, lo, hi, f_lo, f_hi,
                                                   boost::math::tools::eps_tolerance<double>(50), max_iter);
  return 0.5 * (r.first + r.second);
}

}  // namespace detail

/// Maronna weight function u with shape parameter t > 0.
///
/// Student: u(x) = (1+t)/(t+x).  Huber: u(x) = min{1, (1+t)/(t+x)}, constant on [0, 1].
/// Both have φ(x) = x u(x) strictly increasing with φ_∞ = 1 + t.
class UFunction {
 public:
  UFunction(UKind kind, double t) : kind_(kind), t_(t) {
    if (!(t > 0.0) || !std::isfinite(t)) throw DomainError("u-function shape parameter t must be positive");
  }

  static UFunction student(double t) { return {UKind::Student, t}; }
  static UFunction huber(double t) { return {UKind::Huber, t}; }

  UKind kind() const noexcept { return kind_; }
  double t() const noexcept { return t_; }

  double u(double x) const {
    if (!(x >= 0.0)) throw DomainError("u(x) requires x >= 0");
    const double s = (1.0 + t_) / (t_ + x);
    return kind_ == UKind::Huber ? std::min(1.0, s) : s;
  }

  double phi(double x) const { return x * u(x); }

  double phi_infinity() const noexcept { return 1.0 + t_; }

  double phi_inverse(double y) const {
    if (!(y >= 0.0)) throw DomainError("phi_inverse requires y >= 0");
    if (y >= phi_infinity()) throw DomainError("phi_inverse requires y < phi_infinity = 1 + t");
    return detail::invert_increasing([this](double x) { return phi(x); }, y);
  }

  friend bool operator==(const UFunction&, const UFunction&) = default;

 private:
  UKind kind_;
  double t_;
};

/// Limit regime: c = lim N/n and ε = lim outlier fraction.
struct RegimeParams {
  double c = 0.2;
  double epsilon = 0.0;
};

struct AdmissibilityReport {
  bool pass = false;
  bool regime_ok = false;       // 0 < c < 1 - ε and 0 <= ε < 1
  double lower = 0.0;           // (1 - ε)^{-1}
  double phi_infinity = 0.0;
  double upper = 0.0;           // c^{-1}
  std::string reason;
};

/// Checks (1-ε)^{-1} < φ_∞ < c^{-1} together with 0 < c < 1-ε.
inline AdmissibilityReport validate_admissibility(const UFunction& u, const RegimeParams& r) {
  AdmissibilityReport rep;
  rep.phi_infinity = u.phi_infinity();
  rep.lower = 1.0 / (1.0 - r.epsilon);
  rep.upper = 1.0 / r.c;
  rep.regime_ok = r.epsilon >= 0.0 && r.epsilon < 1.0 && r.c > 0.0 && r.c < 1.0 - r.epsilon;
  const bool bounds_ok = rep.lower < rep.phi_infinity && rep.phi_infinity < rep.upper;
  rep.pass = rep.regime_ok && bounds_ok;
  if (!rep.regime_ok) {
    rep.reason = "growth-rate condition 0 < c < 1 - epsilon violated";
  } else if (!(rep.lower < rep.phi_infinity)) {
    rep.reason = "phi_infinity <= 1/(1 - epsilon): too many outliers for this u";
  } else if (!(rep.phi_infinity < rep.upper)) {
    rep.reason = "phi_infinity >= 1/c";
  }
  return rep;
}

/// The equivalent weight v = u ∘ g^{-1} with g(x) = x / (1 - c φ(x)), bound to a ratio c.
///
/// ψ(x) = x v(x) is increasing and bounded by ψ_∞ = φ_∞ / (1 - c φ_∞).
class EquivalentWeight {
 public:
  EquivalentWeight(UFunction u, double c) : u_(u), c_(c) {
    if (!(c > 0.0)) throw DomainError("ratio c must be positive");
    if (c * u_.phi_infinity() >= 1.0) throw AdmissibilityError("phi_infinity >= 1/c: g is not defined on [0, inf)");
  }

  const UFunction& ufunction() const noexcept { return u_; }
  double c() const noexcept { return c_; }

  double g(double x) const {
    const double den = 1.0 - c_ * u_.phi(x);
    if (!(den > 0.0)) throw DomainError("g(x) requires c*phi(x) < 1");
    return x / den;
  }

  double g_inverse(double y) const {
    if (!(y >= 0.0)) throw DomainError("g_inverse requires y >= 0");
    return detail::invert_increasing([this](double x) { return g(x); }, y, std::max(1.0, y));
  }

  double v(double x) const { return u_.u(g_inverse(x)); }
  double psi(double x) const { return x * v(x); }

  double psi_infinity() const noexcept {
    const double p = u_.phi_infinity();
    return p / (1.0 - c_ * p);
  }

  // ψ = φ(s) / (1 - c φ(s)) with s = g^{-1}(x), so ψ^{-1}(y) = g(φ^{-1}(y / (1 + c y))).
  double psi_inverse(double y) const {
    if (!(y >= 0.0)) throw DomainError("psi_inverse requires y >= 0");
    if (y >= psi_infinity()) throw DomainError("psi_inverse requires y < psi_infinity");
    return g(u_.phi_inverse(y / (1.0 + c_ * y)));
  }

 private:
  UFunction u_;
  double c_;
};

}  // namespace robust_scatter
