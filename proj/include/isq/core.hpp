#pragma once

// Model parameters of the regulated inverse-square Hamiltonian
//
//   H = -d^2/dx^2 + V(x),  V = -g f(x/(b x0)) / (b x0)^2   for 0 < x < b x0
//                          V = alpha / x^2                 for x > b x0
//
// on the half-line, in units hbar = 1, hbar^2/2m = 1.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "isq/error.hpp"
#include "isq/numeric.hpp"

namespace isq {

enum class Mode {
  kConformal,   // -1/4 < alpha < 0, omega real
  kLimitCycle,  // alpha < -1/4, omega imaginary; |omega| stored
};

struct ModelParams {
  double alpha = -3.0 / 16.0;
  double omega = 0.25;
  double nu_plus = 0.75;
  double nu_minus = 0.25;
  double x0 = 1.0;
  Mode mode = Mode::kConformal;
};

/// omega = sqrt(1/4 + alpha), nu_pm = 1/2 +/- omega (roots of nu(nu-1) = alpha).
/// Below alpha = -1/4 the roots are complex; limit-cycle mode keeps |omega|.
inline ModelParams derived_constants(double alpha, double x0 = 1.0) {
  if (!(alpha < 0.0) || !std::isfinite(alpha)) {
    std::ostringstream os;
    os << "derived_constants: alpha must be negative, got " << alpha;
    throw DomainError(os.str());
  }
  if (alpha == -0.25) throw DomainError("derived_constants: alpha = -1/4 gives degenerate orders");
  if (!(x0 > 0.0)) throw DomainError("derived_constants: x0 must be positive");
  ModelParams p;
  p.alpha = alpha;
  p.x0 = x0;
  if (alpha > -0.25) {
    p.mode = Mode::kConformal;
    p.omega = std::sqrt(0.25 + alpha);
    p.nu_plus = 0.5 + p.omega;
    p.nu_minus = 0.5 - p.omega;
  } else {
    p.mode = Mode::kLimitCycle;
    p.omega = std::sqrt(-0.25 - alpha);
    p.nu_plus = p.nu_minus = 0.5;
  }
  return p;
}

inline void require_conformal(const ModelParams& p, const char* who) {
  if (p.mode != Mode::kConformal) {
    std::ostringstream os;
    os << who << ": requires -1/4 < alpha < 0, got alpha = " << p.alpha;
    throw DomainError(os.str());
  }
}

/// sqrt(g) cot(sqrt(g)) continued to all real g (g < 0 gives k coth k).
/// No branch restriction; see gamma_of_g for the checked version.
inline double sqrt_cot(double g) {
  if (g > 0.0) {
    const double q = std::sqrt(g);
    if (q < 1e-4) return 1.0 - g / 3.0 - g * g / 45.0;
    return q / std::tan(q);
  }
  if (g < 0.0) {
    const double k = std::sqrt(-g);
    if (k < 1e-4) return 1.0 - g / 3.0 - g * g / 45.0;
    return k / std::tanh(k);
  }
  return 1.0;
}

/// Square-well coupling gamma(g) = sqrt(g) cot(sqrt(g)) on its first branch
/// 0 < g < pi^2, where it decreases from 1 to -infinity.
inline double gamma_of_g(double g) {
  constexpr double pi2 = std::numbers::pi * std::numbers::pi;
  if (!(g > 0.0 && g < pi2)) {
    std::ostringstream os;
    os << "gamma_of_g: g = " << g << " outside first branch (0, pi^2)";
    throw DomainError(os.str());
  }
  return sqrt_cot(g);
}

/// d gamma / d g on the first branch.
inline double gamma_of_g_prime(double g) {
  const double q = std::sqrt(g);
  const double s = std::sin(q);
  return (std::cos(q) * s - q) / (2.0 * q * s * s);
}

/// Inverse of gamma_of_g on the first branch.
inline double g_of_gamma(double gamma) {
  if (!(gamma < 1.0)) {
    std::ostringstream os;
    os << "g_of_gamma: gamma = " << gamma << " has no preimage on the first branch";
    throw DomainError(os.str());
  }
  constexpr double pi2 = std::numbers::pi * std::numbers::pi;
  return numeric::find_root([gamma](double g) { return sqrt_cot(g) - gamma; }, 1e-300, pi2 * (1 - 1e-15), 60,
                            "g_of_gamma");
}

struct FixedPoints {
  double g_plus = 0.0;   // gamma(g_plus) = nu_plus, UV-attractive
  double g_minus = 0.0;  // gamma(g_minus) = nu_minus, IR-attractive
};

inline FixedPoints fixed_points(const ModelParams& p) {
  require_conformal(p, "fixed_points");
  return {g_of_gamma(p.nu_plus), g_of_gamma(p.nu_minus)};
}

// ---------------------------------------------------------------------------
// Regulator profiles

enum class RegulatorKind { kSquareWell, kLinearWell, kGeneric };

inline std::string to_string(RegulatorKind k) {
  switch (k) {
    case RegulatorKind::kSquareWell: return "square";
    case RegulatorKind::kLinearWell: return "linear";
    case RegulatorKind::kGeneric: return "generic";
  }
  return "unknown";
}

inline RegulatorKind regulator_kind_from_string(const std::string& s) {
  if (s == "square" || s == "SquareWell") return RegulatorKind::kSquareWell;
  if (s == "linear" || s == "LinearWell") return RegulatorKind::kLinearWell;
  if (s == "generic" || s == "Generic") return RegulatorKind::kGeneric;
  throw DomainError("unknown regulator kind '" + s + "'");
}

/// Tabulated profile on [0, 1] with monotone (Fritsch-Carlson) cubic
/// interpolation.
class TabulatedProfile {
 public:
  TabulatedProfile() = default;

  TabulatedProfile(std::vector<double> s, std::vector<double> f) : s_(std::move(s)), f_(std::move(f)) {
    if (s_.size() != f_.size() || s_.size() < 2) throw DomainError("profile: need >= 2 matching nodes");
    if (s_.front() != 0.0 || s_.back() != 1.0) throw DomainError("profile: nodes must span [0, 1]");
    for (std::size_t i = 1; i < s_.size(); ++i) {
      if (!(s_[i] > s_[i - 1])) throw DomainError("profile: nodes must be strictly increasing");
    }
    for (double v : f_) {
      if (!std::isfinite(v)) throw DomainError("profile: values must be finite (bounded profile)");
    }
    build_slopes();
  }

  double operator()(double s) const {
    if (s_.empty()) return 1.0;
    s = std::clamp(s, 0.0, 1.0);
    const auto it = std::upper_bound(s_.begin(), s_.end(), s);
    std::size_t i = std::min<std::size_t>(std::max<std::ptrdiff_t>(it - s_.begin() - 1, 0), s_.size() - 2);
    const double h = s_[i + 1] - s_[i];
    const double t = (s - s_[i]) / h;
    const double t2 = t * t;
    const double t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * f_[i] + (t3 - 2 * t2 + t) * h * m_[i] + (-2 * t3 + 3 * t2) * f_[i + 1] +
           (t3 - t2) * h * m_[i + 1];
  }

  double max_abs() const {
    double m = 0.0;
    for (double v : f_) m = std::max(m, std::abs(v));
    return m;
  }

  const std::vector<double>& nodes() const { return s_; }
  const std::vector<double>& values() const { return f_; }

 private:
  void build_slopes() {
    const std::size_t n = s_.size();
    std::vector<double> d(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) d[i] = (f_[i + 1] - f_[i]) / (s_[i + 1] - s_[i]);
    m_.assign(n, 0.0);
    m_[0] = d[0];
    m_[n - 1] = d[n - 2];
    for (std::size_t i = 1; i + 1 < n; ++i) m_[i] = (d[i - 1] * d[i] <= 0.0) ? 0.0 : 0.5 * (d[i - 1] + d[i]);
    for (std::size_t i = 0; i + 1 < n; ++i) {
      if (d[i] == 0.0) {
        m_[i] = m_[i + 1] = 0.0;
        continue;
      }
      const double a = m_[i] / d[i];
      const double b = m_[i + 1] / d[i];
      const double r = a * a + b * b;
      if (r > 9.0) {
        const double tau = 3.0 / std::sqrt(r);
        m_[i] = tau * a * d[i];
        m_[i + 1] = tau * b * d[i];
      }
    }
  }

  std::vector<double> s_;
  std::vector<double> f_;
  std::vector<double> m_;
};

/// Short-distance regulator of width b x0 and dimensionless depth g.
struct Regulator {
  RegulatorKind kind = RegulatorKind::kSquareWell;
  double b = 1.0;
  double g = 0.0;
  TabulatedProfile table;  // kGeneric only

  static Regulator square(double b, double g) { return {RegulatorKind::kSquareWell, b, g, {}}; }
  static Regulator linear(double g) { return {RegulatorKind::kLinearWell, 1.0, g, {}}; }
  static Regulator generic(double b, double g, TabulatedProfile t) {
    return {RegulatorKind::kGeneric, b, g, std::move(t)};
  }

  /// Profile f(s) on 0 <= s <= 1, s = x / (b x0).
  double shape(double s) const {
    switch (kind) {
      case RegulatorKind::kSquareWell: return 1.0;
      case RegulatorKind::kLinearWell: return s;
      case RegulatorKind::kGeneric: return table(s);
    }
    return 1.0;
  }

  double shape_max() const {
    switch (kind) {
      case RegulatorKind::kSquareWell:
      case RegulatorKind::kLinearWell: return 1.0;
      case RegulatorKind::kGeneric: return table.max_abs();
    }
    return 1.0;
  }

  Regulator with_g(double new_g) const {
    Regulator r = *this;
    r.g = new_g;
    return r;
  }

  Regulator with_b(double new_b) const {
    Regulator r = *this;
    r.b = new_b;
    return r;
  }

  void validate() const {
    if (!(b > 0.0) || !std::isfinite(b)) throw DomainError("regulator: b must be positive");
    if (!(g >= 0.0) || !std::isfinite(g)) throw DomainError("regulator: g must be non-negative");
    if (kind == RegulatorKind::kLinearWell && b != 1.0) throw DomainError("regulator: linear well has b = 1");
    if (kind == RegulatorKind::kGeneric && table.nodes().empty())
      throw DomainError("regulator: generic profile needs a table");
  }
};

/// V(x) for the regulated potential; +infinity for x <= 0.
inline double potential(const ModelParams& p, const Regulator& r, double x) {
  if (x <= 0.0) return std::numeric_limits<double>::infinity();
  const double cut = r.b * p.x0;
  if (x < cut) return -r.g * r.shape(x / cut) / (cut * cut);
  return p.alpha / (x * x);
}

}  // namespace isq
