#pragma once

// Renormalization-group flow of the square-well coupling gamma = sqrt(g) cot sqrt(g)
// under changes of the cutoff b, with fixed points gamma = nu_+-.

#include <cmath>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "isq/core.hpp"
#include "isq/error.hpp"
#include "isq/numeric.hpp"
#include "isq/spectrum.hpp"

namespace isq {

/// b d gamma / db.
inline double beta(const ModelParams& p, double gamma) { return -(gamma - p.nu_minus) * (gamma - p.nu_plus); }

inline double beta_prime(const ModelParams& p, double gamma) { return p.nu_minus + p.nu_plus - 2.0 * gamma; }

/// Beta function in the g frame: b dg/db = beta(gamma(g)) / gamma'(g).
inline double beta_g(const ModelParams& p, double g) { return beta(p, gamma_of_g(g)) / gamma_of_g_prime(g); }

enum class Stability { kIRAttractive, kUVAttractive };

inline std::string to_string(Stability s) {
  return s == Stability::kIRAttractive ? "IR-attractive" : "UV-attractive";
}

struct FixedPointInfo {
  double gamma_star = 0.0;
  double g_star = 0.0;
  double y = 0.0;  // RG eigenvalue beta'(gamma_star) = 1 - 2 gamma_star
  Stability stability = Stability::kIRAttractive;
  int sign = -1;  // +1 for nu_+, -1 for nu_-
};

inline FixedPointInfo fixed_point_info(const ModelParams& p, int sign) {
  require_conformal(p, "fixed_point_info");
  if (sign != 1 && sign != -1) throw DomainError("fixed_point_info: sign must be +1 or -1");
  FixedPointInfo f;
  f.sign = sign;
  f.gamma_star = sign > 0 ? p.nu_plus : p.nu_minus;
  f.g_star = g_of_gamma(f.gamma_star);
  f.y = beta_prime(p, f.gamma_star);
  f.stability = sign > 0 ? Stability::kUVAttractive : Stability::kIRAttractive;
  return f;
}

/// Reduced coupling: u = gamma - nu_- near the IR point, u = nu_+ - gamma
/// near the UV point.
inline double reduced_coupling(const ModelParams& p, int sign, double gamma) {
  return sign > 0 ? p.nu_plus - gamma : gamma - p.nu_minus;
}

inline double gamma_from_reduced(const ModelParams& p, int sign, double u) {
  return sign > 0 ? p.nu_plus - u : p.nu_minus + u;
}

struct FlowState {
  double b = 1.0;
  double gamma = 0.0;
  double g = std::numeric_limits<double>::quiet_NaN();  // NaN when gamma has no preimage on the branch
  double u = 0.0;                                       // gamma - nu_- (IR convention)
  bool exited_branch = false;
  std::string note;
};

/// Closed-form solution of b d gamma/db = beta(gamma): the cross ratio
/// (gamma - nu_-)/(gamma - nu_+) scales as b^{2w}.
inline FlowState flow(const ModelParams& p, double gamma0, double b0, double b1) {
  require_conformal(p, "flow");
  if (!(b0 > 0.0 && b1 > 0.0)) throw DomainError("flow: b0 and b1 must be positive");
  FlowState s;
  s.b = b1;
  if (gamma0 == p.nu_minus || gamma0 == p.nu_plus || b0 == b1) {
    s.gamma = gamma0;
  } else {
    const double R = (gamma0 - p.nu_minus) / (gamma0 - p.nu_plus) * std::pow(b1 / b0, 2.0 * p.omega);
    if (R == 1.0) {
      s.gamma = std::numeric_limits<double>::infinity();
    } else {
      s.gamma = (p.nu_minus - R * p.nu_plus) / (1.0 - R);
    }
  }
  s.u = s.gamma - p.nu_minus;
  if (!(gamma0 >= p.nu_minus && gamma0 <= p.nu_plus)) {
    s.exited_branch = true;
    s.note = "gamma0 outside [nu_-, nu_+]";
  }
  if (std::isfinite(s.gamma) && s.gamma < 1.0) {
    s.g = g_of_gamma(s.gamma);
  } else {
    s.exited_branch = true;
    if (!s.note.empty()) s.note += "; ";
    s.note += "gamma has no preimage on the first branch";
  }
  return s;
}

/// One infinitesimal-step map u' = u (1 - eps)^{y}: shrinks near the IR
/// point (y = 2w), grows near the UV point (y = -2w).
inline double scaling_variable_step(double u, double epsilon, const FixedPointInfo& fp) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw DomainError("scaling_variable_step: need 0 < epsilon < 1");
  return u * std::pow(1.0 - epsilon, fp.y);
}

// ---------------------------------------------------------------------------
// Contours of constant C+/C-

struct ContourPoint {
  double xi = 0.0;
  double g = 0.0;
  double ratio = 0.0;
};

struct Contour {
  double ratio_target = 0.0;
  std::vector<ContourPoint> points;
  std::vector<std::string> notes;  // omitted xi values and why
};

namespace rgflow_detail {

/// g with sqrt(g + xi^2) cot sqrt(g + xi^2) = gamma, or nullopt off branch.
inline std::optional<double> g_for_inner_gamma(double gamma, double xi) {
  if (!(gamma < 1.0)) return std::nullopt;
  const double g = g_of_gamma(gamma) - xi * xi;
  if (!(g > 0.0)) return std::nullopt;
  return g;
}

}  // namespace rgflow_detail

/// For each xi solves C+/C-(g, xi) = target for g between the C- = 0 and
/// C+ = 0 curves (which tend to g_+ and g_- as xi -> 0).
inline Contour contour_constant_ratio(const ModelParams& p, double ratio_target, const std::vector<double>& xi_grid) {
  require_conformal(p, "contour_constant_ratio");
  if (!(ratio_target > 0.0)) throw DomainError("contour_constant_ratio: ratio_target must be positive");
  Contour c;
  c.ratio_target = ratio_target;
  for (double xi : xi_grid) {
    std::ostringstream why;
    if (!(xi > 0.0)) {
      why << "xi = " << xi << ": not positive";
      c.notes.push_back(why.str());
      continue;
    }
    const double jp = specfun::bessel_j(p.omega, xi).value;
    const double jm = specfun::bessel_j(-p.omega, xi).value;
    if (!(jp > 0.0 && jm > 0.0)) {
      why << "xi = " << xi << ": beyond the first zero of J_{+-w}";
      c.notes.push_back(why.str());
      continue;
    }
    // C- = 0 where D = xi J_w'/J_w, C+ = 0 where D = xi J_{-w}'/J_{-w}.
    const double dp = xi * specfun::bessel_j_prime(p.omega, xi).value / jp;
    const double dm = xi * specfun::bessel_j_prime(-p.omega, xi).value / jm;
    const auto g_hi_pole = rgflow_detail::g_for_inner_gamma(dp + 0.5, xi);
    const auto g_zero = rgflow_detail::g_for_inner_gamma(dm + 0.5, xi);
    if (!g_hi_pole || !g_zero) {
      why << "xi = " << xi << ": C+ = 0 or C- = 0 curve leaves the first branch";
      c.notes.push_back(why.str());
      continue;
    }
    const double lo = *g_hi_pole, hi = *g_zero;
    auto f = [&](double g) { return std::log(ratio_explicit(p, g, xi)) - std::log(ratio_target); };
    const double span = hi - lo;
    double a = lo + 1e-13 * span, bnd = hi - 1e-13 * span;
    try {
      const double g = numeric::find_root(f, a, bnd, 52, "contour_constant_ratio");
      c.points.push_back({xi, g, ratio_explicit(p, g, xi)});
    } catch (const NumericalError& e) {
      why << "xi = " << xi << ": " << e.what();
      c.notes.push_back(why.str());
    }
  }
  return c;
}

// ---------------------------------------------------------------------------
// alpha < -1/4: limit cycle

/// Phase phi of the normalizable exterior solution at small radius,
/// s psi'/psi ~ 1/2 - |w| tan(|w| log s + phi), obtained by integrating
/// psi'' = (alpha/r^2 + 1) psi inward from a large radius.
inline double limit_cycle_phase(const ModelParams& p, double r_far = 60.0, double r_near = 1e-7) {
  if (p.mode != Mode::kLimitCycle) throw DomainError("limit_cycle_phase: requires alpha < -1/4");
  const double a = p.alpha;
  // sqrt(r) K_mu(r) ~ e^{-r} (1 + (4mu^2-1)/(8r) + (4mu^2-1)(4mu^2-9)/(128 r^2)), 4mu^2 - 1 = 4 alpha
  const double c1 = 4 * a / 8.0;
  const double c2 = 4 * a * (4 * a - 8) / 128.0;
  const double c3 = 4 * a * (4 * a - 8) * (4 * a - 24) / 3072.0;
  const double R = r_far;
  const double s = 1 + c1 / R + c2 / (R * R) + c3 / (R * R * R);
  const double ds = -s - c1 / (R * R) - 2 * c2 / (R * R * R) - 3 * c3 / (R * R * R * R);
  // (psi, r psi') in t = log r, so the near-origin oscillation is uniform in t
  auto rhs = [a](double t, const numeric::OdeState& y, numeric::OdeState& dy) {
    const double r = std::exp(t);
    dy[0] = y[1];
    dy[1] = y[1] + (a + r * r) * y[0];
  };
  // psi and r psi' at R, scaled by e^{R}
  numeric::OdeState y0{s, R * ds};
  const auto y = numeric::integrate_ode(rhs, y0, std::log(R), std::log(r_near), 1e-12, 1e-300);
  const double w = p.omega;
  const double sl = y[1] / y[0];  // r psi'/psi
  const double tangent = (0.5 - sl) / w;
  double phi = std::atan(tangent) - w * std::log(r_near);
  phi = std::fmod(phi, std::numbers::pi);
  if (phi < 0) phi += std::numbers::pi;
  return phi;
}

struct LimitCycleState {
  double abs_omega = 0.0;
  double b = 1.0;
  double eps = 0.0;
  double phi = 0.0;
  double rhs = 0.0;  // 1/2 - |w| tan(|w| log b + |w| log(eps)/2 + phi)
  std::vector<double> g_branches;
};

/// Roots g of sqrt(g) cot sqrt(g) = 1/2 - |w| tan(|w| log b + |w|/2 log eps + phi),
/// one per cotangent branch (n pi)^2 < g < ((n+1) pi)^2, n < n_branches.
inline LimitCycleState limit_cycle(const ModelParams& p, double b, double eps, int n_branches = 3,
                                   std::optional<double> phi = std::nullopt) {
  if (p.mode != Mode::kLimitCycle) throw DomainError("limit_cycle: requires alpha < -1/4");
  if (!(b > 0.0)) throw DomainError("limit_cycle: b must be positive");
  if (!(eps > 0.0)) throw DomainError("limit_cycle: eps must be positive");
  if (n_branches < 1) throw DomainError("limit_cycle: need at least one branch");
  LimitCycleState s;
  s.abs_omega = p.omega;
  s.b = b;
  s.eps = eps;
  s.phi = phi ? *phi : limit_cycle_phase(p);
  const double w = p.omega;
  s.rhs = 0.5 - w * std::tan(w * std::log(b) + 0.5 * w * std::log(eps) + s.phi);
  constexpr double pi = std::numbers::pi;
  for (int n = 0; n < n_branches; ++n) {
    // on each branch sqrt(g) cot sqrt(g) runs monotonically from +inf (1 on the
    // first branch) down to -inf
    const double q_lo = n * pi, q_hi = (n + 1) * pi;
    if (n == 0 && s.rhs >= 1.0) continue;
    auto f = [&](double q) { return q / std::tan(q) - s.rhs; };
    const double a = n == 0 ? 1e-9 : q_lo + 1e-12 * pi;
    const double c = q_hi - 1e-12 * pi;
    if (f(a) * f(c) > 0) continue;
    const double q = numeric::find_root(f, a, c, 62, "limit_cycle");
    s.g_branches.push_back(q * q);
  }
  if (s.g_branches.empty()) throw NumericalError("limit_cycle: no root found on any branch");
  return s;
}

}  // namespace isq
