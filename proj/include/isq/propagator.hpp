#pragma once

// Imaginary-time propagator G(x, -it; y) = <x| exp(-tH) |y> of the
// square-well regulated Hamiltonian for x, y > b x0, by quadrature over the
// continuum in k = E^{1/2}:
//
//   G = int_0^inf dk e^{-t k^2} N(g, kb x0) phi_k(x) phi_k(y),
//   phi_k(x) = a+ sqrt(kx) J_w(kx) + a- sqrt(kx) J_{-w}(kx)
//
// with N = (2/pi) B(g, xi) for the spectral normalization.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "isq/core.hpp"
#include "isq/error.hpp"
#include "isq/numeric.hpp"
#include "isq/parallel.hpp"
#include "isq/rgflow.hpp"
#include "isq/spectrum.hpp"

namespace isq {

enum class Normalization {
  kSpectral,  // B(g, xi) from the far-field amplitude: the true <x|e^{-tH}|y>
  kFrozen,    // B held at its fixed-point form (see frozen_normalization)
};

struct PropagatorOptions {
  Normalization norm = Normalization::kSpectral;
  int sign = +1;           // fixed point the frozen normalization refers to
  double rel_tol = 1e-12;  // quadrature target
  double tail = 60.0;      // k_max^2 t: e^{-tail} is the neglected weight
};

struct PropagatorSample {
  double x = 0.0, y = 0.0, t = 0.0;
  double b = 0.0, g = 0.0;
  double value = 0.0;
  double quad_error = 0.0;
  Normalization norm = Normalization::kSpectral;
};

/// Factor by which the leading small-xi coefficient C_{+-}/A at depth g
/// differs from its value at the fixed point g_{+-}:
///   kappa(g) = sin(sqrt g)(gamma - nu_-+) / (sin(sqrt g_+-)(nu_+- - nu_-+)).
/// The frozen propagator divides phi_k by kappa, so that with B constant its
/// g-dependence enters only through the subleading coefficient.
inline double frozen_normalization(const ModelParams& p, int sign, double g) {
  const double gs = sign > 0 ? fixed_points(p).g_plus : fixed_points(p).g_minus;
  const double other = sign > 0 ? p.nu_minus : p.nu_plus;
  const double self = sign > 0 ? p.nu_plus : p.nu_minus;
  return std::sin(std::sqrt(g)) * (sqrt_cot(g) - other) / (std::sin(std::sqrt(gs)) * (self - other));
}

namespace propagator_detail {

inline double basis(double nu, double z) { return std::sqrt(z) * specfun::bessel_j(nu, z).value; }

template <class F>
numeric::Integral panel_quadrature(F&& f, double k_max, double scale, double rel_tol) {
  // first panel holds the k -> 0 non-analytic behaviour; the rest are smooth
  // and at most mildly oscillatory
  const double width = std::min(k_max, std::numbers::pi / scale);
  numeric::Integral total = numeric::integrate_singular(f, 0.0, width, rel_tol);
  double a = width;
  while (a < k_max) {
    const double b = std::min(k_max, a + width);
    const auto part = numeric::integrate(f, a, b, rel_tol, 8);
    total.value += part.value;
    total.abs_error += part.abs_error;
    a = b;
  }
  return total;
}

}  // namespace propagator_detail

/// G_{b,g}(x, -it; y) by quadrature over the continuum. Requires
/// g_+ <= g <= g_- so that no bound state contributes.
inline PropagatorSample propagator_quadrature(const ModelParams& p, const Regulator& r, double x, double y, double t,
                                              const PropagatorOptions& opt = {}) {
  require_conformal(p, "propagator_quadrature");
  if (r.kind != RegulatorKind::kSquareWell) throw DomainError("propagator_quadrature: square well only");
  r.validate();
  const double L = r.b * p.x0;
  if (!(x > L && y > L)) {
    std::ostringstream os;
    os << "propagator_quadrature: need x, y > b x0 = " << L << ", got x = " << x << ", y = " << y;
    throw DomainError(os.str());
  }
  if (!(t > 0.0)) throw DomainError("propagator_quadrature: t must be positive");
  if (bound_state(p, r)) throw DomainError("propagator_quadrature: g above the binding threshold");
  const double kappa = opt.norm == Normalization::kFrozen ? frozen_normalization(p, opt.sign, r.g) : 1.0;
  const double w = p.omega;
  auto f = [&](double k) {
    if (k < 1e-150) return 0.0;
    const auto c = continuum_coefficients(p, r, k * k);
    const double fx = c.a_plus * propagator_detail::basis(w, k * x) + c.a_minus * propagator_detail::basis(-w, k * x);
    const double fy = c.a_plus * propagator_detail::basis(w, k * y) + c.a_minus * propagator_detail::basis(-w, k * y);
    const double n = opt.norm == Normalization::kSpectral ? c.B : 1.0 / (kappa * kappa);
    return 2.0 / std::numbers::pi * n * std::exp(-t * k * k) * fx * fy;
  };
  const double k_max = std::sqrt(opt.tail / t);
  const auto q = propagator_detail::panel_quadrature(f, k_max, std::max(x, y), opt.rel_tol);
  PropagatorSample s;
  s.x = x;
  s.y = y;
  s.t = t;
  s.b = r.b;
  s.g = r.g;
  s.value = q.value;
  s.quad_error = q.abs_error + std::exp(-opt.tail) * std::abs(q.value);
  s.norm = opt.norm;
  if (!std::isfinite(s.value)) throw NumericalError("propagator_quadrature: non-finite result");
  return s;
}

/// Closed form at b = 0, g = g_+- .
inline double fixed_point_propagator(const ModelParams& p, int sign, double x, double y, double t) {
  require_conformal(p, "fixed_point_propagator");
  if (!(x > 0 && y > 0 && t > 0)) throw DomainError("fixed_point_propagator: x, y, t must be positive");
  const double z = x * y / (2 * t);
  const double nu = sign > 0 ? p.omega : -p.omega;
  return std::sqrt(x * y) / (2 * t) * std::exp(-(x - y) * (x - y) / (4 * t)) *
         specfun::bessel_i_scaled(nu, z).value;
}

/// Long-time form of the fixed-point propagator.
inline double fixed_point_long_time(const ModelParams& p, int sign, double x, double y, double t) {
  const double nu_pm = sign > 0 ? p.nu_plus : p.nu_minus;
  const double w = sign > 0 ? p.omega : -p.omega;
  return 1.0 / (std::pow(2.0, 1 + 2 * w) * specfun::gamma(1 + w).value) / std::sqrt(t) * std::pow(x * y / t, nu_pm);
}

// ---------------------------------------------------------------------------
// Homogeneous laws

struct LawCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  double residual = 0.0;   // |lhs/rhs - 1|
  double quad_error = 0.0; // combined relative quadrature error
  bool regime_warning = false;
  std::string note;
};

namespace propagator_detail {

inline LawCheck make_check(const PropagatorSample& a, double scale_a, const PropagatorSample& b, double scale_b) {
  LawCheck c;
  c.lhs = scale_a * a.value;
  c.rhs = scale_b * b.value;
  c.residual = std::abs(c.lhs / c.rhs - 1.0);
  c.quad_error = a.quad_error / std::abs(a.value) + b.quad_error / std::abs(b.value);
  return c;
}

inline void flag_regime(const ModelParams& p, LawCheck& c, double b, double u, double t, double tail) {
  std::ostringstream os;
  if (u > 0.05 * 2 * p.omega) {
    c.regime_warning = true;
    os << "u = " << u << " not small; ";
  }
  if (b * std::sqrt(tail / t) > 0.1) {
    c.regime_warning = true;
    os << "b sqrt(M) = " << b * std::sqrt(tail / t) << " > 0.1";
  }
  c.note = os.str();
}

}  // namespace propagator_detail

/// G_{b,g}(lx, -i l^2 t; ly) = l^{-1} G_{b/l,g}(x, -it; y), for either
/// normalization.
inline LawCheck check_exact_law(const ModelParams& p, const Regulator& r, double x, double y, double t, double lambda,
                                const PropagatorOptions& opt = {}) {
  if (!(lambda >= 1.0)) throw DomainError("check_exact_law: lambda must be >= 1");
  const auto a = propagator_quadrature(p, r, lambda * x, lambda * y, lambda * lambda * t, opt);
  const auto b = propagator_quadrature(p, r.with_b(r.b / lambda), x, y, t, opt);
  return propagator_detail::make_check(a, 1.0, b, 1.0 / lambda);
}

/// Depth g for reduced coupling u about the fixed point of the given sign
/// (u = nu_+ - gamma for +, u = gamma - nu_- for -).
inline double depth_from_reduced(const ModelParams& p, int sign, double u) {
  return g_of_gamma(gamma_from_reduced(p, sign, u));
}

inline PropagatorOptions frozen_options(int sign, double rel_tol = 1e-12) {
  PropagatorOptions o;
  o.norm = Normalization::kFrozen;
  o.sign = sign;
  o.rel_tol = rel_tol;
  return o;
}

/// G_{b,u}(lx, -i l^2 t; ly) ~ l^{2 nu_+- - 1} G_{b,u'}(x, -it; y), u' = l^{-+2w} u.
inline LawCheck check_asymptotic_law(const ModelParams& p, double b, double u, int sign, double x, double y, double t,
                                     double lambda, PropagatorOptions opt = frozen_options(+1)) {
  if (!(lambda >= 1.0)) throw DomainError("check_asymptotic_law: lambda must be >= 1");
  opt.sign = sign;
  const double nu = sign > 0 ? p.nu_plus : p.nu_minus;
  const double u1 = u * std::pow(lambda, -sign * 2 * p.omega);
  const auto lhs = propagator_quadrature(p, Regulator::square(b, depth_from_reduced(p, sign, u)), lambda * x,
                                         lambda * y, lambda * lambda * t, opt);
  const auto rhs = propagator_quadrature(p, Regulator::square(b, depth_from_reduced(p, sign, u1)), x, y, t, opt);
  auto c = propagator_detail::make_check(lhs, 1.0, rhs, std::pow(lambda, 2 * nu - 1));
  propagator_detail::flag_regime(p, c, b, u, lambda * lambda * t, opt.tail);
  return c;
}

/// G(b, u) ~ l^{-2 nu_+-} G(b/l, u l^{+-2w}) at fixed x, y, t.
inline LawCheck check_scaling_relation(const ModelParams& p, double b, double u, int sign, double lambda, double x,
                                       double y, double t, PropagatorOptions opt = frozen_options(+1)) {
  if (!(lambda >= 1.0)) throw DomainError("check_scaling_relation: lambda must be >= 1");
  opt.sign = sign;
  const double nu = sign > 0 ? p.nu_plus : p.nu_minus;
  const double u1 = u * std::pow(lambda, sign * 2 * p.omega);
  const auto lhs = propagator_quadrature(p, Regulator::square(b, depth_from_reduced(p, sign, u)), x, y, t, opt);
  const auto rhs =
      propagator_quadrature(p, Regulator::square(b / lambda, depth_from_reduced(p, sign, u1)), x, y, t, opt);
  auto c = propagator_detail::make_check(lhs, 1.0, rhs, std::pow(lambda, -2 * nu));
  propagator_detail::flag_regime(p, c, b, u1, t, opt.tail);
  return c;
}

struct CallanSymanzikResult {
  double residual = 0.0;  // [b d_b -+ 2w u d_u + 2 nu] G / (2 nu G)
  double b_log_derivative = 0.0;
  double u_log_derivative = 0.0;
  double G = 0.0;
};

/// Residual of [b d/db -+ 2w u d/du + 2 nu_+-] G = 0, with central differences
/// in log b and log u (relative step h).
inline CallanSymanzikResult callan_symanzik_residual(const ModelParams& p, double b, double u, int sign, double x,
                                                     double y, double t, double h = 1e-3,
                                                     PropagatorOptions opt = frozen_options(+1)) {
  opt.sign = sign;
  const double nu = sign > 0 ? p.nu_plus : p.nu_minus;
  auto G = [&](double bb, double uu) {
    return propagator_quadrature(p, Regulator::square(bb, depth_from_reduced(p, sign, uu)), x, y, t, opt).value;
  };
  CallanSymanzikResult r;
  r.G = G(b, u);
  r.b_log_derivative = (std::log(G(b * std::exp(h), u)) - std::log(G(b * std::exp(-h), u))) / (2 * h);
  r.u_log_derivative = (std::log(G(b, u * std::exp(h))) - std::log(G(b, u * std::exp(-h)))) / (2 * h);
  r.residual = (r.b_log_derivative - sign * 2 * p.omega * r.u_log_derivative + 2 * nu) / (2 * nu);
  return r;
}

// ---------------------------------------------------------------------------
// Scaling collapse near the UV point

struct CollapsePoint {
  double b = 0.0, u = 0.0;
  double z = 0.0;    // b (u/u0)^{1/2w}
  double Phi = 0.0;  // G (u/u0)^{-(1 + 1/2w)}
  double G = 0.0;
  double quad_error = 0.0;
};

struct ScalingFunctionTable {
  double u0 = 0.0;
  std::vector<CollapsePoint> points;  // sorted by z
  // per-factor fit sqrt(Phi) = A z^{-p} + C z^{-q}
  double A = 0.0, C = 0.0, p_exp = 0.0, q_exp = 0.0;
  double c = 0.0;       // C / A, the relative coefficient
  double spread = 0.0;  // max |Phi / Phi_fit - 1|
  double row_spread = 0.0;  // max mismatch between u rows at common z
  bool regime_warning = false;
};

namespace propagator_detail {

struct TwoPowerFit {
  double A, C, p, q, rms;
};

/// Fits y = A z^{-p} + C z^{-q} by variable projection: for fixed (p, q) the
/// amplitudes follow from weighted linear least squares; (p, q) are refined
/// by Gauss-Newton on the projected residual.
inline TwoPowerFit fit_two_powers(const std::vector<double>& z, const std::vector<double>& y, double p0, double q0) {
  const std::size_t n = z.size();
  auto solve_linear = [&](double p, double q, Eigen::Vector2d& amp) {
    Eigen::MatrixXd X(n, 2);
    Eigen::VectorXd v(n);
    for (std::size_t i = 0; i < n; ++i) {
      X(i, 0) = std::pow(z[i], -p) / y[i];
      X(i, 1) = std::pow(z[i], -q) / y[i];
      v(i) = 1.0;
    }
    amp = X.colPivHouseholderQr().solve(v);
    return Eigen::VectorXd(X * amp - v);
  };
  double p = p0, q = q0;
  Eigen::Vector2d amp;
  Eigen::VectorXd res = solve_linear(p, q, amp);
  for (int it = 0; it < 100; ++it) {
    const double h = 1e-6;
    Eigen::Vector2d tmp;
    Eigen::MatrixXd J(n, 2);
    J.col(0) = (solve_linear(p + h, q, tmp) - solve_linear(p - h, q, tmp)) / (2 * h);
    J.col(1) = (solve_linear(p, q + h, tmp) - solve_linear(p, q - h, tmp)) / (2 * h);
    const Eigen::Vector2d step = J.colPivHouseholderQr().solve(-res);
    double scale = 1.0;
    bool improved = false;
    for (int ls = 0; ls < 30; ++ls) {
      const Eigen::VectorXd trial = solve_linear(p + scale * step(0), q + scale * step(1), tmp);
      if (trial.squaredNorm() < res.squaredNorm()) {
        p += scale * step(0);
        q += scale * step(1);
        res = trial;
        improved = true;
        break;
      }
      scale *= 0.5;
    }
    if (!improved || step.norm() < 1e-13) break;
  }
  solve_linear(p, q, amp);
  return {amp(0), amp(1), p, q, std::sqrt(res.squaredNorm() / double(n))};
}

}  // namespace propagator_detail

/// Rescales G(b, u) near the UV point onto z = b (u/u0)^{1/2w} and fits the
/// per-factor scaling function z^{-nu_+} + c z^{-nu_-}.
inline ScalingFunctionTable scaling_collapse(const ModelParams& p, const std::vector<double>& b_grid,
                                             const std::vector<double>& u_grid, double u0, double x, double y,
                                             double t, PropagatorOptions opt = frozen_options(+1, 1e-13)) {
  require_conformal(p, "scaling_collapse");
  if (!(u0 > 0.0)) throw DomainError("scaling_collapse: u0 must be positive");
  opt.sign = +1;
  const double w = p.omega;
  std::vector<std::pair<double, double>> jobs;
  for (double u : u_grid)
    for (double b : b_grid) jobs.emplace_back(b, u);
  std::vector<CollapsePoint> pts(jobs.size());
  parallel_for(jobs.size(), [&](std::size_t i) {
    const auto [b, u] = jobs[i];
    if (!(u > 0.0)) throw DomainError("scaling_collapse: u must be positive");
    const auto s = propagator_quadrature(p, Regulator::square(b, depth_from_reduced(p, +1, u)), x, y, t, opt);
    CollapsePoint c;
    c.b = b;
    c.u = u;
    c.z = b * std::pow(u / u0, 0.5 / w);
    c.G = s.value;
    c.Phi = s.value * std::pow(u / u0, -(1 + 0.5 / w));
    c.quad_error = s.quad_error / std::abs(s.value);
    pts[i] = c;
  });
  ScalingFunctionTable tab;
  tab.u0 = u0;
  std::vector<double> zs, ys;
  for (const auto& c : pts) {
    zs.push_back(c.z);
    ys.push_back(std::sqrt(c.Phi));
    if (c.u > 0.05 * 2 * w || c.b * std::sqrt(opt.tail / t) > 0.1) tab.regime_warning = true;
  }
  const auto fit = propagator_detail::fit_two_powers(zs, ys, p.nu_plus, p.nu_minus);
  tab.A = fit.A;
  tab.C = fit.C;
  tab.p_exp = fit.p;
  tab.q_exp = fit.q;
  tab.c = fit.C / fit.A;
  for (const auto& c : pts) {
    const double model = std::pow(fit.A * std::pow(c.z, -fit.p) + fit.C * std::pow(c.z, -fit.q), 2);
    tab.spread = std::max(tab.spread, std::abs(c.Phi / model - 1.0));
  }
  // rows of constant u compared at common z by log-log interpolation
  for (double ua : u_grid) {
    for (double ub : u_grid) {
      if (ua >= ub) continue;
      std::vector<const CollapsePoint*> ra, rb;
      for (const auto& c : pts) {
        if (c.u == ua) ra.push_back(&c);
        if (c.u == ub) rb.push_back(&c);
      }
      auto by_z = [](const CollapsePoint* l, const CollapsePoint* r) { return l->z < r->z; };
      std::sort(ra.begin(), ra.end(), by_z);
      std::sort(rb.begin(), rb.end(), by_z);
      for (const auto* c : ra) {
        for (std::size_t j = 0; j + 1 < rb.size(); ++j) {
          if (c->z < rb[j]->z || c->z > rb[j + 1]->z) continue;
          const double s = std::log(c->z / rb[j]->z) / std::log(rb[j + 1]->z / rb[j]->z);
          const double interp = std::exp((1 - s) * std::log(rb[j]->Phi) + s * std::log(rb[j + 1]->Phi));
          tab.row_spread = std::max(tab.row_spread, std::abs(c->Phi / interp - 1.0));
        }
      }
    }
  }
  std::sort(pts.begin(), pts.end(), [](const auto& l, const auto& r) { return l.z < r.z; });
  tab.points = std::move(pts);
  return tab;
}

}  // namespace isq
