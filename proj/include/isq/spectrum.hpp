#pragma once

// Bound and continuum eigenstates of the regulated Hamiltonian.
//
// Lengths inside the well are measured in units of L = b x0 (s = x / L), so
// xi = L |E|^{1/2}. The exterior solutions are
//   E < 0:  C sqrt(s) K_w(xi s)
//   E > 0:  a+ sqrt(xi s) J_w(xi s) + a- sqrt(xi s) J_{-w}(xi s)

#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <sstream>
#include <vector>

#include "isq/core.hpp"
#include "isq/error.hpp"
#include "isq/numeric.hpp"
#include "isq/parallel.hpp"
#include "isq/specfun.hpp"

namespace isq {

struct BoundState {
  double energy = 0.0;  // 1/length^2
  double xi = 0.0;      // b x0 |E|^{1/2}
  double A = 0.0;       // interior amplitude (normalized, 1/length^{1/2})
  double C = 0.0;       // exterior amplitude (normalized, 1/length^{1/2})
  double norm = 0.0;    // integral of the unnormalized |psi|^2 (A = 1), length units
  double matching_residual = 0.0;  // |L_in - L_out| / max(1, |L_out|)
};

namespace spectrum_detail {

constexpr double kXiFloor = 1e-150;

/// s psi'/psi of the decaying exterior solution at s = 1.
inline double outer_log_derivative(double omega, double xi) {
  return 0.5 + specfun::bessel_k_log_derivative(omega, xi);
}

/// int_xi^inf r K_w(r)^2 dr in closed form.
inline double k_square_moment(double omega, double xi) {
  const double km = specfun::bessel_k(omega - 1.0, xi).value;
  const double kp = specfun::bessel_k(omega + 1.0, xi).value;
  const double k0 = specfun::bessel_k(omega, xi).value;
  return 0.5 * xi * xi * (km * kp - k0 * k0);
}

/// int_xi^inf r^2 K_w(r)^2 dr by quadrature.
inline double k_square_first_moment(double omega, double xi) {
  auto f = [omega](double r) {
    const double k = specfun::bessel_k(omega, r).value;
    return r * r * k * k;
  };
  double total = 0.0;
  if (xi < 1.0) total += numeric::integrate_singular(f, xi, 1.0, 1e-12).value;
  const double from = std::max(xi, 1.0);
  total += numeric::integrate_to_infinity([&](double r) { return r > 700.0 ? 0.0 : f(r); }, from, 1e-12).value;
  return total;
}

/// int_xi^inf r K_w(r)^2 dr by quadrature (cross-check of the closed form).
inline double k_square_moment_quadrature(double omega, double xi) {
  auto f = [omega](double r) {
    const double k = specfun::bessel_k(omega, r).value;
    return r * k * k;
  };
  double total = 0.0;
  if (xi < 1.0) total += numeric::integrate_singular(f, xi, 1.0, 1e-12).value;
  const double from = std::max(xi, 1.0);
  total += numeric::integrate_to_infinity([&](double r) { return r > 700.0 ? 0.0 : f(r); }, from, 1e-12).value;
  return total;
}

/// Solves for the largest root of F on (lo, hi] with F(hi) > 0, walking the
/// lower end down by decades in log xi.
template <class F>
std::optional<double> deepest_root(F&& F_of_xi, double lo, double hi, const char* who) {
  double t_hi = std::log(hi);
  double f_hi = F_of_xi(hi);
  if (!(f_hi > 0.0)) {
    std::ostringstream os;
    os << who << ": expected F > 0 at the upper bracket xi = " << hi << ", got " << f_hi;
    throw NumericalError(os.str());
  }
  const double floor = std::max(lo, kXiFloor);
  double t_lo = t_hi;
  double f_lo = f_hi;
  while (f_lo > 0.0) {
    t_hi = t_lo;
    f_hi = f_lo;
    if (std::exp(t_lo) <= floor) return std::nullopt;
    t_lo = std::max(t_lo - std::log(10.0), std::log(floor));
    f_lo = F_of_xi(std::exp(t_lo));
  }
  const double t = numeric::find_root([&](double tt) { return F_of_xi(std::exp(tt)); }, t_lo, t_hi, 52, who);
  return std::exp(t);
}

// --- interior ODE for tabulated / linear profiles --------------------------

struct InteriorSolution {
  double phi = 0.0;
  double dphi = 0.0;
  double m0 = 0.0;  // int_0^1 phi^2 ds
  double m1 = 0.0;  // int_0^1 s phi^2 ds
};

/// phi'' = -(g f(s) - eps) phi from s0 to s1 with the given start data.
inline InteriorSolution integrate_interior(const Regulator& r, double g, double eps, double s0, double s1,
                                           double phi0, double dphi0, double rel_tol = 1e-11) {
  auto rhs = [&](double s, const numeric::OdeState& y, numeric::OdeState& dy) {
    dy[0] = y[1];
    dy[1] = -(g * r.shape(s) - eps) * y[0];
    dy[2] = y[0] * y[0];
    dy[3] = s * y[0] * y[0];
  };
  auto y = numeric::integrate_ode(rhs, {phi0, dphi0, 0.0, 0.0}, s0, s1, rel_tol, 1e-15);
  return {y[0], y[1], y[2], y[3]};
}

struct InteriorPair {
  InteriorSolution first;   // phi1(0) = 0, phi1'(0) = 1, integrated 0 -> 1
  InteriorSolution second;  // phi2(1) = 1, phi2'(1) = 0, integrated 1 -> 0
};

inline InteriorPair interior_pair(const Regulator& r, double g, double eps) {
  return {integrate_interior(r, g, eps, 0.0, 1.0, 0.0, 1.0), integrate_interior(r, g, eps, 1.0, 0.0, 1.0, 0.0)};
}

/// Left side of the generic matching condition built from the two
/// independent interior solutions, with psi(0) = 0 imposed.
inline double interior_log_derivative(const InteriorPair& p) {
  // phi1 carries its values at s = 1, phi2 its values at s = 0.
  const double p1_1 = p.first.phi, dp1_1 = p.first.dphi, p1_0 = 0.0;
  const double p2_0 = p.second.phi;
  const double p2_1 = 1.0, dp2_1 = 0.0;
  return (dp1_1 * p2_0 - p1_0 * dp2_1) / (p1_1 * p2_0 - p1_0 * p2_1);
}

}  // namespace spectrum_detail

/// L(g, eps): interior s psi'/psi at s = 1 for the regular solution.
inline double interior_matching_value(const Regulator& r, double g, double eps) {
  if (r.kind == RegulatorKind::kSquareWell) return sqrt_cot(g - eps);
  return spectrum_detail::interior_log_derivative(spectrum_detail::interior_pair(r, g, eps));
}

// ---------------------------------------------------------------------------
// Bound states

namespace spectrum_detail {

inline BoundState finish_bound_state(const ModelParams& p, const Regulator& r, double xi, double inner_value,
                                     double inner_norm, double lin, double lout) {
  const double L = r.b * p.x0;
  BoundState s;
  s.xi = xi;
  s.energy = -(xi * xi) / (L * L);
  const double c_unit = inner_value / specfun::bessel_k(p.omega, xi).value;  // A = 1
  const double outer = c_unit * c_unit * k_square_moment(p.omega, xi) / (xi * xi);
  s.norm = L * (inner_norm + outer);
  s.A = 1.0 / std::sqrt(s.norm);
  s.C = c_unit * s.A;
  s.matching_residual = std::abs(lin - lout) / std::max(1.0, std::abs(lout));
  return s;
}

inline std::optional<BoundState> square_bound_state(const ModelParams& p, const Regulator& r) {
  constexpr double pi2 = std::numbers::pi * std::numbers::pi;
  const double g = r.g;
  if (!(g > 0.0)) return std::nullopt;
  // Below threshold gamma(g) >= nu_-: no root with xi > 0.
  if (g < pi2 && sqrt_cot(g) >= p.nu_minus - 64 * std::numeric_limits<double>::epsilon()) return std::nullopt;
  auto F = [&](double xi) {
    const double q2 = g - xi * xi;
    return sqrt_cot(q2) - outer_log_derivative(p.omega, xi);
  };
  const double hi = std::sqrt(g) * (1 - 1e-14);
  const double lo = g > pi2 ? std::sqrt(g - pi2) * (1 + 1e-14) : 0.0;
  const auto xi = deepest_root(F, lo, hi, "bound_state");
  if (!xi) return std::nullopt;
  const double q = std::sqrt(g - (*xi) * (*xi));
  const double inner = 0.5 - std::sin(2 * q) / (4 * q);
  return finish_bound_state(p, r, *xi, std::sin(q), inner, sqrt_cot(q * q), outer_log_derivative(p.omega, *xi));
}

inline std::optional<BoundState> profile_bound_state(const ModelParams& p, const Regulator& r) {
  const double g = r.g;
  if (!(g > 0.0)) return std::nullopt;
  auto F = [&](double xi) {
    return interior_matching_value(r, g, xi * xi) - outer_log_derivative(p.omega, xi);
  };
  if (F(kXiFloor) >= 0.0) return std::nullopt;
  const double hi = std::sqrt(g * r.shape_max()) + 1.0;
  const auto xi = deepest_root(F, kXiFloor, hi, "bound_state");
  if (!xi) return std::nullopt;
  const auto in = integrate_interior(r, g, (*xi) * (*xi), 0.0, 1.0, 0.0, 1.0);
  return finish_bound_state(p, r, *xi, in.phi, in.m0, in.dphi / in.phi, outer_log_derivative(p.omega, *xi));
}

}  // namespace spectrum_detail

/// Ground state of the regulated Hamiltonian, or nullopt when the well does
/// not bind.
inline std::optional<BoundState> bound_state(const ModelParams& p, const Regulator& r) {
  require_conformal(p, "bound_state");
  r.validate();
  if (r.kind == RegulatorKind::kSquareWell) return spectrum_detail::square_bound_state(p, r);
  return spectrum_detail::profile_bound_state(p, r);
}

/// Amplitude C of E ~ -C (g - g_-)^{1/w} / (b x0)^2 for the square well.
inline double binding_constant(const ModelParams& p) {
  require_conformal(p, "binding_constant");
  const double gm = fixed_points(p).g_minus;
  const double w = p.omega;
  const double base = std::pow(2.0, 2 * w - 2) * (1 + p.alpha / gm) * specfun::gamma(w).value /
                      specfun::gamma(1 - w).value;
  return std::pow(base, 1.0 / w);
}

/// Limit of <x> |E|^{1/2} as the bound state delocalizes: the ratio of the
/// second to first moments of r K_w(r)^2 on (0, inf).
inline double mean_position_tail_constant(const ModelParams& p) {
  const double w = p.omega;
  return 0.25 * std::numbers::pi * (0.25 - w * w) * std::tan(std::numbers::pi * w) / w;
}

/// <x> = int x psi^2 / int psi^2 for the ground state at depth g.
inline double mean_position(const ModelParams& p, const Regulator& r, double g) {
  const Regulator rg = r.with_g(g);
  const auto bs = bound_state(p, rg);
  if (!bs) {
    std::ostringstream os;
    os << "mean_position: no bound state at g = " << g;
    throw DomainError(os.str());
  }
  const double L = r.b * p.x0;
  const double xi = bs->xi;
  double inner0 = 0.0, inner1 = 0.0, edge = 0.0;
  if (r.kind == RegulatorKind::kSquareWell) {
    const double q = std::sqrt(g - xi * xi);
    const auto m0 = numeric::integrate([q](double s) { return std::pow(std::sin(q * s), 2); }, 0.0, 1.0, 1e-13);
    const auto m1 = numeric::integrate([q](double s) { return s * std::pow(std::sin(q * s), 2); }, 0.0, 1.0, 1e-13);
    inner0 = m0.value;
    inner1 = m1.value;
    edge = std::sin(q);
  } else {
    const auto in = spectrum_detail::integrate_interior(rg, g, xi * xi, 0.0, 1.0, 0.0, 1.0);
    inner0 = in.m0;
    inner1 = in.m1;
    edge = in.phi;
  }
  const double c = edge / specfun::bessel_k(p.omega, xi).value;
  const double outer0 = c * c * spectrum_detail::k_square_moment_quadrature(p.omega, xi) / (xi * xi);
  const double outer1 = c * c * spectrum_detail::k_square_first_moment(p.omega, xi) / (xi * xi * xi);
  return L * (inner1 + outer1) / (inner0 + outer0);
}

// ---------------------------------------------------------------------------
// Continuum states (square well)

struct ContinuumState {
  double energy = 0.0;
  double xi = 0.0;
  double a_plus = 0.0;      // C+/A
  double a_minus = 0.0;     // C-/A
  double ratio_CpCm = 0.0;  // C+/C-; +inf when C- vanishes
  double ratio_CmA = 0.0;   // C-/A
  bool ratio_infinite = false;
  double B = 0.0;           // A^2 = B / (pi sqrt(E))
};

namespace spectrum_detail {

/// sqrt(xi) J_{+-w}(xi) and s d/ds of sqrt(xi s) J(xi s) at s = 1.
struct OuterBasis {
  double u_plus, su_plus, u_minus, su_minus;
};

inline OuterBasis outer_basis(double omega, double xi) {
  const double r = std::sqrt(xi);
  const double jp = specfun::bessel_j(omega, xi).value;
  const double jm = specfun::bessel_j(-omega, xi).value;
  const double djp = specfun::bessel_j_prime(omega, xi).value;
  const double djm = specfun::bessel_j_prime(-omega, xi).value;
  return {r * jp, r * (0.5 * jp + xi * djp), r * jm, r * (0.5 * jm + xi * djm)};
}

/// Complex amplitude w with a+ sqrt(z)J_w(z) + a- sqrt(z)J_{-w}(z) ~
/// sqrt(2/pi) Re[w e^{iz}] at large z.
inline std::complex<double> far_amplitude(double omega, double a_plus, double a_minus) {
  using std::numbers::pi;
  const double ph_plus = (0.5 * omega + 0.25) * pi;
  const double ph_minus = (-0.5 * omega + 0.25) * pi;
  return a_plus * std::polar(1.0, -ph_plus) + a_minus * std::polar(1.0, -ph_minus);
}

}  // namespace spectrum_detail

/// Matching coefficients of the E > 0 eigenfunction with unit interior
/// amplitude, from a 2x2 Cramer solve at x = b x0.
inline ContinuumState continuum_coefficients(const ModelParams& p, const Regulator& r, double E) {
  require_conformal(p, "continuum_coefficients");
  if (r.kind != RegulatorKind::kSquareWell) throw DomainError("continuum_coefficients: square well only");
  if (!(E > 0.0)) throw DomainError("continuum_coefficients: E must be positive");
  r.validate();
  const double L = r.b * p.x0;
  const double xi = L * std::sqrt(E);
  const double q = std::sqrt(r.g + xi * xi);
  const auto o = spectrum_detail::outer_basis(p.omega, xi);
  const double det = -2.0 * xi * std::sin(p.omega * std::numbers::pi) / std::numbers::pi;
  const double sq = std::sin(q), qc = q * std::cos(q);
  ContinuumState c;
  c.energy = E;
  c.xi = xi;
  c.a_plus = (sq * o.su_minus - o.u_minus * qc) / det;
  c.a_minus = (o.u_plus * qc - sq * o.su_plus) / det;
  c.ratio_CmA = c.a_minus;
  if (c.a_minus == 0.0) {
    c.ratio_infinite = true;
    c.ratio_CpCm = std::numeric_limits<double>::infinity();
  } else {
    c.ratio_CpCm = c.a_plus / c.a_minus;
  }
  c.B = 0.5 * std::numbers::pi / std::norm(spectrum_detail::far_amplitude(p.omega, c.a_plus, c.a_minus));
  return c;
}

/// C+/C- from the explicit quotient of Bessel combinations.
inline double ratio_explicit(const ModelParams& p, double g, double xi) {
  const double D = sqrt_cot(g + xi * xi) - 0.5;
  const double jp = specfun::bessel_j(p.omega, xi).value;
  const double jm = specfun::bessel_j(-p.omega, xi).value;
  const double djp = specfun::bessel_j_prime(p.omega, xi).value;
  const double djm = specfun::bessel_j_prime(-p.omega, xi).value;
  const double den = xi * djp - jp * D;
  if (den == 0.0) return std::numeric_limits<double>::infinity();
  return (-xi * djm + jm * D) / den;
}

/// C-/A from the explicit ratio.
inline double cm_over_a_explicit(const ModelParams& p, double g, double xi) {
  const double ratio = ratio_explicit(p, g, xi);
  const double r = std::sqrt(xi);
  return std::sin(std::sqrt(g + xi * xi)) /
         (ratio * r * specfun::bessel_j(p.omega, xi).value + r * specfun::bessel_j(-p.omega, xi).value);
}

/// Small-xi form of C+/C-.
inline double ratio_small_xi(const ModelParams& p, double g, double xi) {
  const double w = p.omega;
  const double gam = sqrt_cot(g);
  return -std::pow(2.0, 2 * w) * specfun::gamma(1 + w).value / specfun::gamma(1 - w).value *
         std::pow(xi, -2 * w) * (gam - p.nu_minus) / (gam - p.nu_plus);
}

// ---------------------------------------------------------------------------
// Variational / comparison bounds on the binding threshold

struct ExistenceBounds {
  double g_bind_upper_bound = 0.0;    // binding guaranteed above this
  double g_nobind_lower_bound = 0.0;  // no binding below this
};

inline ExistenceBounds existence_bounds(const ModelParams& p, const Regulator& r) {
  require_conformal(p, "existence_bounds");
  const auto overlap =
      numeric::integrate([&](double s) { return r.shape(s) * s * s * std::exp(-s); }, 0.0, 1.0, 1e-13).value;
  if (!(overlap > 0.0)) throw DomainError("existence_bounds: profile has no positive overlap with the trial state");
  double fmax = 0.0;
  for (int i = 0; i <= 4000; ++i) fmax = std::max(fmax, r.shape(i / 4000.0));
  if (!(fmax > 0.0)) throw DomainError("existence_bounds: profile is nowhere positive");
  ExistenceBounds b;
  b.g_bind_upper_bound = (0.5 + p.alpha / std::numbers::e) / overlap;
  b.g_nobind_lower_bound = fixed_points(p).g_minus / fmax;
  return b;
}

// ---------------------------------------------------------------------------
// Critical behaviour near the binding threshold

enum class FitModel {
  kPowerLaw,                // log|E| = log A + p log dg
  kPowerLawWithCorrection,  // ... + a dg (leading analytic correction)
};

struct FitWindow {
  double lo = 1e-4;
  double hi = 1e-2;
  int n = 20;
  FitModel model = FitModel::kPowerLawWithCorrection;
};

struct CriticalFit {
  double exponent = 0.0;
  double amplitude = 0.0;  // |E| (b x0)^2 ~ amplitude dg^exponent
  double g_star = 0.0;
  double residual = 0.0;   // rms of log residuals
  double correction = 0.0; // coefficient of dg in the corrected model
  std::vector<double> dg;
  std::vector<double> energy;
};

/// Least-squares fit of log y = log A + p log x (+ a x).
inline CriticalFit fit_power_law(const std::vector<double>& x, const std::vector<double>& y, FitModel model) {
  if (x.size() != y.size() || x.size() < 3) throw DomainError("fit_power_law: need >= 3 matching points");
  const int cols = model == FitModel::kPowerLaw ? 2 : 3;
  Eigen::MatrixXd X(x.size(), cols);
  Eigen::VectorXd v(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0 && y[i] > 0.0)) throw DomainError("fit_power_law: data must be positive");
    X(i, 0) = 1.0;
    X(i, 1) = std::log(x[i]);
    if (cols == 3) X(i, 2) = x[i];
    v(i) = std::log(y[i]);
  }
  const Eigen::VectorXd c = numeric::least_squares(X, v);
  CriticalFit f;
  f.amplitude = std::exp(c(0));
  f.exponent = c(1);
  f.correction = cols == 3 ? c(2) : 0.0;
  f.residual = std::sqrt((X * c - v).squaredNorm() / double(x.size()));
  return f;
}

/// Threshold depth g_* for a profile regulator: the root of L(g, 0) = nu_-
/// on the nodeless branch, where the sign of L(g, 0) - nu_- decides binding.
inline double generic_threshold(const ModelParams& p, const Regulator& r) {
  require_conformal(p, "generic_threshold");
  if (r.kind == RegulatorKind::kSquareWell) return fixed_points(p).g_minus;
  auto h = [&](double g) {
    const auto pair = spectrum_detail::interior_pair(r, g, 0.0);
    return std::make_pair(spectrum_detail::interior_log_derivative(pair) - p.nu_minus, pair.first.phi);
  };
  double lo = 0.0;
  double step = 0.25;
  double hi = step;
  for (int k = 0;; ++k) {
    if (k > 4000) throw NumericalError("generic_threshold: profile admits no binding in the scanned range");
    const auto [v, phi1] = h(hi);
    if (!(phi1 > 0.0)) {
      // passed a node without a sign change: refine the step
      hi = lo + 0.5 * (hi - lo);
      step *= 0.5;
      if (step < 1e-12) throw NumericalError("generic_threshold: could not bracket threshold");
      continue;
    }
    if (v < 0.0) break;
    lo = hi;
    hi += step;
  }
  return numeric::find_root([&](double g) { return h(g).first; }, lo, hi, 60, "generic_threshold");
}

/// Samples |E| on a log grid of g - g_* and fits the critical exponent.
inline CriticalFit binding_exponent(const ModelParams& p, const Regulator& r, const FitWindow& w = {}) {
  require_conformal(p, "binding_exponent");
  const double gs = generic_threshold(p, r);
  const auto dg = numeric::geomspace(w.lo, w.hi, w.n);
  const double L = r.b * p.x0;
  const auto e = parallel_map(dg, [&](double d) {
    const auto bs = bound_state(p, r.with_g(gs + d));
    if (!bs) {
      std::ostringstream os;
      os << "binding_exponent: no bound state at g_* + " << d;
      throw NumericalError(os.str());
    }
    return bs->energy;
  });
  std::vector<double> scaled(e.size());
  for (std::size_t i = 0; i < e.size(); ++i) scaled[i] = -e[i] * L * L;
  CriticalFit f = fit_power_law(dg, scaled, w.model);
  f.g_star = gs;
  f.dg = dg;
  f.energy = e;
  return f;
}

/// Generic-regulator pipeline: threshold from the interior ODE, then the fit.
inline CriticalFit generic_bound_threshold(const ModelParams& p, const Regulator& r, const FitWindow& w = {}) {
  return binding_exponent(p, r, w);
}

}  // namespace isq
