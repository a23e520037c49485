#pragma once

// Scattering off the square-well regulated potential. With mu = k b x0 the
// exterior solution is sqrt(kx) [H2_w(kx) + r e^{i w pi + i pi/2} H1_w(kx)],
// so that psi ~ e^{-ikx} + r e^{ikx}.

#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "isq/core.hpp"
#include "isq/error.hpp"
#include "isq/numeric.hpp"
#include "isq/parallel.hpp"
#include "isq/rgflow.hpp"
#include "isq/specfun.hpp"

namespace isq {

struct ReflectionAmplitude {
  std::complex<double> r;
  double k = 0.0;
  double mu = 0.0;
  double g = 0.0;
};

struct PhaseShift {
  double delta = 0.0;  // principal value in (-pi/2, pi/2], or branch-tracked in sweeps
  double k = 0.0;
  double mu = 0.0;
  double g = 0.0;
};

namespace scattering_detail {

/// Interior matching value d = (2 zeta cot zeta - 1) / (2 mu), zeta^2 = mu^2 + g.
inline double interior_d(double mu, double g) { return (2.0 * sqrt_cot(mu * mu + g) - 1.0) / (2.0 * mu); }

inline void check_branch(double mu, double g, const char* who) {
  const double z2 = mu * mu + g;
  if (!(z2 > 0.0 && z2 < std::numbers::pi * std::numbers::pi)) {
    std::ostringstream os;
    os << who << ": zeta^2 = mu^2 + g = " << z2 << " outside the first cotangent branch";
    throw DomainError(os.str());
  }
}

/// Numerator and denominator of c = (Y' - d Y) / (J' - d J).
inline std::pair<double, double> c_parts(double w, double mu, double g) {
  const double d = interior_d(mu, g);
  const double num = specfun::bessel_y_prime(w, mu).value - d * specfun::bessel_y(w, mu).value;
  const double den = specfun::bessel_j_prime(w, mu).value - d * specfun::bessel_j(w, mu).value;
  return {num, den};
}

/// Phase shift in (-pi/2, pi/2] from r = i e^{-i w pi} (1 - ic)/(1 + ic) = -e^{2 i delta}:
/// delta = -pi/4 - w pi/2 - atan c (mod pi).
inline double principal_delta(double w, double num, double den) {
  constexpr double pi = std::numbers::pi;
  // atan(num/den) without dividing, so den = 0 gives +-pi/2
  double a = std::atan2(num, den);
  if (a > pi / 2) a -= pi;
  if (a <= -pi / 2) a += pi;
  double d = -pi / 4 - w * pi / 2 - a;
  while (d > pi / 2) d -= pi;
  while (d <= -pi / 2) d += pi;
  return d;
}

}  // namespace scattering_detail

inline ReflectionAmplitude reflection(const ModelParams& p, const Regulator& reg, double k) {
  require_conformal(p, "reflection");
  if (reg.kind != RegulatorKind::kSquareWell) throw DomainError("reflection: square well only");
  reg.validate();
  if (!(k > 0.0)) throw DomainError("reflection: k must be positive");
  const double mu = k * reg.b * p.x0;
  scattering_detail::check_branch(mu, reg.g, "reflection");
  const auto [num, den] = scattering_detail::c_parts(p.omega, mu, reg.g);
  using namespace std::complex_literals;
  const std::complex<double> pre = 1i * std::exp(-1i * p.omega * std::numbers::pi);
  ReflectionAmplitude out;
  out.k = k;
  out.mu = mu;
  out.g = reg.g;
  // (1 - ic)/(1 + ic) = (den - i num)/(den + i num); den = 0 is the c -> inf limit -1
  const std::complex<double> top(den, -num), bottom(den, num);
  if (std::abs(bottom) == 0.0) throw NumericalError("reflection: degenerate matching");
  out.r = pre * top / bottom;
  return out;
}

inline PhaseShift phase_shift(const ModelParams& p, const Regulator& reg, double k) {
  require_conformal(p, "phase_shift");
  if (reg.kind != RegulatorKind::kSquareWell) throw DomainError("phase_shift: square well only");
  reg.validate();
  if (!(k > 0.0)) throw DomainError("phase_shift: k must be positive");
  const double mu = k * reg.b * p.x0;
  scattering_detail::check_branch(mu, reg.g, "phase_shift");
  const auto [num, den] = scattering_detail::c_parts(p.omega, mu, reg.g);
  return {scattering_detail::principal_delta(p.omega, num, den), k, mu, reg.g};
}

/// Phase shifts over a sweep of k. The value at the largest k is the
/// principal one; the others are shifted by multiples of pi for continuity.
/// A jump larger than max_jump between neighbours is refined by bisection
/// and reported as NumericalError if it persists.
inline std::vector<PhaseShift> phase_shift_sweep(const ModelParams& p, const Regulator& reg, std::vector<double> ks,
                                                 double max_jump = 0.5) {
  std::sort(ks.begin(), ks.end());
  auto out = parallel_map(ks, [&](double k) { return phase_shift(p, reg, k); });
  constexpr double pi = std::numbers::pi;
  auto nearest = [](double v, double target) { return v + pi * std::round((target - v) / pi); };
  for (std::size_t i = out.size(); i-- > 1;) {
    const double prev = out[i].delta;
    double cur = nearest(out[i - 1].delta, prev);
    if (std::abs(cur - prev) > max_jump) {
      // walk through the interval in finer steps
      double last = prev;
      const double k_hi = out[i].k, k_lo = out[i - 1].k;
      bool ok = true;
      const int n = 64;
      for (int j = 1; j <= n; ++j) {
        const double kk = k_hi * std::pow(k_lo / k_hi, double(j) / n);
        const double v = nearest(phase_shift(p, reg, kk).delta, last);
        if (std::abs(v - last) > max_jump) ok = false;
        last = v;
      }
      if (!ok) throw NumericalError("phase_shift_sweep: branch jump not resolved; refine the k grid");
      cur = last;
    }
    out[i - 1].delta = cur;
  }
  return out;
}

/// Leading small-mu form: (pi/4)(1 - 2w) - pi/(w (2^w Gamma(w))^2) (gamma - nu_+)/(gamma - nu_-) mu^{2w}.
struct SmallMuExpansion {
  double leading = 0.0;
  double coefficient = 0.0;  // of mu^{2w}
  double value(double mu, double omega) const { return leading + coefficient * std::pow(mu, 2 * omega); }
};

inline SmallMuExpansion small_mu_expansion(const ModelParams& p, double g) {
  require_conformal(p, "small_mu_expansion");
  const double w = p.omega;
  const double gam = gamma_of_g(g);
  const double G = std::pow(2.0, w) * specfun::gamma(w).value;
  SmallMuExpansion e;
  e.leading = std::numbers::pi / 4 * (1 - 2 * w);
  e.coefficient = -std::numbers::pi / (w * G * G) * (gam - p.nu_plus) / (gam - p.nu_minus);
  return e;
}

/// Pole of r continued to k = i s: the outgoing Hankel wave becomes K_w, so
/// the pole sits where s L K'_w(sL)/K_w(sL) = zeta cot zeta - 1/2 with
/// zeta^2 = g - (s L)^2. Returns E = -s^2, or nullopt if there is none.
inline std::optional<double> reflection_pole_energy(const ModelParams& p, const Regulator& reg) {
  require_conformal(p, "reflection_pole_energy");
  if (reg.kind != RegulatorKind::kSquareWell) throw DomainError("reflection_pole_energy: square well only");
  reg.validate();
  const double g = reg.g;
  auto F = [&](double log_y) {
    const double y = std::exp(log_y);
    return sqrt_cot(g - y * y) - 0.5 - specfun::bessel_k_log_derivative(p.omega, y);
  };
  // F > 0 for large y (K decays, zeta cot zeta -> y coth); scan down for a sign change
  const double hi = std::log(std::sqrt(g) * (1 - 1e-12));
  if (!(g > 0.0) || F(hi) <= 0.0) return std::nullopt;
  double lo = hi;
  for (int i = 0; i < 400; ++i) {
    const double next = lo - std::log(10.0);
    if (next < std::log(1e-150)) return std::nullopt;
    lo = next;
    if (F(lo) < 0.0) {
      const double ly = numeric::find_root(F, lo, lo + std::log(10.0), 60, "reflection_pole_energy");
      const double s = std::exp(ly) / (reg.b * p.x0);
      return -s * s;
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Integral curves of constant phase shift

/// Slope dg/dmu that keeps r fixed:
/// f = [-alpha z sin^2 z + g z cos^2 z - g sin z cos z] / [(mu/2)(z - sin z cos z)], z^2 = mu^2 + g.
inline double phase_vector_field(const ModelParams& p, double mu, double g) {
  const double z = std::sqrt(mu * mu + g);
  const double s = std::sin(z), c = std::cos(z);
  return (-p.alpha * z * s * s + g * z * c * c - g * s * c) / (0.5 * mu * (z - s * c));
}

struct PhaseCurvePoint {
  double mu = 0.0;
  double g = 0.0;
};

struct PhaseCurve {
  std::vector<PhaseCurvePoint> points;
  bool complete = true;  // false if the curve left the first cotangent branch
  std::string note;
};

/// Integrates dg/dmu = f(mu, g) from (mu0, g0) to mu1 in log mu, with output
/// at n_out log-spaced mu values (including both ends).
inline PhaseCurve constant_phase_curve(const ModelParams& p, double mu0, double g0, double mu1, int n_out = 41,
                                       double rel_tol = 1e-12) {
  require_conformal(p, "constant_phase_curve");
  if (!(mu0 > 0.0 && mu1 > 0.0)) throw DomainError("constant_phase_curve: mu0, mu1 must be positive");
  if (n_out < 2) throw DomainError("constant_phase_curve: need at least two output points");
  scattering_detail::check_branch(mu0, g0, "constant_phase_curve");
  struct BranchExit {};
  auto rhs = [&](double t, const numeric::OdeState& y, numeric::OdeState& dy) {
    const double mu = std::exp(t);
    const double z2 = mu * mu + y[0];
    if (!(z2 > 0.0 && z2 < std::numbers::pi * std::numbers::pi)) throw BranchExit{};
    dy[0] = mu * phase_vector_field(p, mu, y[0]);
  };
  PhaseCurve c;
  c.points.push_back({mu0, g0});
  numeric::OdeState y{g0};
  const double t0 = std::log(mu0), t1 = std::log(mu1);
  for (int i = 1; i < n_out; ++i) {
    const double a = t0 + (t1 - t0) * (i - 1) / (n_out - 1);
    const double b = t0 + (t1 - t0) * i / (n_out - 1);
    try {
      y = numeric::integrate_ode(rhs, y, a, b, rel_tol, 1e-15);
    } catch (const BranchExit&) {
      c.complete = false;
      std::ostringstream os;
      os << "left the first cotangent branch between mu = " << std::exp(a) << " and " << std::exp(b);
      c.note = os.str();
      return c;
    }
    c.points.push_back({std::exp(b), y[0]});
  }
  return c;
}

}  // namespace isq
