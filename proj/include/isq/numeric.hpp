#pragma once

// Thin wrappers over Boost.Math / Boost.Odeint / Eigen that give the rest of
// the library one error idiom (isq::NumericalError) and one result shape.

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/tools/roots.hpp>
#include <boost/numeric/odeint.hpp>

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <sstream>
#include <vector>

#include "isq/error.hpp"

namespace isq::numeric {

struct Integral {
  double value = 0.0;
  double abs_error = 0.0;
};

/// Root of f on [lo, hi] by TOMS 748. Requires a sign change.
template <class F>
double find_root(F&& f, double lo, double hi, int bits = 50, const char* who = "find_root") {
  const double flo = f(lo);
  const double fhi = f(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if ((flo > 0) == (fhi > 0)) {
    std::ostringstream os;
    os.precision(17);
    os << who << ": no sign change on bracket [" << lo << ", " << hi << "], f = (" << flo << ", " << fhi
       << ")";
    throw NumericalError(os.str());
  }
  std::uintmax_t iters = 400;
  const auto r = boost::math::tools::toms748_solve(f, lo, hi, flo, fhi,
                                                   boost::math::tools::eps_tolerance<double>(bits), iters);
  if (iters >= 400) {
    std::ostringstream os;
    os.precision(17);
    os << who << ": no convergence, final bracket [" << r.first << ", " << r.second << "]";
    throw NumericalError(os.str());
  }
  return 0.5 * (r.first + r.second);
}

/// Adaptive Gauss-Kronrod (15 point) on a finite interval.
template <class F>
Integral integrate(F&& f, double a, double b, double rel_tol = 1e-10, unsigned max_depth = 25) {
  double err = 0.0;
  double l1 = 0.0;
  const double v = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, a, b, max_depth, rel_tol,
                                                                               &err, &l1);
  return {v, err * std::max(std::abs(v), l1)};
}

/// Double-exponential rule for finite intervals with endpoint singularities.
template <class F>
Integral integrate_singular(F&& f, double a, double b, double rel_tol = 1e-10) {
  boost::math::quadrature::tanh_sinh<double> ts(12);
  double err = 0.0;
  double l1 = 0.0;
  const double v = ts.integrate(f, a, b, rel_tol, &err, &l1);
  return {v, err * std::max(std::abs(v), l1)};
}

/// Integral over [a, infinity) for integrands that decay at least
/// exponentially.
template <class F>
Integral integrate_to_infinity(F&& f, double a, double rel_tol = 1e-10) {
  boost::math::quadrature::exp_sinh<double> es(12);
  double err = 0.0;
  double l1 = 0.0;
  const double v = es.integrate([&](double s) { return f(a + s); }, 0.0,
                                std::numeric_limits<double>::infinity(), rel_tol, &err, &l1);
  return {v, err * std::max(std::abs(v), l1)};
}

using OdeState = std::vector<double>;

/// Integrates y' = rhs(t, y) from t0 to t1 with a Dormand-Prince 5(4) pair.
/// Returns the state at t1.
template <class Rhs>
OdeState integrate_ode(Rhs&& rhs, OdeState y, double t0, double t1, double rel_tol = 1e-10,
                       double abs_tol = 1e-14) {
  namespace odeint = boost::numeric::odeint;
  auto stepper = odeint::make_dense_output(abs_tol, rel_tol, odeint::runge_kutta_dopri5<OdeState>());
  auto system = [&](const OdeState& s, OdeState& ds, double t) { rhs(t, s, ds); };
  const double dt0 = (t1 - t0) * 1e-4;
  odeint::integrate_adaptive(stepper, system, y, t0, t1, dt0);
  for (double v : y) {
    if (!std::isfinite(v)) throw NumericalError("integrate_ode: non-finite state");
  }
  return y;
}

/// Ordinary least squares: coefficients minimizing |X c - y|.
inline Eigen::VectorXd least_squares(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  return X.colPivHouseholderQr().solve(y);
}

/// Central difference derivative with step h.
template <class F>
double central_difference(F&& f, double x, double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

inline std::vector<double> geomspace(double lo, double hi, int n) {
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = lo * std::pow(hi / lo, n == 1 ? 0.0 : double(i) / (n - 1));
  return v;
}

inline std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = lo + (hi - lo) * (n == 1 ? 0.0 : double(i) / (n - 1));
  return v;
}

}  // namespace isq::numeric
