#pragma once

// Gamma and Bessel functions of real, non-integer order on the positive real
// axis. Only what the inverse-square problem needs: |nu| < 3, x > 0.
//
// Strategy:
//   J, I   ascending series in long double below a switch point, Hankel
//          asymptotic expansions above it.
//   Y      connection formula (J_nu cos(nu pi) - J_-nu) / sin(nu pi) on the
//          series side, Hankel expansion on the asymptotic side.
//   K      connection formula pi (I_-nu - I_nu) / (2 sin(nu pi)) for x < 2,
//          Steed's continued fraction plus upward recurrence for x >= 2.
// Derivatives always come from order recurrences, never from differencing.

#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <sstream>
#include <utility>

#include "isq/error.hpp"

namespace isq::specfun {

struct FunctionValue {
  double value = 0.0;
  double abs_error = 0.0;
};

struct ComplexValue {
  std::complex<double> value;
  double abs_error = 0.0;
};

namespace detail {

inline constexpr long double kLdEps = std::numeric_limits<long double>::epsilon();
inline constexpr double kEps = std::numeric_limits<double>::epsilon();
inline constexpr double kMaxOrder = 3.0;
// Series/asymptotic switch points. The J series loses about log10(I_0(x))
// digits to cancellation; long double leaves ~1e-11 absolute at x = 20.
inline constexpr double kJSwitch = 20.0;
inline constexpr double kISwitch = 25.0;

inline void check_arg(double nu, double x, const char* who) {
  if (!(x > 0.0) || !std::isfinite(x)) {
    std::ostringstream os;
    os << who << ": argument must be positive and finite, got " << x;
    throw DomainError(os.str());
  }
  if (!(std::abs(nu) < kMaxOrder)) {
    std::ostringstream os;
    os << who << ": order " << nu << " outside supported range |nu| < " << kMaxOrder;
    throw DomainError(os.str());
  }
}

inline bool is_integer(double nu) { return nu == std::nearbyint(nu); }

inline void check_noninteger(double nu, const char* who) {
  if (is_integer(nu)) {
    std::ostringstream os;
    os << who << ": integer order " << nu << " is not supported";
    throw DomainError(os.str());
  }
}

// sum_k s^k (x/2)^{2k+nu} / (k! Gamma(k+nu+1)), s = -1 for J, +1 for I.
// Terms are built recursively, so Gamma is only evaluated once and negative
// non-integer orders are fine.
inline FunctionValue ascending_series(double nu, double x, int sign) {
  const long double h = 0.5L * x;
  const long double h2 = h * h * sign;
  long double term;
  if (is_integer(nu) && nu < 0) {
    // 1/Gamma(nu+1) = 0 for the first -nu terms; use J_-n = (-1)^n J_n.
    const FunctionValue pos = ascending_series(-nu, x, sign);
    const int n = static_cast<int>(-nu);
    const double s = (sign < 0 && (n % 2)) ? -1.0 : 1.0;
    return {s * pos.value, pos.abs_error};
  }
  term = std::pow(h, static_cast<long double>(nu)) / std::tgamma(static_cast<long double>(nu) + 1.0L);
  long double sum = term;
  long double peak = std::abs(term);
  int k = 0;
  for (k = 1; k < 500; ++k) {
    term *= h2 / (static_cast<long double>(k) * (k + static_cast<long double>(nu)));
    sum += term;
    peak = std::max(peak, std::abs(term));
    if (k > h && std::abs(term) <= kLdEps * std::abs(sum)) break;
  }
  const double err = static_cast<double>(kLdEps * peak * std::sqrt(static_cast<long double>(k + 1))) +
                     kEps * std::abs(static_cast<double>(sum));
  return {static_cast<double>(sum), err};
}

struct AsymptoticTerms {
  double even = 0.0;  // sum of (-1)^{k/2} t_k over even k      (P)
  double odd = 0.0;   // sum of (-1)^{(k-1)/2} t_k over odd k   (Q)
  double plain = 0.0; // sum of t_k                              (K-type)
  double alt = 0.0;   // sum of (-1)^k t_k                       (I-type)
  double tail = 0.0;  // magnitude of first omitted term
};

// t_k = prod_{j=1..k} (4 nu^2 - (2j-1)^2) / (j 8 x); truncated at the
// smallest term.
inline AsymptoticTerms hankel_terms(double nu, double x) {
  AsymptoticTerms r;
  const double mu = 4.0 * nu * nu;
  double t = 1.0;
  r.even = r.plain = r.alt = 1.0;
  double prev = 1.0;
  for (int k = 1; k < 200; ++k) {
    const double odd = 2.0 * k - 1.0;
    const double next = t * (mu - odd * odd) / (k * 8.0 * x);
    if (std::abs(next) >= prev && k > 2) {
      r.tail = std::abs(next);
      return r;
    }
    t = next;
    prev = std::abs(t);
    if (k % 2 == 0) {
      r.even += ((k / 2) % 2 ? -t : t);
    } else {
      r.odd += (((k - 1) / 2) % 2 ? -t : t);
    }
    r.plain += t;
    r.alt += (k % 2 ? -t : t);
    if (prev < 1e-18) {
      r.tail = prev;
      return r;
    }
  }
  r.tail = prev;
  return r;
}

// J and Y together from the Hankel expansion.
inline std::pair<FunctionValue, FunctionValue> jy_asymptotic(double nu, double x) {
  const AsymptoticTerms a = hankel_terms(nu, x);
  const double chi = x - (0.5 * nu + 0.25) * std::numbers::pi;
  const double amp = std::sqrt(2.0 / (std::numbers::pi * x));
  const double c = std::cos(chi);
  const double s = std::sin(chi);
  const double err = amp * (a.tail + 4.0 * kEps * (std::abs(a.even) + std::abs(a.odd)));
  return {{amp * (a.even * c - a.odd * s), err}, {amp * (a.even * s + a.odd * c), err}};
}

inline FunctionValue j_raw(double nu, double x) {
  if (x <= kJSwitch) return ascending_series(nu, x, -1);
  return jy_asymptotic(nu, x).first;
}

inline FunctionValue y_raw(double nu, double x) {
  if (x > kJSwitch) return jy_asymptotic(nu, x).second;
  const double s = std::sin(nu * std::numbers::pi);
  const double c = std::cos(nu * std::numbers::pi);
  const FunctionValue jp = ascending_series(nu, x, -1);
  const FunctionValue jm = ascending_series(-nu, x, -1);
  const double v = (jp.value * c - jm.value) / s;
  return {v, (jp.abs_error * std::abs(c) + jm.abs_error) / std::abs(s) + kEps * std::abs(v)};
}

// e^{-x} I_nu(x).
inline FunctionValue i_scaled_raw(double nu, double x) {
  if (x <= kISwitch) {
    const FunctionValue s = ascending_series(nu, x, +1);
    const double e = std::exp(-x);
    return {s.value * e, s.abs_error * e};
  }
  const AsymptoticTerms a = hankel_terms(nu, x);
  const double amp = 1.0 / std::sqrt(2.0 * std::numbers::pi * x);
  return {amp * a.alt, amp * (a.tail + 4.0 * kEps * std::abs(a.alt))};
}

// Steed's continued fraction for K_mu, K_{mu+1}, |mu| <= 1/2, x >= 2.
inline std::pair<double, double> k_steed(double mu, double x) {
  const double a1 = 0.25 - mu * mu;
  double b = 2.0 * (1.0 + x);
  double d = 1.0 / b;
  double h = d;
  double delh = d;
  double q1 = 0.0;
  double q2 = 1.0;
  double q = a1;
  double c = a1;
  double a = -a1;
  double s = 1.0 + q * delh;
  int i = 2;
  for (; i < 100000; ++i) {
    a -= 2.0 * (i - 1);
    c = -a * c / i;
    const double qnew = (q1 - b * q2) / a;
    q1 = q2;
    q2 = qnew;
    q += c * qnew;
    b += 2.0;
    d = 1.0 / (b + a * d);
    delh = (b * d - 1.0) * delh;
    h += delh;
    const double dels = q * delh;
    s += dels;
    if (std::abs(dels / s) < kEps) break;
  }
  if (i >= 100000) throw NumericalError("bessel_k: continued fraction did not converge");
  h *= a1;
  const double kmu = std::sqrt(std::numbers::pi / (2.0 * x)) * std::exp(-x) / s;
  const double kmu1 = kmu * (mu + x + 0.5 - h) / x;
  return {kmu, kmu1};
}

inline FunctionValue k_raw(double nu, double x) {
  nu = std::abs(nu);
  if (x < 2.0) {
    check_noninteger(nu, "bessel_k");
    const FunctionValue ip = ascending_series(nu, x, +1);
    const FunctionValue im = ascending_series(-nu, x, +1);
    const double s = std::sin(nu * std::numbers::pi);
    const double v = std::numbers::pi * (im.value - ip.value) / (2.0 * s);
    return {v, std::numbers::pi * (ip.abs_error + im.abs_error) / (2.0 * std::abs(s)) + 2 * kEps * std::abs(v)};
  }
  const double nl = std::nearbyint(nu);
  const double mu = nu - nl;
  auto [k0, k1] = k_steed(mu, x);
  double order = mu;
  for (int i = 0; i < static_cast<int>(nl); ++i) {
    const double k2 = 2.0 * (order + 1.0) / x * k1 + k0;
    k0 = k1;
    k1 = k2;
    order += 1.0;
  }
  return {k0, 16 * kEps * std::abs(k0) * (1.0 + nl)};
}

}  // namespace detail

/// Gamma function. Poles at the non-positive integers raise DomainError.
inline FunctionValue gamma(double x) {
  if (x <= 0.0 && detail::is_integer(x)) {
    std::ostringstream os;
    os << "gamma: pole at non-positive integer " << x;
    throw DomainError(os.str());
  }
  const double v = std::tgamma(x);
  return {v, 4 * detail::kEps * std::abs(v)};
}

inline FunctionValue bessel_j(double nu, double x) {
  detail::check_arg(nu, x, "bessel_j");
  return detail::j_raw(nu, x);
}

inline FunctionValue bessel_y(double nu, double x) {
  detail::check_arg(nu, x, "bessel_y");
  detail::check_noninteger(nu, "bessel_y");
  return detail::y_raw(nu, x);
}

inline FunctionValue bessel_i(double nu, double x) {
  detail::check_arg(nu, x, "bessel_i");
  const FunctionValue s = detail::i_scaled_raw(nu, x);
  const double e = std::exp(x);
  return {s.value * e, s.abs_error * e};
}

/// e^{-x} I_nu(x); finite for all x > 0.
inline FunctionValue bessel_i_scaled(double nu, double x) {
  detail::check_arg(nu, x, "bessel_i_scaled");
  return detail::i_scaled_raw(nu, x);
}

inline FunctionValue bessel_k(double nu, double x) {
  detail::check_arg(nu, x, "bessel_k");
  return detail::k_raw(nu, x);
}

// Derivatives with respect to the argument.

inline FunctionValue bessel_j_prime(double nu, double x) {
  detail::check_arg(nu + (nu < 0 ? -1 : 1), x, "bessel_j_prime");
  const FunctionValue a = detail::j_raw(nu - 1.0, x);
  const FunctionValue b = detail::j_raw(nu + 1.0, x);
  return {0.5 * (a.value - b.value), 0.5 * (a.abs_error + b.abs_error)};
}

inline FunctionValue bessel_y_prime(double nu, double x) {
  detail::check_arg(nu + (nu < 0 ? -1 : 1), x, "bessel_y_prime");
  detail::check_noninteger(nu, "bessel_y_prime");
  const FunctionValue a = detail::y_raw(nu - 1.0, x);
  const FunctionValue b = detail::y_raw(nu + 1.0, x);
  return {0.5 * (a.value - b.value), 0.5 * (a.abs_error + b.abs_error)};
}

inline FunctionValue bessel_i_prime(double nu, double x) {
  detail::check_arg(nu + (nu < 0 ? -1 : 1), x, "bessel_i_prime");
  const FunctionValue a = detail::i_scaled_raw(nu - 1.0, x);
  const FunctionValue b = detail::i_scaled_raw(nu + 1.0, x);
  const double e = std::exp(x);
  return {0.5 * (a.value + b.value) * e, 0.5 * (a.abs_error + b.abs_error) * e};
}

inline FunctionValue bessel_k_prime(double nu, double x) {
  detail::check_arg(nu + (nu < 0 ? -1 : 1), x, "bessel_k_prime");
  const FunctionValue a = detail::k_raw(nu - 1.0, x);
  const FunctionValue b = detail::k_raw(nu + 1.0, x);
  return {-0.5 * (a.value + b.value), 0.5 * (a.abs_error + b.abs_error)};
}

/// x K_nu'(x) / K_nu(x), evaluated as nu - x K_{nu+1}/K_nu to avoid the
/// cancellation in the two-sided recurrence near x = 0.
inline double bessel_k_log_derivative(double nu, double x) {
  detail::check_arg(std::abs(nu) + 1.0, x, "bessel_k_log_derivative");
  const double a = std::abs(nu);
  return a - x * detail::k_raw(a + 1.0, x).value / detail::k_raw(a, x).value;
}

/// H^{(kind)}_nu(x) = J_nu(x) +/- i Y_nu(x), kind in {1, 2}.
inline ComplexValue hankel(double nu, int kind, double x) {
  if (kind != 1 && kind != 2) throw DomainError("hankel: kind must be 1 or 2");
  const FunctionValue j = bessel_j(nu, x);
  const FunctionValue y = bessel_y(nu, x);
  const double s = kind == 1 ? 1.0 : -1.0;
  return {{j.value, s * y.value}, std::hypot(j.abs_error, y.abs_error)};
}

inline ComplexValue hankel_prime(double nu, int kind, double x) {
  if (kind != 1 && kind != 2) throw DomainError("hankel_prime: kind must be 1 or 2");
  const FunctionValue j = bessel_j_prime(nu, x);
  const FunctionValue y = bessel_y_prime(nu, x);
  const double s = kind == 1 ? 1.0 : -1.0;
  return {{j.value, s * y.value}, std::hypot(j.abs_error, y.abs_error)};
}

}  // namespace isq::specfun
