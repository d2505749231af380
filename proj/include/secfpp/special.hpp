#pragma once

// Scalar special functions used by the leakage analysis. All real-valued,
// double precision, natural logarithms.

#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <utility>

#include "secfpp/error.hpp"

namespace secfpp::special {

#ifdef SECFPP_FAULT_INJECT
// deliberately wrong constant for the fault-injection build
inline constexpr double kEulerGamma = 0.5772156649015328606 + 1e-4;
#else
inline constexpr double kEulerGamma = 0.5772156649015328606;
#endif

inline constexpr double kLn2 = std::numbers::ln2;
inline constexpr double kPi = std::numbers::pi;

inline double digamma(double x) {
  if (!std::isfinite(x)) throw Error(ErrorCode::DomainError, "digamma of non-finite argument");
  if (x <= 0 && x == std::floor(x)) {
    throw Error(ErrorCode::DomainError, "digamma pole at " + std::to_string(x));
  }
  if (x < 0) return digamma(1.0 - x) - kPi / std::tan(kPi * x);
  double acc = 0;
  while (x < 10) {
    acc -= 1.0 / x;
    x += 1;
  }
  const double inv2 = 1.0 / (x * x);
  // Bernoulli tail: B2k / (2k x^2k) for k = 1..7
  const double tail =
      inv2 * (1.0 / 12 -
              inv2 * (1.0 / 120 -
                      inv2 * (1.0 / 252 -
                              inv2 * (1.0 / 240 - inv2 * (1.0 / 132 - inv2 * (691.0 / 32760 - inv2 / 12.0))))));
  return acc + std::log(x) - 0.5 / x - tail;
}

inline double log_gamma(double x) {
  if (!(x > 0) || !std::isfinite(x)) throw Error(ErrorCode::DomainError, "log_gamma needs a positive argument");
  return std::lgamma(x);
}

// E1(z) = -Ei(-z) for z > 0.
inline double expint_e1(double z) {
  if (!(z > 0)) throw Error(ErrorCode::DomainError, "E1 needs a positive argument");
  if (z <= 1.0) {
    double term = 1.0, sum = 0.0;
    for (int k = 1; k < 200; ++k) {
      term *= -z / k;
      const double add = term / k;
      sum += add;
      if (std::fabs(add) < 1e-18 * std::fabs(sum)) break;
    }
    return -kEulerGamma - std::log(z) - sum;
  }
  // modified Lentz on the continued fraction e^-z / (z + 1 - 1/(z + 3 - 4/(z + 5 - ...)))
  const double tiny = 1e-300;
  double b = z + 1.0, c = 1.0 / tiny, d = 1.0 / b, h = d;
  for (int i = 1; i < 10000; ++i) {
    const double a = -static_cast<double>(i) * i;
    b += 2.0;
    d = 1.0 / (a * d + b);
    c = b + a / c;
    const double delta = c * d;
    h *= delta;
    if (std::fabs(delta - 1.0) < 1e-16) return h * std::exp(-z);
  }
  throw Error(ErrorCode::PrecisionLoss, "E1 continued fraction did not converge");
}

inline double exp_integral_Ei(double x) {
  if (x == 0 || !std::isfinite(x)) throw Error(ErrorCode::DomainError, "Ei is undefined at 0");
  if (x < 0) return -expint_e1(-x);
  if (x <= 40) {
    double term = 1.0, sum = 0.0;
    for (int k = 1; k < 500; ++k) {
      term *= x / k;
      sum += term / k;
      if (term / k < 1e-18 * sum) break;
    }
    return kEulerGamma + std::log(x) + sum;
  }
  // asymptotic e^x/x * sum k!/x^k, truncated at the smallest term
  double term = 1.0, sum = 1.0;
  for (int k = 1; k < 60; ++k) {
    const double next = term * k / x;
    if (next > term) break;
    term = next;
    sum += term;
    if (term < 1e-17 * sum) break;
  }
  return std::exp(x) / x * sum;
}

// erfi(x) = -i erf(ix) = 2/sqrt(pi) * sum x^(2k+1) / (k! (2k+1))
inline double erfi(double x) {
  if (!std::isfinite(x)) throw Error(ErrorCode::DomainError, "erfi of non-finite argument");
  if (x < 0) return -erfi(-x);
  const double two_over_sqrtpi = 2.0 / std::sqrt(kPi);
  if (x <= 5.5) {
    const double x2 = x * x;
    double term = x, sum = x;
    for (int k = 1; k < 400; ++k) {
      term *= x2 / k;
      const double add = term / (2 * k + 1);
      sum += add;
      if (add < 1e-17 * sum) break;
    }
    return two_over_sqrtpi * sum;
  }
  // e^{x^2} * Dawson(x) with the asymptotic Dawson expansion
  const double inv = 1.0 / (2.0 * x * x);
  double term = 1.0, sum = 1.0;
  for (int k = 1; k < 100; ++k) {
    const double next = term * (2 * k - 1) * inv;
    if (next > term) break;
    term = next;
    sum += term;
    if (term < 1e-17 * sum) break;
  }
  const double dawson = sum / (2.0 * x);
  return two_over_sqrtpi * std::exp(x * x) * dawson;
}

// 2F2(a1, a2; b1, b2; x) by its ascending series in extended precision with
// compensated summation. Cancellation is tracked through the largest term.
inline double pFq_2F2(double a1, double a2, double b1, double b2, double x, double rel_tol = 1e-9,
                      int max_terms = 20000) {
  if ((b1 <= 0 && b1 == std::floor(b1)) || (b2 <= 0 && b2 == std::floor(b2))) {
    throw Error(ErrorCode::DomainError, "2F2 lower parameter is a non-positive integer");
  }
  if (!std::isfinite(x)) throw Error(ErrorCode::DomainError, "2F2 of non-finite argument");
  long double term = 1.0L, sum = 1.0L, comp = 0.0L, biggest = 1.0L;
  bool converged = false;
  for (int k = 0; k < max_terms; ++k) {
    term *= (static_cast<long double>(a1) + k) * (static_cast<long double>(a2) + k) /
            ((static_cast<long double>(b1) + k) * (static_cast<long double>(b2) + k) * (k + 1)) * x;
    const long double y = term - comp;
    const long double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
    biggest = std::max(biggest, std::fabs(term));
    if (term == 0 || (std::fabs(term) < 1e-21L * std::fabs(sum) && k > std::fabs(x))) {
      converged = true;
      break;
    }
  }
  const long double err = biggest * std::numeric_limits<long double>::epsilon() * 4;
  if (!converged || err > rel_tol * std::fabs(sum)) {
    throw Error(ErrorCode::PrecisionLoss, "2F2 series at x = " + std::to_string(x) + " cannot reach relative " +
                                              std::to_string(rel_tol));
  }
  return static_cast<double>(sum);
}

// Regularized incomplete gamma; returns {P(a, x), Q(a, x)} with whichever
// side is computed directly kept accurate.
inline std::pair<double, double> gamma_pq(double a, double x) {
  if (!(a > 0) || x < 0) throw Error(ErrorCode::DomainError, "incomplete gamma needs a > 0, x >= 0");
  if (x == 0) return {0.0, 1.0};
  const double log_pref = a * std::log(x) - x - std::lgamma(a);
  if (x < a + 1) {
    double ap = a, del = 1.0 / a, sum = del;
    for (int n = 0; n < 10000; ++n) {
      ap += 1;
      del *= x / ap;
      sum += del;
      if (std::fabs(del) < std::fabs(sum) * 1e-16) break;
    }
    const double p = sum * std::exp(log_pref);
    return {p, 1.0 - p};
  }
  const double tiny = 1e-300;
  double b = x + 1 - a, c = 1 / tiny, d = 1 / b, h = d;
  for (int i = 1; i < 10000; ++i) {
    const double an = -i * (i - a);
    b += 2;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1 / d;
    const double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1) < 1e-16) break;
  }
  const double q = std::exp(log_pref) * h;
  return {1.0 - q, q};
}

inline double gamma_p(double a, double x) { return gamma_pq(a, x).first; }
inline double gamma_q(double a, double x) { return gamma_pq(a, x).second; }

// Upper-tail probability of a chi-square variate with `dof` degrees of freedom.
inline double chi2_sf(double stat, double dof) { return gamma_q(dof / 2.0, stat / 2.0); }

}  // namespace secfpp::special
