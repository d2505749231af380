#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/expint.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/special_functions/hypergeometric_pFq.hpp>

#include <cmath>

#include "secfpp/special.hpp"

using namespace secfpp;

namespace {

double rel_err(double got, double want) { return std::fabs(got - want) / std::max(1.0, std::fabs(want)); }

}  // namespace

TEST(Special, DigammaAgainstBoost) {
  for (double x : {1e-3, 0.1, 0.5, 1.0, 1.5, 2.0, 3.7, 10.0, 42.5, 1e3, 1e6}) {
    EXPECT_LT(rel_err(special::digamma(x), boost::math::digamma(x)), 1e-12) << x;
  }
  EXPECT_NEAR(special::digamma(1.0), -special::kEulerGamma, 1e-14);
}

TEST(Special, ExponentialIntegralsAgainstBoost) {
  for (double z : {1e-6, 0.01, 0.3, 1.0, 2.0, 5.0, 20.0, 80.0}) {
    EXPECT_LT(std::fabs(special::expint_e1(z) - boost::math::expint(1, z)) / boost::math::expint(1, z), 1e-12) << z;
  }
  // Ei(-x) = -E1(x) is the branch the expected-log family needs
  for (double x : {1e-4, 0.2, 1.0, 3.0, 15.0, 50.0, 300.0}) {
    EXPECT_LT(std::fabs(special::exp_integral_Ei(-x) - boost::math::expint(-x)) / std::fabs(boost::math::expint(-x)),
              1e-12)
        << x;
  }
  for (double x : {0.1, 1.0, 10.0, 60.0}) {
    EXPECT_LT(std::fabs(special::exp_integral_Ei(x) - boost::math::expint(x)) / std::fabs(boost::math::expint(x)),
              1e-12)
        << x;
  }
}

TEST(Special, ErfiAgainstQuadrature) {
  for (double x : {0.0, 0.05, 0.5, 1.0, 2.5, 5.0, 5.4, 5.6, 8.0, 15.0}) {
    // erfi(x) = 2/sqrt(pi) e^{x^2} int_0^x e^{t^2 - x^2} dt, scaled to stay finite
    const double scaled = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
        [x](double t) { return std::exp(t * t - x * x); }, 0.0, x, 15, 1e-14);
    const double want = 2.0 / std::sqrt(special::kPi) * scaled * std::exp(x * x);
    EXPECT_LT(std::fabs(special::erfi(x) - want) / std::max(1e-300, std::fabs(want)), 1e-11) << x;
  }
  EXPECT_EQ(special::erfi(-1.5), -special::erfi(1.5));
}

TEST(Special, Hypergeometric2F2AgainstBoost) {
  for (double x : {-0.01, -0.5, -2.0, -7.5, -20.0, 0.3, 3.0}) {
    const double want = boost::math::hypergeometric_pFq({1.0, 1.0}, {1.5, 2.0}, x);
    EXPECT_LT(rel_err(special::pFq_2F2(1, 1, 1.5, 2, x), want), 1e-10) << x;
  }
  const double want = boost::math::hypergeometric_pFq({0.5, 2.5}, {3.0, 1.25}, -4.0);
  EXPECT_LT(rel_err(special::pFq_2F2(0.5, 2.5, 3.0, 1.25, -4.0), want), 1e-10);
}

TEST(Special, Hypergeometric2F2ReportsPrecisionLoss) {
  try {
    (void)special::pFq_2F2(1, 1, 1.5, 2, -200.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::PrecisionLoss);
  }
  EXPECT_THROW((void)special::pFq_2F2(1, 1, -2.0, 2, 1.0), Error);
}

TEST(Special, IncompleteGammaAgainstBoost) {
  for (double a : {0.5, 1.0, 4.0, 31.5, 100.0}) {
    for (double x : {0.01, 0.7, 3.0, 30.0, 120.0}) {
      EXPECT_NEAR(special::gamma_q(a, x), boost::math::gamma_q(a, x), 1e-13) << a << " " << x;
      EXPECT_NEAR(special::gamma_p(a, x), boost::math::gamma_p(a, x), 1e-13) << a << " " << x;
    }
  }
  // chi-square(2) tail is exp(-x/2)
  EXPECT_NEAR(special::chi2_sf(3.0, 2), std::exp(-1.5), 1e-15);
}

TEST(Special, LogGammaAgainstBoost) {
  for (double x : {0.25, 1.0, 2.5, 17.0, 300.0}) {
    EXPECT_LT(rel_err(special::log_gamma(x), boost::math::lgamma(x)), 1e-13) << x;
  }
}
