#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "isq/propagator.hpp"

using namespace isq;

namespace {

const ModelParams kP = derived_constants(-3.0 / 16.0);

double g_star(int sign) { return sign > 0 ? fixed_points(kP).g_plus : fixed_points(kP).g_minus; }

}  // namespace

// mpmath, 30 digits: sqrt(xy)/(2t) exp(-(x^2+y^2)/4t) I_{+-1/4}(xy/2t)
TEST(FixedPointPropagator, MatchesOracle) {
  struct Row {
    int sign;
    double x, y, t, value;
  };
  const Row rows[] = {
      {+1, 0.5, 0.7, 0.3, 0.46141287015937204651},  {+1, 1, 1, 1, 0.24857930220086707886},
      {+1, 2, 3, 10, 0.061856866259364457168},      {+1, 1, 4, 0.05, 3.6198395662425215493e-20},
      {-1, 0.5, 0.7, 0.3, 0.65964275689969330939},  {-1, 1, 1, 1, 0.37967915385151317529},
      {-1, 2, 3, 10, 0.11953967454326885062},       {-1, 1, 4, 0.05, 3.6198395662425215493e-20},
  };
  for (const auto& r : rows) {
    EXPECT_NEAR(fixed_point_propagator(kP, r.sign, r.x, r.y, r.t) / r.value, 1.0, 1e-12)
        << r.sign << " " << r.x << " " << r.y << " " << r.t;
  }
}

TEST(FixedPointPropagator, SymmetricAndPositive) {
  for (int s : {+1, -1}) {
    for (double x : {0.1, 1.0, 3.0}) {
      for (double y : {0.2, 2.0}) {
        for (double t : {0.01, 1.0, 100.0}) {
          const double a = fixed_point_propagator(kP, s, x, y, t);
          EXPECT_GT(a, 0.0);
          EXPECT_DOUBLE_EQ(a, fixed_point_propagator(kP, s, y, x, t));
        }
      }
    }
  }
}

TEST(FixedPointPropagator, ShortTimeApproachesFreeKernel) {
  for (int s : {+1, -1}) {
    const double x = 2.0, y = 2.1, t = 1e-4;
    const double free = std::exp(-(x - y) * (x - y) / (4 * t)) / std::sqrt(4 * std::numbers::pi * t);
    EXPECT_NEAR(fixed_point_propagator(kP, s, x, y, t) / free, 1.0, 1e-3);
  }
}

TEST(FixedPointPropagator, ChapmanKolmogorov) {
  for (int s : {+1, -1}) {
    const double x = 0.7, y = 1.3, t1 = 0.4, t2 = 0.9;
    const auto conv = numeric::integrate_to_infinity(
        [&](double z) { return fixed_point_propagator(kP, s, x, z, t1) * fixed_point_propagator(kP, s, z, y, t2); },
        0.0, 1e-12);
    EXPECT_NEAR(conv.value / fixed_point_propagator(kP, s, x, y, t1 + t2), 1.0, 1e-9);
  }
}

TEST(FixedPointPropagator, LongTimeSlope) {
  for (int s : {+1, -1}) {
    const double nu = s > 0 ? kP.nu_plus : kP.nu_minus;
    const double x = 1.0, y = 1.5, t = 1e4;
    const double h = 1e-3;
    const double slope = (std::log(fixed_point_propagator(kP, s, x, y, t * std::exp(h))) -
                          std::log(fixed_point_propagator(kP, s, x, y, t * std::exp(-h)))) /
                         (2 * h);
    EXPECT_NEAR(slope / -(0.5 + nu), 1.0, 0.01);
    EXPECT_NEAR(fixed_point_propagator(kP, s, x, y, t) / fixed_point_long_time(kP, s, x, y, t), 1.0, 1e-3);
  }
}

TEST(Propagator, QuadratureMatchesClosedFormNearFixedPoints) {
  for (int s : {+1, -1}) {
    const Regulator r = Regulator::square(1e-4, g_star(s));
    for (double x : {0.5, 1.0, 2.0}) {
      for (double t : {0.1, 1.0, 10.0}) {
        const double y = 1.3 * x;
        const auto q = propagator_quadrature(kP, r, x, y, t);
        EXPECT_NEAR(q.value / fixed_point_propagator(kP, s, x, y, t), 1.0, 1e-3) << s << " " << x << " " << t;
      }
    }
  }
}

TEST(Propagator, QuadratureLongTimeSlope) {
  for (int s : {+1, -1}) {
    const Regulator r = Regulator::square(1e-4, g_star(s));
    const double nu = s > 0 ? kP.nu_plus : kP.nu_minus;
    const double t = 2e3, h = 1e-2;
    const double slope = (std::log(propagator_quadrature(kP, r, 1, 1, t * std::exp(h)).value) -
                          std::log(propagator_quadrature(kP, r, 1, 1, t * std::exp(-h)).value)) /
                         (2 * h);
    EXPECT_NEAR(slope / -(0.5 + nu), 1.0, 0.01);
  }
}

TEST(Propagator, SymmetricInArguments) {
  const Regulator r = Regulator::square(1e-2, 1.2);
  for (auto norm : {Normalization::kSpectral, Normalization::kFrozen}) {
    PropagatorOptions o;
    o.norm = norm;
    const double a = propagator_quadrature(kP, r, 0.3, 1.7, 0.5, o).value;
    const double b = propagator_quadrature(kP, r, 1.7, 0.3, 0.5, o).value;
    EXPECT_NEAR(a / b, 1.0, 1e-11);
  }
}

TEST(Propagator, ErrorEstimateFlagsUnresolvedValues) {
  const Regulator r = Regulator::square(1e-4, g_star(+1));
  const auto q = propagator_quadrature(kP, r, 5.0, 6.5, 0.01);
  EXPECT_GT(q.quad_error, std::abs(fixed_point_propagator(kP, +1, 5.0, 6.5, 0.01)));
}

TEST(Propagator, RejectsBadArguments) {
  const Regulator r = Regulator::square(1e-2, 1.0);
  EXPECT_THROW(propagator_quadrature(kP, r, 0.005, 1.0, 1.0), DomainError);
  EXPECT_THROW(propagator_quadrature(kP, r, 1.0, 0.01, 1.0), DomainError);
  EXPECT_THROW(propagator_quadrature(kP, r, 1.0, 1.0, 0.0), DomainError);
  EXPECT_THROW(propagator_quadrature(kP, Regulator::square(1e-2, 3.0), 1.0, 1.0, 1.0), DomainError);
  EXPECT_THROW(propagator_quadrature(kP, Regulator::linear(1.0), 2.0, 2.0, 1.0), DomainError);
  EXPECT_THROW(propagator_quadrature(derived_constants(-0.3), r, 1.0, 1.0, 1.0), DomainError);
  EXPECT_THROW(check_exact_law(kP, r, 1, 1, 1, 0.5), DomainError);
}

TEST(Propagator, FrozenNormalizationIsUnityAtFixedPoint) {
  for (int s : {+1, -1}) EXPECT_NEAR(frozen_normalization(kP, s, g_star(s)), 1.0, 1e-13);
}

TEST(Propagator, ExactLawHoldsForBothNormalizations) {
  for (auto norm : {Normalization::kSpectral, Normalization::kFrozen}) {
    PropagatorOptions o;
    o.norm = norm;
    for (double g : {0.9, 1.4}) {
      for (double lambda : {2.0, 5.0}) {
        const auto c = check_exact_law(kP, Regulator::square(1e-2, g), 1.0, 1.2, 0.8, lambda, o);
        EXPECT_LT(c.residual, 1e-9) << g << " " << lambda;
      }
    }
  }
}

TEST(Propagator, AsymptoticLawImprovesAsCutoffShrinks) {
  double prev = 1.0;
  for (double b : {1e-2, 1e-3, 1e-4}) {
    const auto c = check_asymptotic_law(kP, b, 1e-3, +1, 1, 1, 1, 2);
    EXPECT_FALSE(c.regime_warning) << c.note;
    EXPECT_LT(c.residual, prev) << b;
    prev = c.residual;
  }
  EXPECT_LT(prev, 1e-6);
}

TEST(Propagator, CallanSymanzikResidualShrinks) {
  double prev = 1.0;
  for (double b : {1e-2, 1e-3, 1e-4}) {
    const double r = std::abs(callan_symanzik_residual(kP, b, 1e-3, +1, 1, 1, 1).residual);
    EXPECT_LT(r, prev) << b;
    prev = r;
  }
  EXPECT_LT(prev, 1e-6);
}

TEST(Propagator, ScalingRelationNearInfraredPoint) {
  const auto c = check_scaling_relation(kP, 1e-3, 1e-3, -1, 2.0, 1.0, 1.0, 1.0, frozen_options(-1));
  EXPECT_LT(c.residual, 1e-3);
}

TEST(Propagator, RegimeWarningForLargeCoupling) {
  const auto c = check_asymptotic_law(kP, 1e-2, 0.2, +1, 1, 1, 1, 2);
  EXPECT_TRUE(c.regime_warning);
}

TEST(ScalingCollapse, RecoversBothExponents) {
  const auto b = numeric::geomspace(1e-6, 1e-2, 9);
  const std::vector<double> u{1e-3, 3e-3, 1e-2};
  const auto tab = scaling_collapse(kP, b, u, 1e-2, 1.0, 1.0, 100.0);
  EXPECT_NEAR(tab.p_exp / kP.nu_plus, 1.0, 0.02);
  EXPECT_NEAR(tab.q_exp / kP.nu_minus, 1.0, 0.02);
  EXPECT_LT(tab.spread, 0.05);
  EXPECT_LT(tab.row_spread, 0.05);
  EXPECT_EQ(tab.points.size(), b.size() * u.size());
  for (std::size_t i = 1; i < tab.points.size(); ++i) EXPECT_LE(tab.points[i - 1].z, tab.points[i].z);
}

TEST(ScalingCollapse, ReferenceCouplingOnlyRescalesCoefficient) {
  const auto b = numeric::geomspace(1e-6, 1e-2, 9);
  const std::vector<double> u{1e-3, 3e-3, 1e-2};
  const auto a = scaling_collapse(kP, b, u, 1e-2, 1.0, 1.0, 100.0);
  const auto c = scaling_collapse(kP, b, u, 3e-3, 1.0, 1.0, 100.0);
  EXPECT_NEAR(a.p_exp, c.p_exp, 1e-6);
  EXPECT_NEAR(a.q_exp, c.q_exp, 1e-4);
  EXPECT_NEAR(c.c / a.c, 0.3, 0.01);
}

TEST(ScalingCollapse, UnperturbedRowIsPowerLaw) {
  // at the UV point the frozen long-time form is t^{-1/2} (xy / b^2)^{nu_+}
  const auto o = frozen_options(+1);
  const Regulator r = Regulator::square(1e-4, g_star(+1));
  const double t = 1e3;
  const double base = propagator_quadrature(kP, r, 1.0, 1.0, t, o).value;
  for (double x : {1.5, 2.0}) {
    const double v = propagator_quadrature(kP, r, x, 1.0, t, o).value;
    EXPECT_NEAR(std::log(v / base) / std::log(x), kP.nu_plus, 2e-3);
  }
  const double coarse = propagator_quadrature(kP, r.with_b(1e-3), 1.0, 1.0, t, o).value;
  EXPECT_NEAR(std::log(base / coarse) / std::log(10.0), 2 * kP.nu_plus, 2e-3);
  const double later = propagator_quadrature(kP, r, 1.0, 1.0, 4 * t, o).value;
  EXPECT_NEAR(std::log(later / base) / std::log(4.0), -0.5, 2e-3);
}
