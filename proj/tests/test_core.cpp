#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "isq/core.hpp"

using std::numbers::pi;

TEST(DerivedConstants, ExactCases) {
  const auto p = isq::derived_constants(-3.0 / 16.0);
  EXPECT_DOUBLE_EQ(p.omega, 0.25);
  EXPECT_DOUBLE_EQ(p.nu_plus, 0.75);
  EXPECT_DOUBLE_EQ(p.nu_minus, 0.25);
  EXPECT_EQ(p.mode, isq::Mode::kConformal);

  const auto q = isq::derived_constants(-0.24);
  EXPECT_NEAR(q.omega, 0.1, 1e-15);
  EXPECT_NEAR(q.nu_plus, 0.6, 1e-15);
  EXPECT_NEAR(q.nu_minus, 0.4, 1e-15);

  const auto lc = isq::derived_constants(-0.30);
  EXPECT_EQ(lc.mode, isq::Mode::kLimitCycle);
  EXPECT_NEAR(lc.omega, std::sqrt(0.05), 1e-15);
}

TEST(DerivedConstants, CharacteristicEquation) {
  for (int i = 1; i < 50; ++i) {
    const double alpha = -0.25 * i / 50.0;
    const auto p = isq::derived_constants(alpha);
    EXPECT_NEAR(p.nu_plus + p.nu_minus, 1.0, 1e-15);
    EXPECT_NEAR(p.nu_plus * (p.nu_plus - 1) - alpha, 0.0, 1e-14);
    EXPECT_NEAR(p.nu_minus * (p.nu_minus - 1) - alpha, 0.0, 1e-14);
  }
}

TEST(DerivedConstants, RejectsBadAlpha) {
  EXPECT_THROW(isq::derived_constants(-0.25), isq::DomainError);
  EXPECT_THROW(isq::derived_constants(0.1), isq::DomainError);
  EXPECT_THROW(isq::derived_constants(0.0), isq::DomainError);
  EXPECT_THROW(isq::derived_constants(-0.1, 0.0), isq::DomainError);
}

TEST(GammaOfG, LimitsAndBranch) {
  EXPECT_NEAR(isq::gamma_of_g(1e-12), 1.0, 1e-12);
  EXPECT_NEAR(isq::gamma_of_g(pi * pi / 4), 0.0, 1e-15);
  EXPECT_NEAR(isq::gamma_of_g(1.9411), 0.25, 1e-4);
  EXPECT_THROW(isq::gamma_of_g(0.0), isq::DomainError);
  EXPECT_THROW(isq::gamma_of_g(pi * pi), isq::DomainError);
  EXPECT_THROW(isq::gamma_of_g(-1.0), isq::DomainError);
}

TEST(GammaOfG, StrictlyDecreasingAndDerivative) {
  double prev = 1.0;
  for (double g = 0.05; g < pi * pi - 0.05; g += 0.05) {
    const double v = isq::gamma_of_g(g);
    EXPECT_LT(v, prev);
    prev = v;
    const double h = 1e-6;
    const double fd = (isq::gamma_of_g(g + h) - isq::gamma_of_g(g - h)) / (2 * h);
    EXPECT_NEAR(isq::gamma_of_g_prime(g), fd, 1e-6 * (1 + std::abs(fd)));
  }
}

TEST(GammaOfG, ContinuationBelowZero) {
  EXPECT_NEAR(isq::sqrt_cot(-4.0), 2.0 / std::tanh(2.0), 1e-15);
  EXPECT_NEAR(isq::sqrt_cot(1e-10), 1.0, 1e-10);
}

TEST(FixedPoints, KnownValues) {
  const auto p = isq::derived_constants(-3.0 / 16.0);
  const auto fp = isq::fixed_points(p);
  EXPECT_NEAR(fp.g_plus, 0.7136, 5e-5);
  EXPECT_NEAR(fp.g_minus, 1.9411, 5e-5);
  EXPECT_NEAR(isq::gamma_of_g(fp.g_plus), p.nu_plus, 1e-12);
  EXPECT_NEAR(isq::gamma_of_g(fp.g_minus), p.nu_minus, 1e-12);
}

TEST(FixedPoints, OrderedAcrossAlpha) {
  for (int i = 1; i <= 50; ++i) {
    const double alpha = -0.25 + 0.25 * (i - 0.5) / 50.0;
    const auto fp = isq::fixed_points(isq::derived_constants(alpha));
    EXPECT_LT(fp.g_plus, fp.g_minus) << alpha;
    EXPECT_GT(fp.g_plus, 0.0);
    EXPECT_LT(fp.g_minus, pi * pi);
  }
}

TEST(FixedPoints, RejectsLimitCycleMode) {
  EXPECT_THROW(isq::fixed_points(isq::derived_constants(-0.3)), isq::DomainError);
}

TEST(Regulator, SquareWellPotentialIsPiecewise) {
  auto p = isq::derived_constants(-3.0 / 16.0, 2.0);
  const auto r = isq::Regulator::square(0.5, 1.5);
  const double cut = 1.0;
  for (double x : {0.01, 0.3, 0.999}) EXPECT_EQ(isq::potential(p, r, x), -1.5 / (cut * cut));
  for (double x : {1.0, 1.7, 30.0}) EXPECT_EQ(isq::potential(p, r, x), p.alpha / (x * x));
  EXPECT_TRUE(std::isinf(isq::potential(p, r, 0.0)));
}

TEST(Regulator, LinearAndGenericProfiles) {
  const auto lin = isq::Regulator::linear(3.0);
  EXPECT_DOUBLE_EQ(lin.shape(0.25), 0.25);
  isq::TabulatedProfile t({0.0, 0.5, 1.0}, {1.0, 1.0, 1.0});
  const auto gen = isq::Regulator::generic(1.0, 2.0, t);
  EXPECT_DOUBLE_EQ(gen.shape(0.37), 1.0);

  // Monotone data stays monotone between nodes.
  isq::TabulatedProfile m({0.0, 0.2, 0.5, 1.0}, {0.0, 0.1, 0.9, 1.0});
  double prev = -1.0;
  for (double s = 0.0; s <= 1.0; s += 0.01) {
    const double v = m(s);
    EXPECT_GE(v, prev - 1e-15);
    prev = v;
  }
  EXPECT_DOUBLE_EQ(m(0.5), 0.9);
}

TEST(Regulator, Validation) {
  EXPECT_THROW(isq::TabulatedProfile({0.0, 0.5}, {1.0, 1.0}), isq::DomainError);
  EXPECT_THROW(isq::TabulatedProfile({0.0, 0.7, 0.5, 1.0}, {1, 1, 1, 1}), isq::DomainError);
  EXPECT_THROW(isq::Regulator::square(-1.0, 1.0).validate(), isq::DomainError);
  EXPECT_THROW(isq::Regulator::square(1.0, -1.0).validate(), isq::DomainError);
  EXPECT_NO_THROW(isq::Regulator::square(1.0, 0.0).validate());
}
