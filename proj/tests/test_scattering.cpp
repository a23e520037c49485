#include <gtest/gtest.h>

#include <boost/random/mersenne_twister.hpp>
#include <boost/random/uniform_real_distribution.hpp>
#include <cmath>
#include <numbers>

#include "isq/scattering.hpp"
#include "isq/spectrum.hpp"

using namespace isq;

namespace {

const ModelParams kP = derived_constants(-3.0 / 16.0);

}  // namespace

TEST(Reflection, UnitModulusAtRandomPoints) {
  boost::random::mt19937 rng(20240611);
  boost::random::uniform_real_distribution<double> lmu(std::log(1e-6), std::log(3.0));
  boost::random::uniform_real_distribution<double> ug(0.05, 6.0);
  int tested = 0;
  while (tested < 100) {
    const double mu = std::exp(lmu(rng)), g = ug(rng);
    if (mu * mu + g >= 0.99 * std::numbers::pi * std::numbers::pi) continue;
    const auto r = reflection(kP, Regulator::square(1.0, g), mu);
    EXPECT_NEAR(std::abs(r.r), 1.0, 1e-12) << mu << " " << g;
    ++tested;
  }
}

TEST(Reflection, AgreesWithFarFieldOfContinuumState) {
  // psi ~ (w e^{ikx} + conj(w) e^{-ikx}) / 2 up to normalization, so r = w / conj(w)
  for (double g : {0.5, 1.0, 1.9}) {
    for (double k : {1e-3, 0.3, 2.0}) {
      const Regulator R = Regulator::square(1.0, g);
      const auto c = continuum_coefficients(kP, R, k * k);
      const auto w = spectrum_detail::far_amplitude(kP.omega, c.a_plus, c.a_minus);
      EXPECT_LT(std::abs(reflection(kP, R, k).r - w / std::conj(w)), 1e-12) << g << " " << k;
    }
  }
}

TEST(Reflection, DependsOnlyOnMu) {
  const auto a = reflection(kP, Regulator::square(1.0, 1.2), 0.2);
  const auto b = reflection(kP, Regulator::square(0.01, 1.2), 20.0);
  EXPECT_DOUBLE_EQ(a.mu, b.mu);
  EXPECT_LT(std::abs(a.r - b.r), 1e-14);
}

TEST(Reflection, PhaseShiftConsistentWithAmplitude) {
  using namespace std::complex_literals;
  for (double g : {0.3, 1.0, 1.7, 4.0}) {
    for (double mu : {1e-4, 0.1, 1.5}) {
      const Regulator R = Regulator::square(1.0, g);
      const auto r = reflection(kP, R, mu).r;
      const double d = phase_shift(kP, R, mu).delta;
      EXPECT_LT(std::abs(r + std::exp(2.0i * d)), 1e-12);
      EXPECT_GT(d, -std::numbers::pi / 2);
      EXPECT_LE(d, std::numbers::pi / 2);
    }
  }
}

TEST(Reflection, RejectsBadArguments) {
  EXPECT_THROW(reflection(kP, Regulator::square(1.0, 1.0), 0.0), DomainError);
  EXPECT_THROW(reflection(kP, Regulator::square(1.0, 10.0), 0.1), DomainError);
  EXPECT_THROW(reflection(kP, Regulator::linear(1.0), 0.1), DomainError);
  EXPECT_THROW(phase_shift(derived_constants(-0.4), Regulator::square(1.0, 1.0), 0.1), DomainError);
}

TEST(Reflection, PoleMatchesBoundState) {
  const double gm = fixed_points(kP).g_minus;
  for (double dg : {1e-2, 0.1, 0.3}) {
    const Regulator R = Regulator::square(1.0, gm + dg);
    const auto pole = reflection_pole_energy(kP, R);
    const auto bs = bound_state(kP, R);
    ASSERT_TRUE(pole && bs);
    EXPECT_NEAR(*pole / bs->energy, 1.0, 1e-2);
  }
  EXPECT_FALSE(reflection_pole_energy(kP, Regulator::square(1.0, gm - 0.1)));
}

TEST(PhaseShift, LeadingTermAtLongWavelength) {
  // close to g_- the expansion parameter is mu^{2w}/(gamma - nu_-), so stay away from it
  for (double g : {0.8, 1.0, 1.5}) {
    const auto e = small_mu_expansion(kP, g);
    const double mu = 1e-8;
    const double d = phase_shift(kP, Regulator::square(1.0, g), mu).delta;
    EXPECT_NEAR(d - e.coefficient * std::pow(mu, 2 * kP.omega), std::numbers::pi / 8, 1e-6) << g;
  }
  EXPECT_NEAR(small_mu_expansion(kP, 1.0).leading, std::numbers::pi / 8, 1e-15);
}

TEST(PhaseShift, LeadingTermConvergesAsMuShrinks) {
  const double d0 = std::numbers::pi / 8;
  const double coef = small_mu_expansion(kP, 1.0).coefficient;
  double prev = 1.0;
  for (double mu : {1e-4, 1e-6, 1e-8, 1e-10}) {
    const double err = std::abs(phase_shift(kP, Regulator::square(1.0, 1.0), mu).delta - d0);
    EXPECT_LT(err, prev);
    EXPECT_LT(err, 1.01 * std::abs(coef) * std::pow(mu, 2 * kP.omega));
    prev = err;
  }
}

TEST(PhaseShift, SubleadingCoefficient) {
  const auto e = small_mu_expansion(kP, 1.0);
  const double mu = 1e-3;
  const double measured =
      (phase_shift(kP, Regulator::square(1.0, 1.0), mu).delta - e.leading) / std::pow(mu, 2 * kP.omega);
  EXPECT_NEAR(measured / e.coefficient, 1.0, 0.01);
  // two-point slope of delta - leading
  const double d1 = phase_shift(kP, Regulator::square(1.0, 1.0), mu).delta - e.leading;
  const double d2 = phase_shift(kP, Regulator::square(1.0, 1.0), mu / 16).delta - e.leading;
  EXPECT_NEAR(std::log(d1 / d2) / std::log(16.0), 0.5, 0.01);
}

TEST(PhaseShift, CoefficientVanishesAtUltravioletPoint) {
  EXPECT_NEAR(small_mu_expansion(kP, fixed_points(kP).g_plus).coefficient, 0.0, 1e-14);
}

TEST(PhaseShift, PositiveForAttractiveWellsAtLongWavelength) {
  const auto fp = fixed_points(kP);
  for (int i = 0; i <= 10; ++i) {
    const double g = fp.g_plus + (fp.g_minus - fp.g_plus) * i / 10.0;
    EXPECT_GT(phase_shift(kP, Regulator::square(1.0, g), 1e-3).delta, 0.0) << g;
  }
}

TEST(PhaseShift, SweepIsContinuous) {
  const Regulator R = Regulator::square(1.0, 1.9);
  const auto ks = numeric::geomspace(1e-4, 2.5, 60);
  const auto sweep = phase_shift_sweep(kP, R, ks);
  ASSERT_EQ(sweep.size(), ks.size());
  EXPECT_NEAR(sweep.back().delta, phase_shift(kP, R, 2.5).delta, 1e-15);
  for (std::size_t i = 1; i < sweep.size(); ++i) {
    EXPECT_LT(sweep[i - 1].k, sweep[i].k);
    EXPECT_LT(std::abs(sweep[i].delta - sweep[i - 1].delta), 0.5);
    const double diff = sweep[i].delta - phase_shift(kP, R, sweep[i].k).delta;
    EXPECT_NEAR(diff / std::numbers::pi, std::round(diff / std::numbers::pi), 1e-12);
  }
}

TEST(PhaseCurve, PhaseIsConstantAlongCurve) {
  const auto c = constant_phase_curve(kP, 0.5, 1.0, 1e-8);
  ASSERT_TRUE(c.complete) << c.note;
  const double d0 = phase_shift(kP, Regulator::square(1.0, 1.0), 0.5).delta;
  for (const auto& q : c.points) {
    EXPECT_NEAR(phase_shift(kP, Regulator::square(1.0, q.g), q.mu).delta, d0, 1e-8) << q.mu;
  }
}

TEST(PhaseCurve, FlowsToInfraredPoint) {
  const double gm = fixed_points(kP).g_minus;
  for (double g0 : {0.9, 1.5}) {
    const auto c = constant_phase_curve(kP, 0.1, g0, 1e-12, 12);
    ASSERT_TRUE(c.complete);
    double prev = 10.0;
    for (const auto& q : c.points) {
      const double dist = std::abs(q.g - gm);
      EXPECT_LT(dist, prev);
      prev = dist;
    }
    // approach rate mu^{2w}
    const auto& a = c.points[c.points.size() - 2];
    const auto& b = c.points.back();
    EXPECT_NEAR(std::log((a.g - gm) / (b.g - gm)) / std::log(a.mu / b.mu), 2 * kP.omega, 0.01);
  }
}

TEST(PhaseCurve, TangentReproducesBetaFunction) {
  const double mu = 1e-4;
  for (double g : {0.8, 1.0, 1.5, 1.9}) {
    const double dgamma = gamma_of_g_prime(g) * mu * phase_vector_field(kP, mu, g);
    EXPECT_NEAR(dgamma / beta(kP, gamma_of_g(g)), 1.0, 0.01) << g;
  }
}

TEST(PhaseCurve, VectorFieldKeepsAmplitudeFixed) {
  // R_mu + f R_g = 0 by central differences of the phase shift
  for (double g : {0.7, 1.3}) {
    for (double mu : {0.05, 0.6}) {
      const double h = 1e-5;
      auto D = [&](double m, double gg) { return phase_shift(kP, Regulator::square(1.0, gg), m).delta; };
      const double dmu = (D(mu + h, g) - D(mu - h, g)) / (2 * h);
      const double dg = (D(mu, g + h) - D(mu, g - h)) / (2 * h);
      EXPECT_NEAR(dmu + phase_vector_field(kP, mu, g) * dg, 0.0, 1e-7) << g << " " << mu;
    }
  }
}

TEST(PhaseCurve, ReportsBranchExit) {
  const auto c = constant_phase_curve(kP, 0.1, 9.5, 5.0);
  EXPECT_FALSE(c.complete);
  EXPECT_FALSE(c.note.empty());
  EXPECT_GE(c.points.size(), 1u);
  EXPECT_THROW(constant_phase_curve(kP, 0.0, 1.0, 1e-3), DomainError);
}
