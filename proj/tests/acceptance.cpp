// Acceptance run: one PASS/FAIL line per criterion, with wall time against its
// budget. Exit status is the number of failures.

#include <boost/random/mersenne_twister.hpp>
#include <boost/random/uniform_real_distribution.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>

#include "isq/isq.hpp"

using namespace isq;

namespace {

const ModelParams kP = derived_constants(-3.0 / 16.0);

struct Outcome {
  bool ok = true;
  std::ostringstream detail;

  void check(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      detail << "[failed: " << what << "] ";
    }
  }
};

double rel(double a, double b) { return std::abs(a / b - 1.0); }

void fixed_points_check(Outcome& o) {
  RunSpec s;
  s.command = "fixed-points";
  s.params = kP;
  const auto r = cli::run(s, false).summary["result"];
  const double gp = r["g_plus"].get<double>(), gm = r["g_minus"].get<double>();
  o.detail << "g+ = " << gp << ", g- = " << gm;
  o.check(std::abs(gp - 0.7136) <= 5e-4, "g+");
  o.check(std::abs(gm - 1.9411) <= 5e-4, "g-");
}

void eigenvalue_check(Outcome& o) {
  for (double alpha : {-3.0 / 16.0, -0.05, -0.2}) {
    const auto p = derived_constants(alpha);
    for (int sign : {+1, -1}) {
      const double nu = sign > 0 ? p.nu_plus : p.nu_minus;
      const double h = 1e-4;
      const double fd = (beta(p, nu + h) - beta(p, nu - h)) / (2 * h);
      o.check(std::abs(fd + sign * 2 * p.omega) <= 1e-10, "slope at alpha " + std::to_string(alpha));
      if (alpha == kP.alpha) o.detail << (sign > 0 ? "y+ = " : ", y- = ") << fd;
    }
  }
}

void exponent_check(Outcome& o) {
  const auto sq = binding_exponent(kP, Regulator::square(1.0, 0.0));
  const auto lin = binding_exponent(kP, Regulator::linear(0.0));
  o.detail << "square " << sq.exponent << " (g* " << sq.g_star << "), linear " << lin.exponent << " (g* "
           << lin.g_star << ")";
  o.check(std::abs(sq.exponent - 4.0) <= 0.04, "square slope");
  o.check(std::abs(lin.exponent - 4.0) <= 0.04, "linear slope");
  o.check(std::abs(sq.g_star - lin.g_star) > 1e-3, "distinct g*");
  o.check(rel(sq.amplitude, lin.amplitude) > 1e-3, "distinct amplitudes");
}

void amplitude_check(Outcome& o) {
  const auto sq = binding_exponent(kP, Regulator::square(1.0, 0.0));
  const double c = binding_constant(kP);
  o.detail << "fitted " << sq.amplitude << ", closed form " << c << ", rel " << rel(sq.amplitude, c);
  o.check(rel(sq.amplitude, c) <= 0.02, "amplitude");
}

void exact_law_check(Outcome& o) {
  double worst = 0.0;
  for (double lambda : {2.0, 5.0}) {
    const auto c = check_exact_law(kP, Regulator::square(0.1, 1.0), 1.0, 1.0, 1.0, lambda);
    worst = std::max(worst, c.residual);
  }
  o.detail << "max residual " << worst;
  o.check(worst <= 1e-6, "residual");
}

void fixed_point_propagator_check(Outcome& o) {
  const auto fp = fixed_points(kP);
  double worst = 0.0, worst_slope = 0.0;
  for (int s : {+1, -1}) {
    const Regulator r = Regulator::square(1e-4, s > 0 ? fp.g_plus : fp.g_minus);
    for (double x : {0.5, 1.0, 2.0}) {
      for (double t : {0.1, 1.0, 10.0}) {
        const double q = propagator_quadrature(kP, r, x, x, t).value;
        worst = std::max(worst, rel(q, fixed_point_propagator(kP, s, x, x, t)));
      }
    }
    const double nu = s > 0 ? kP.nu_plus : kP.nu_minus;
    const double t = 2e3, h = 1e-2;
    const double slope = (std::log(propagator_quadrature(kP, r, 1, 1, t * std::exp(h)).value) -
                          std::log(propagator_quadrature(kP, r, 1, 1, t * std::exp(-h)).value)) /
                         (2 * h);
    worst_slope = std::max(worst_slope, rel(slope, -(0.5 + nu)));
  }
  o.detail << "max rel deviation " << worst << ", slope rel error " << worst_slope;
  o.check(worst <= 1e-3, "closed form");
  o.check(worst_slope <= 0.01, "long-time slope");
}

void asymptotic_law_check(Outcome& o) {
  double prev_law = INFINITY, prev_cs = INFINITY;
  o.detail << "law/CS residuals:";
  for (double b : {1e-2, 1e-3, 1e-4}) {
    const double law = check_asymptotic_law(kP, b, 1e-3, +1, 1, 1, 1, 2).residual;
    const double cs = std::abs(callan_symanzik_residual(kP, b, 1e-3, +1, 1, 1, 1).residual);
    o.detail << " " << law << "/" << cs;
    o.check(law < prev_law, "law not decreasing at b=" + std::to_string(b));
    o.check(cs < prev_cs, "CS not decreasing at b=" + std::to_string(b));
    prev_law = law;
    prev_cs = cs;
  }
}

void collapse_check(Outcome& o) {
  const auto tab = scaling_collapse(kP, numeric::geomspace(1e-6, 1e-2, 9), {1e-3, 3e-3, 1e-2}, 1e-2, 1.0, 1.0, 100.0);
  o.detail << "spread " << tab.spread << ", row spread " << tab.row_spread << ", exponents " << tab.p_exp << ", "
           << tab.q_exp;
  o.check(tab.spread < 0.05 && tab.row_spread < 0.05, "spread");
  o.check(rel(tab.p_exp, kP.nu_plus) <= 0.02, "nu+");
  o.check(rel(tab.q_exp, kP.nu_minus) <= 0.02, "nu-");
}

void phase_shift_check(Outcome& o) {
  const double g = 1.0;
  const Regulator R = Regulator::square(1.0, g);
  const auto e = small_mu_expansion(kP, g);
  const double lead = std::numbers::pi / 4 * (1 - 2 * kP.omega);
  // leading constant from the tiny-mu limit with the known correction removed
  const double tiny = 1e-10;
  const double lead_measured = phase_shift(kP, R, tiny).delta - e.coefficient * std::pow(tiny, 2 * kP.omega);
  const double mu = 1e-3;
  const double coef = (phase_shift(kP, R, mu).delta - lead) / std::pow(mu, 2 * kP.omega);
  boost::random::mt19937 rng(11);
  boost::random::uniform_real_distribution<double> lmu(std::log(1e-6), std::log(3.0)), ug(0.05, 6.0);
  double worst_r = 0.0;
  for (int n = 0; n < 100;) {
    const double m = std::exp(lmu(rng)), gg = ug(rng);
    if (m * m + gg >= 0.99 * std::numbers::pi * std::numbers::pi) continue;
    worst_r = std::max(worst_r, std::abs(std::abs(reflection(kP, Regulator::square(1.0, gg), m).r) - 1.0));
    ++n;
  }
  const auto c = constant_phase_curve(kP, 0.5, g, 1e-8);
  const double d0 = phase_shift(kP, R, 0.5).delta;
  const double d1 = phase_shift(kP, Regulator::square(1.0, c.points.back().g), c.points.back().mu).delta;
  o.detail << "lead err " << std::abs(lead_measured - lead) << ", coef rel " << rel(coef, e.coefficient)
           << ", max ||r|-1| " << worst_r << ", curve dDelta " << std::abs(d1 - d0);
  o.check(std::abs(e.leading - lead) <= 1e-6 && std::abs(lead_measured - lead) <= 1e-6, "leading constant");
  o.check(rel(coef, e.coefficient) <= 0.01, "mu^{2w} coefficient");
  o.check(worst_r <= 1e-12, "unitarity");
  o.check(c.complete && std::abs(d1 - d0) <= 1e-8, "constant-phase curve");
}

void feynman_kac_check(Outcome& o) {
  const auto fp = fixed_points(kP);
  PathEnsembleSpec s;
  s.x = s.y = 1.0;
  s.t = 4.0;
  s.N = 4096;
  s.n_samples = 1000000;
  for (int sign : {+1, -1}) {
    const Regulator R = Regulator::square(0.05, sign > 0 ? fp.g_plus : fp.g_minus);
    const double q = propagator_quadrature(kP, R, 1.0, 1.0, 4.0).value;
    const auto r = feynman_kac(kP, R, s);
    const double z = (r.W - q) / r.std_error;
    o.detail << (sign > 0 ? "g+: " : "; g-: ") << r.W << " +- " << r.std_error << " vs " << q << " (" << z
             << " sigma)";
    o.check(std::abs(z) <= 3.0, sign > 0 ? "g+" : "g-");
  }
  s.mode = PathMode::kBarrierOnly;
  const auto r = feynman_kac(kP, Regulator::square(0.05, fp.g_plus), s);
  const double img = image_heat_kernel(1.0, 1.0, 4.0);
  const double z = (r.W - img) / r.std_error;
  o.detail << "; barrier " << z << " sigma";
  o.check(std::abs(z) <= 3.0, "barrier");
}

void chain_check(Outcome& o) {
  const double gm = fixed_points(kP).g_minus;
  const auto ex = free_energy_extrapolated(kP, Regulator::square(1.0, gm + 0.1));
  o.detail << "f/E0 - 1 = " << ex.f / ex.E0 - 1;
  o.check(ex.phase == ChainPhase::kExtensive && rel(ex.f, ex.E0) <= 5e-3, "f vs E0");
  const Regulator below = Regulator::square(1.0, gm - 0.3);
  double prev = INFINITY;
  for (double X : {10.0, 20.0, 40.0, 80.0}) {
    const double f = free_energy_box(kP, below, 0.01, X).f;
    o.check(f >= 0.0 && f < prev, "box f not decreasing at X=" + std::to_string(X));
    prev = f;
  }
  const auto d = free_energy_density(kP, below, 0.01);
  o.detail << ", below g-: box f(80) = " << prev << ", closure f = " << d.f;
  o.check(d.phase == ChainPhase::kNonextensive && d.f == 0.0, "nonextensive below g-");
  const auto fit = chain_exponent(kP, 1.0, numeric::geomspace(0.03, 0.3, 5));
  o.detail << ", exponent " << fit.exponent;
  o.check(rel(fit.exponent, 1.0 / kP.omega) <= 0.02, "exponent");
}

void limit_cycle_check(Outcome& o) {
  const auto p = derived_constants(-0.3);
  const double w = p.omega;
  double worst = 0.0;
  std::size_t roots = 0;
  for (double eps : {1e-6, 3e-4, 0.01}) {
    const auto a = limit_cycle(p, 1.0, eps);
    const auto b = limit_cycle(p, 1.0, eps * std::exp(-2 * std::numbers::pi / w));
    const auto c = limit_cycle(p, std::exp(-std::numbers::pi / w), eps);
    o.check(!a.g_branches.empty() && a.g_branches.size() == b.g_branches.size() &&
                a.g_branches.size() == c.g_branches.size(),
            "root counts");
    for (std::size_t i = 0; i < std::min({a.g_branches.size(), b.g_branches.size(), c.g_branches.size()}); ++i) {
      worst = std::max({worst, std::abs(a.g_branches[i] - b.g_branches[i]), std::abs(a.g_branches[i] - c.g_branches[i])});
      ++roots;
    }
  }
  o.detail << roots << " roots, max shift " << worst;
  o.check(worst <= 1e-8, "invariance");
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<void(Outcome&)> run;
  };
  const std::vector<Criterion> all{
      {1, "fixed points", 1, fixed_points_check},
      {2, "RG eigenvalues", 1, eigenvalue_check},
      {3, "binding-energy exponent", 30, exponent_check},
      {4, "binding-energy amplitude", 30, amplitude_check},
      {5, "exact homogeneous law", 60, exact_law_check},
      {6, "fixed-point propagator", 120, fixed_point_propagator_check},
      {7, "asymptotic law / Callan-Symanzik", 300, asymptotic_law_check},
      {8, "scaling collapse", 300, collapse_check},
      {9, "phase shift", 60, phase_shift_check},
      {10, "Feynman-Kac", 300, feynman_kac_check},
      {11, "chain criticality", 300, chain_check},
      {12, "limit cycle", 60, limit_cycle_check},
  };
  int failures = 0;
  for (const auto& c : all) {
    Outcome o;
    o.detail.precision(6);
    const auto t0 = std::chrono::steady_clock::now();
    try {
      c.run(o);
    } catch (const std::exception& e) {
      o.ok = false;
      o.detail << "[exception: " << e.what() << "]";
    }
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (dt > c.budget_s) {
      o.ok = false;
      o.detail << " [over time budget " << c.budget_s << " s]";
    }
    failures += o.ok ? 0 : 1;
    std::printf("%s %2d %s: %s (%.2f s)\n", o.ok ? "PASS" : "FAIL", c.id, c.name, o.detail.str().c_str(), dt);
    std::fflush(stdout);
  }
  return failures;
}
