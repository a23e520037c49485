#pragma once

// Classical correspondences: the Feynman-Kac path average for
// W(x, t; y) = <x| e^{-tH} |y>, and the one-dimensional chain with energy
//
//   S = sum_j [(x_{j+1} - x_j)^2 / 4 eps + (eps/2) V(x_j) + (eps/2) V(x_{j+1})].

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <boost/random/normal_distribution.hpp>

#include "isq/core.hpp"
#include "isq/error.hpp"
#include "isq/numeric.hpp"
#include "isq/parallel.hpp"
#include "isq/specfun.hpp"
#include "isq/spectrum.hpp"

namespace isq {

// ---------------------------------------------------------------------------
// Feynman-Kac Monte Carlo

enum class PathMode {
  kFull,         // V of the regulated model, absorbing wall at x = 0
  kBarrierOnly,  // V = 0, absorbing wall at x = 0
  kFree,         // V = 0 on the whole line
};

inline std::string to_string(PathMode m) {
  switch (m) {
    case PathMode::kFull: return "full";
    case PathMode::kBarrierOnly: return "barrier";
    case PathMode::kFree: return "free";
  }
  return "unknown";
}

struct PathEnsembleSpec {
  double x = 1.0, y = 1.0, t = 1.0;
  int N = 4096;
  std::int64_t n_samples = 1000000;
  std::uint64_t seed = 1;
  PathMode mode = PathMode::kFull;
  int refine = 16;  // substeps for slices that come near the well; 1 disables
};

struct MonteCarloResult {
  double W = 0.0;
  double std_error = 0.0;
  double survival = 0.0;  // mean bridge weight before the free-kernel factor
  std::int64_t n_samples = 0;
  std::int64_t n_absorbed = 0;
};

inline double free_heat_kernel(double x, double y, double t) {
  return std::exp(-(x - y) * (x - y) / (4 * t)) / std::sqrt(4 * std::numbers::pi * t);
}

/// Heat kernel on x > 0 with absorption at 0 (method of images).
inline double image_heat_kernel(double x, double y, double t) {
  return (std::exp(-(x - y) * (x - y) / (4 * t)) * -std::expm1(-x * y / t)) / std::sqrt(4 * std::numbers::pi * t);
}

namespace classical_detail {

inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Engine for sample i: a function of (seed, i) only.
inline std::mt19937_64 sample_engine(std::uint64_t seed, std::int64_t i) {
  return std::mt19937_64(splitmix64(splitmix64(seed) ^ static_cast<std::uint64_t>(i)));
}

struct Moments {
  double sum = 0.0, sum_sq = 0.0;
  std::int64_t absorbed = 0;
};

}  // namespace classical_detail

/// Estimates W(x, t; y) as K0(x, t; y) E[weight] over Brownian bridges from y
/// at time 0 to x at time t with N steps of variance 2 eps. Per step the
/// weight is the trapezoid rule for exp(-int V) times the probability that the
/// bridge segment does not touch x = 0. Slices ending near the well are split
/// into `refine` substeps by sampling the bridge in between, which leaves the
/// path measure unchanged and sharpens the quadrature across the well edge.
inline MonteCarloResult feynman_kac(const ModelParams& p, const Regulator& r, const PathEnsembleSpec& s) {
  if (!(s.x > 0.0 && s.y > 0.0)) throw DomainError("feynman_kac: endpoints must be positive");
  if (!(s.t > 0.0)) throw DomainError("feynman_kac: t must be positive");
  if (s.N < 1) throw DomainError("feynman_kac: N must be >= 1");
  if (s.n_samples < 2) throw DomainError("feynman_kac: need at least two samples");
  if (s.refine < 1) throw DomainError("feynman_kac: refine must be >= 1");
  if (s.mode == PathMode::kFull) r.validate();
  const double eps = s.t / s.N;
  const bool wall = s.mode != PathMode::kFree;
  const bool with_v = s.mode == PathMode::kFull;
  auto V = [&](double x) { return with_v ? potential(p, r, x) : 0.0; };
  // steps that start or end within this distance of the well edge are subdivided
  const double L = with_v ? r.b * p.x0 : 0.0;
  const double near = L + 4.0 * std::sqrt(2 * eps);
  const int K = with_v ? s.refine : 1;
  const double sub = eps / K;

  auto one_path = [&](std::int64_t i, bool& absorbed) {
    auto eng = classical_detail::sample_engine(s.seed, i);
    boost::random::normal_distribution<double> normal;
    double xj = s.y;
    double vj = V(xj);
    double log_w = 0.0;
    absorbed = false;
    // trapezoid for int V plus the no-touch probability of the bridge on [a, c]
    auto segment = [&](double a, double va, double c, double vc, double dt) {
      if (wall) {
        const double z = a * c / dt;
        if (z < 40.0) log_w += std::log(-std::expm1(-z));
      }
      log_w -= 0.5 * dt * (va + vc);
    };
    for (int j = 0; j < s.N; ++j) {
      const int m = s.N - j;
      double xn;
      if (m == 1) {
        xn = s.x;
      } else {
        xn = xj + (s.x - xj) / m + std::sqrt(2 * eps * (m - 1) / m) * normal(eng);
      }
      if (wall && xn <= 0.0) {
        absorbed = true;
        return 0.0;
      }
      const double vn = V(xn);
      if (K > 1 && std::min(xj, xn) < near) {
        // fill in the bridge from xj to xn at K - 1 interior times
        double xa = xj, va = vj;
        for (int k = 1; k < K; ++k) {
          const int left = K - k + 1;
          const double xb = xa + (xn - xa) / left + std::sqrt(2 * sub * (left - 1) / left) * normal(eng);
          if (wall && xb <= 0.0) {
            absorbed = true;
            return 0.0;
          }
          const double vb = V(xb);
          segment(xa, va, xb, vb, sub);
          xa = xb;
          va = vb;
        }
        segment(xa, va, xn, vn, sub);
      } else {
        segment(xj, vj, xn, vn, eps);
      }
      xj = xn;
      vj = vn;
    }
    return std::exp(log_w);
  };

  // fixed blocks, summed in block order: independent of the thread count
  constexpr std::int64_t kBlock = 4096;
  const std::int64_t n_blocks = (s.n_samples + kBlock - 1) / kBlock;
  std::vector<classical_detail::Moments> blocks(static_cast<std::size_t>(n_blocks));
  parallel_for(static_cast<std::size_t>(n_blocks), [&](std::size_t b) {
    classical_detail::Moments m;
    const std::int64_t lo = static_cast<std::int64_t>(b) * kBlock;
    const std::int64_t hi = std::min(s.n_samples, lo + kBlock);
    for (std::int64_t i = lo; i < hi; ++i) {
      bool absorbed = false;
      const double w = one_path(i, absorbed);
      m.sum += w;
      m.sum_sq += w * w;
      m.absorbed += absorbed ? 1 : 0;
    }
    blocks[b] = m;
  });
  classical_detail::Moments tot;
  for (const auto& m : blocks) {
    tot.sum += m.sum;
    tot.sum_sq += m.sum_sq;
    tot.absorbed += m.absorbed;
  }
  const double n = static_cast<double>(s.n_samples);
  const double mean = tot.sum / n;
  const double var = std::max(0.0, (tot.sum_sq / n - mean * mean) * n / (n - 1));
  const double k0 = free_heat_kernel(s.x, s.y, s.t);
  MonteCarloResult res;
  res.survival = mean;
  res.W = k0 * mean;
  res.std_error = k0 * std::sqrt(var / n);
  res.n_samples = s.n_samples;
  res.n_absorbed = tot.absorbed;
  if (!std::isfinite(res.W)) throw NumericalError("feynman_kac: non-finite estimate");
  return res;
}

struct ScalingCheckResult {
  double ratio = 0.0;     // W(l x, t; l' y) / W(x, t; y)
  double expected = 0.0;  // (l l')^{nu_+-}
  double std_error = 0.0;
  double W_base = 0.0;
  double W_scaled = 0.0;
  bool noisy = false;  // relative error of the ratio above 5%
};

/// Measures W(lx, t; l'y)/W(x, t; y) by Monte Carlo at g = g_+- for cutoff b.
/// Both estimates use the same seed (common random numbers).
inline ScalingCheckResult scaling_check_W(const ModelParams& p, double b, int sign, double lambda,
                                          double lambda_prime, PathEnsembleSpec s) {
  require_conformal(p, "scaling_check_W");
  if (sign != 1 && sign != -1) throw DomainError("scaling_check_W: sign must be +1 or -1");
  if (!(lambda > 0.0 && lambda_prime > 0.0)) throw DomainError("scaling_check_W: scale factors must be positive");
  const double L = b * p.x0;
  if (!(std::min({s.x, s.y, lambda * s.x, lambda_prime * s.y}) > L))
    throw DomainError("scaling_check_W: positions must exceed b x0");
  const auto fp = fixed_points(p);
  const Regulator r = Regulator::square(b, sign > 0 ? fp.g_plus : fp.g_minus);
  s.mode = PathMode::kFull;
  const auto base = feynman_kac(p, r, s);
  PathEnsembleSpec t = s;
  t.x = lambda * s.x;
  t.y = lambda_prime * s.y;
  const auto scaled = feynman_kac(p, r, t);
  ScalingCheckResult c;
  c.W_base = base.W;
  c.W_scaled = scaled.W;
  c.ratio = scaled.W / base.W;
  c.expected = std::pow(lambda * lambda_prime, sign > 0 ? p.nu_plus : p.nu_minus);
  const double rel = std::hypot(base.std_error / base.W, scaled.std_error / scaled.W);
  c.std_error = c.ratio * rel;
  c.noisy = rel > 0.05;
  return c;
}

// ---------------------------------------------------------------------------
// 1D chain and its transfer operator

enum class ChainKernel {
  kImage,  // Gaussian minus its mirror image: the absorbing wall is exact for V = 0
  kPlain,  // Gaussian restricted to x > 0, as in the chain energy S
};

struct ChainGrid {
  double h = 0.0;      // node spacing; 0 picks sqrt(2 eps)/4, adjusted to put a node at b x0
  double x_max = 0.0;  // right edge; 0 picks a default per operation
  ChainKernel kernel = ChainKernel::kImage;
};

struct ChainSpec {
  int N = 100;  // interior sites
  double epsilon = 0.01;
  double x = 1.0, y = 1.0;  // boundary sites x_{N+1} and x_0
  ChainGrid grid;
};

struct ChainPartitionResult {
  double Z = 0.0;  // including (4 pi eps)^{-1/2} per bond, so Z -> W(x, (N+1) eps; y)
  double log_Z = 0.0;
  double truncation_error = 0.0;  // |log Z(x_max) - log Z(2 x_max)|
  double h = 0.0;
  double x_max = 0.0;
};

namespace classical_detail {

/// Symmetrized transfer matrix M_ij = sqrt(w_i) T(x_i, x_j) sqrt(w_j), banded.
struct TransferMatrix {
  double eps = 0.0, h = 0.0;
  int band = 0;
  ChainKernel kernel = ChainKernel::kImage;
  std::vector<double> x, sw, phi;  // nodes, sqrt of weights, e^{-eps V/2}
  std::vector<std::vector<double>> rows;  // rows[i][k] = M(i, i + k), k = 0..band

  std::size_t size() const { return x.size(); }

  double gauss(double a, double b) const {
    double v = std::exp(-(a - b) * (a - b) / (4 * eps));
    if (kernel == ChainKernel::kImage) v *= -std::expm1(-a * b / eps);
    return v / std::sqrt(4 * std::numbers::pi * eps);
  }

  double at(std::size_t i, std::size_t j) const {
    if (i > j) std::swap(i, j);
    const std::size_t k = j - i;
    return k <= static_cast<std::size_t>(band) ? rows[i][k] : 0.0;
  }

  std::vector<double> apply(const std::vector<double>& v) const {
    const std::size_t n = size();
    std::vector<double> out(n, 0.0);
    parallel_for(n, [&](std::size_t i) {
      double s = 0.0;
      const std::size_t lo = i >= static_cast<std::size_t>(band) ? i - band : 0;
      const std::size_t hi = std::min(n - 1, i + band);
      for (std::size_t j = lo; j <= hi; ++j) s += at(i, j) * v[j];
      out[i] = s;
    });
    return out;
  }

  Eigen::SparseMatrix<double> shifted(double s) const {
    std::vector<Eigen::Triplet<double>> t;
    const std::size_t n = size();
    t.reserve(n * (2 * band + 1));
    for (std::size_t i = 0; i < n; ++i) {
      for (int k = 0; k <= band && i + k < n; ++k) {
        const double v = (k == 0 ? s : 0.0) - rows[i][k];
        t.emplace_back(i, i + k, v);
        if (k > 0) t.emplace_back(i + k, i, v);
      }
    }
    Eigen::SparseMatrix<double> A(n, n);
    A.setFromTriplets(t.begin(), t.end());
    return A;
  }
};

/// e^{-eps V(x)/2}; at a node on the well edge the two one-sided values are
/// averaged so the trapezoid rule stays second order across the jump.
inline double half_step_factor(const ModelParams& p, const Regulator& r, double eps, double x, double h) {
  if (x <= 0.0) return std::exp(-0.5 * eps * potential(p, r, std::numeric_limits<double>::min()));
  const double L = r.b * p.x0;
  if (r.kind == RegulatorKind::kSquareWell && std::abs(x - L) < 1e-9 * h) {
    return 0.5 * (std::exp(0.5 * eps * r.g / (L * L)) + std::exp(-0.5 * eps * p.alpha / (L * L)));
  }
  return std::exp(-0.5 * eps * potential(p, r, x));
}

inline double grid_step(const ModelParams& p, const Regulator& r, double eps, double h) {
  if (!(h > 0.0)) h = std::sqrt(2 * eps) / 4;
  const double L = r.b * p.x0;
  if (r.kind == RegulatorKind::kSquareWell) h = L / std::ceil(L / h - 1e-9);
  return h;
}

inline TransferMatrix build_transfer(const ModelParams& p, const Regulator& r, double eps, double h, double x_max,
                                     ChainKernel kernel) {
  TransferMatrix M;
  M.eps = eps;
  M.h = h;
  M.kernel = kernel;
  // e^{-d^2/4eps} < e^{-40} beyond the band
  M.band = static_cast<int>(std::ceil(std::sqrt(160 * eps) / h));
  const int j0 = kernel == ChainKernel::kImage ? 1 : 0;
  const int n = static_cast<int>(std::floor(x_max / h + 1e-9));
  for (int j = j0; j <= n; ++j) {
    const double xj = j * h;
    M.x.push_back(xj);
    // image kernel vanishes at 0; plain kernel uses the half trapezoid weight there
    M.sw.push_back(std::sqrt(j == 0 ? 0.5 * h : h));
    M.phi.push_back(half_step_factor(p, r, eps, xj, h));
  }
  const std::size_t N = M.x.size();
  M.rows.assign(N, std::vector<double>(M.band + 1, 0.0));
  parallel_for(N, [&](std::size_t i) {
    for (int k = 0; k <= M.band && i + k < N; ++k) {
      const std::size_t j = i + k;
      M.rows[i][k] = M.sw[i] * M.phi[i] * M.gauss(M.x[i], M.x[j]) * M.phi[j] * M.sw[j];
    }
  });
  return M;
}

inline double chain_log_partition(const ModelParams& p, const Regulator& r, const ChainSpec& s, double h,
                                  double x_max) {
  const auto M = build_transfer(p, r, s.epsilon, h, x_max, s.grid.kernel);
  const double py = half_step_factor(p, r, s.epsilon, s.y, h);
  const double px = half_step_factor(p, r, s.epsilon, s.x, h);
  std::vector<double> u(M.size());
  for (std::size_t j = 0; j < u.size(); ++j) u[j] = py * M.gauss(s.y, M.x[j]) * M.phi[j] * M.sw[j];
  double log_scale = 0.0;
  for (int it = 1; it < s.N; ++it) {
    u = M.apply(u);
    double m = 0.0;
    for (double v : u) m = std::max(m, std::abs(v));
    if (!(m > 0.0)) return -std::numeric_limits<double>::infinity();
    for (double& v : u) v /= m;
    log_scale += std::log(m);
  }
  double z = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) z += u[j] * M.sw[j] * M.phi[j] * M.gauss(M.x[j], s.x) * px;
  return log_scale + std::log(z);
}

}  // namespace classical_detail

/// Z_xy(N, eps) by N - 1 applications of the transfer kernel on a uniform grid.
inline ChainPartitionResult chain_partition(const ModelParams& p, const Regulator& r, const ChainSpec& s) {
  if (s.N < 1) throw DomainError("chain_partition: N must be >= 1");
  if (!(s.epsilon > 0.0)) throw DomainError("chain_partition: epsilon must be positive");
  if (!(s.x > 0.0 && s.y > 0.0)) throw DomainError("chain_partition: boundary sites must be positive");
  r.validate();
  const double t = (s.N + 1) * s.epsilon;
  const double h = classical_detail::grid_step(p, r, s.epsilon, s.grid.h);
  double x_max = s.grid.x_max > 0.0 ? s.grid.x_max : std::max(s.x, s.y) + 10.0 * std::sqrt(t) + 10.0;
  if (auto bs = bound_state(p, r)) x_max = std::max(x_max, 40.0 / std::sqrt(-bs->energy));
  if (std::max(s.x, s.y) >= x_max) throw DomainError("chain_partition: boundary sites beyond the grid");
  ChainPartitionResult res;
  res.h = h;
  res.x_max = x_max;
  res.log_Z = classical_detail::chain_log_partition(p, r, s, h, x_max);
  res.Z = std::exp(res.log_Z);
  res.truncation_error = std::abs(classical_detail::chain_log_partition(p, r, s, h, 2 * x_max) - res.log_Z);
  return res;
}

// ---------------------------------------------------------------------------
// Free energy density f = -(1/eps) log lambda_max

enum class ChainPhase { kExtensive, kNonextensive };

inline std::string to_string(ChainPhase ph) { return ph == ChainPhase::kExtensive ? "extensive" : "nonextensive"; }

struct FreeEnergyResult {
  double f = 0.0;
  double E0 = std::numeric_limits<double>::quiet_NaN();  // bound-state energy from the spectrum module
  ChainPhase phase = ChainPhase::kNonextensive;
  double epsilon = 0.0;
  double lambda_max = 0.0;
  double h = 0.0;
  std::string method;
};

/// Largest eigenvalue of the transfer matrix on (0, x_max] by bisection on
/// positive definiteness of s - M.
inline double chain_box_lambda_max(const ModelParams& p, const Regulator& r, double eps, double x_max,
                                   const ChainGrid& grid = {}) {
  if (!(eps > 0.0 && x_max > 0.0)) throw DomainError("chain_box_lambda_max: eps, x_max must be positive");
  const double h = classical_detail::grid_step(p, r, eps, grid.h);
  const auto M = classical_detail::build_transfer(p, r, eps, h, x_max, grid.kernel);
  double hi = 0.0;
  for (std::size_t i = 0; i < M.size(); ++i) {
    double s = 0.0;
    for (std::size_t j = (i > std::size_t(M.band) ? i - M.band : 0); j <= std::min(M.size() - 1, i + M.band); ++j)
      s += std::abs(M.at(i, j));
    hi = std::max(hi, s);
  }
  double lo = 0.0;
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt;
  llt.analyzePattern(M.shifted(hi));
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    llt.factorize(M.shifted(mid));
    if (llt.info() == Eigen::Success) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return 0.5 * (lo + hi);
}

/// f on a finite box: the extensive/nonextensive distinction shows up as
/// f -> 0 with growing x_max below the threshold.
inline FreeEnergyResult free_energy_box(const ModelParams& p, const Regulator& r, double eps, double x_max,
                                        const ChainGrid& grid = {}) {
  FreeEnergyResult res;
  res.epsilon = eps;
  res.h = classical_detail::grid_step(p, r, eps, grid.h);
  res.lambda_max = chain_box_lambda_max(p, r, eps, x_max, grid);
  res.f = -std::log(res.lambda_max) / eps;
  res.method = "box";
  if (auto bs = bound_state(p, r)) res.E0 = bs->energy;
  res.phase = res.f < 0.0 ? ChainPhase::kExtensive : ChainPhase::kNonextensive;
  return res;
}

struct FreeEnergyOptions {
  ChainGrid grid;
  double x_inner = 40.0;  // fine grid on (0, b x0 + x_inner]
};

/// f = -kappa^2 for the transfer-operator eigenvector that decays as
/// sqrt(x) K_w(kappa x). The operator is discretized on (0, X]; beyond X the
/// eigenvector is the exterior solution with eigenvalue e^{eps kappa^2}, which
/// enters the inner equations through the kernel overlap. kappa solves
/// psi_inner(X/2) = psi_outer(X/2). No root means no extensive phase: f = 0.
inline FreeEnergyResult free_energy_density(const ModelParams& p, const Regulator& r, double eps,
                                            const FreeEnergyOptions& opt = {}) {
  require_conformal(p, "free_energy_density");
  if (!(eps > 0.0)) throw DomainError("free_energy_density: epsilon must be positive");
  r.validate();
  const double h = classical_detail::grid_step(p, r, eps, opt.grid.h);
  const double L = r.b * p.x0;
  const double X = L + opt.x_inner;
  const auto M = classical_detail::build_transfer(p, r, eps, h, X, opt.grid.kernel);
  const std::size_t n = M.size();
  const int band = M.band;
  const double xc = L + 0.5 * opt.x_inner;
  const std::size_t ic = static_cast<std::size_t>(std::lower_bound(M.x.begin(), M.x.end(), xc) - M.x.begin());
  const double w = p.omega;
  auto outer = [&](double x, double kappa) { return std::sqrt(x) * specfun::bessel_k(w, kappa * x).value; };
  const double x_last = M.x.back();

  FreeEnergyResult res;
  res.epsilon = eps;
  res.h = h;
  res.method = "exterior closure";
  if (auto bs = bound_state(p, r)) res.E0 = bs->energy;

  // inner box ground state: the solve below is regular for lambda above it
  const double lam_box = chain_box_lambda_max(p, r, eps, X, opt.grid);
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
  ldlt.analyzePattern(M.shifted(2.0));
  auto mismatch = [&](double log_kappa) {
    const double kappa = std::exp(log_kappa);
    const double lambda = std::exp(eps * kappa * kappa);
    // coupling of inner rows to outer nodes x_last + m h
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    const double scale = outer(xc, kappa);
    for (int m = 1; m <= band; ++m) {
      const double xo = x_last + m * h;
      const double po = classical_detail::half_step_factor(p, r, eps, xo, h) * outer(xo, kappa) / scale;
      for (std::size_t i = n - (band - m + 1); i < n; ++i) {
        rhs(static_cast<Eigen::Index>(i)) += M.sw[i] * M.phi[i] * M.gauss(M.x[i], xo) * h * po;
      }
    }
    ldlt.factorize(M.shifted(lambda));
    if (ldlt.info() != Eigen::Success) throw NumericalError("free_energy_density: factorization failed");
    const Eigen::VectorXd u = ldlt.solve(rhs);
    const double psi = u(static_cast<Eigen::Index>(ic)) / M.sw[ic];
    return psi / (outer(M.x[ic], kappa) / scale) - 1.0;
  };
  const double kappa_min = lam_box > 1.0 ? std::sqrt(std::log(lam_box) / eps) : 0.0;
  if (kappa_min * opt.x_inner > 10.0) {
    // the box already holds the state; the closure root sits within e^{-2 kappa X} of the box pole
    res.f = -kappa_min * kappa_min;
    res.lambda_max = lam_box;
    res.phase = ChainPhase::kExtensive;
    res.method = "box (state contained)";
    return res;
  }
  const double kappa_max = std::sqrt(std::max(r.g * r.shape_max(), 1e-300)) / L;
  double hi = std::log(kappa_max);
  const double floor = kappa_min > 0.0 ? std::log(kappa_min) + 1e-10 : std::log(1e-12 / L);
  double f_hi = mismatch(hi);
  std::optional<double> root;
  for (int it = 0; it < 400; ++it) {
    const double lo = std::max(floor, hi - 0.25 * std::log(10.0));
    if (lo >= hi) break;
    const double f_lo = mismatch(lo);
    if (std::isfinite(f_lo) && std::isfinite(f_hi) && f_lo * f_hi <= 0.0) {
      root = numeric::find_root(mismatch, lo, hi, 52, "free_energy_density");
      break;
    }
    hi = lo;
    f_hi = f_lo;
  }
  if (root) {
    const double kappa = std::exp(*root);
    res.f = -kappa * kappa;
    res.lambda_max = std::exp(eps * kappa * kappa);
    res.phase = ChainPhase::kExtensive;
  } else {
    res.f = 0.0;
    res.lambda_max = 1.0;
    res.phase = ChainPhase::kNonextensive;
  }
  return res;
}

struct ExtrapolatedFreeEnergy {
  double f = 0.0;  // eps -> 0 limit
  double E0 = std::numeric_limits<double>::quiet_NaN();
  ChainPhase phase = ChainPhase::kNonextensive;
  std::vector<double> eps;
  std::vector<double> f_eps;
};

/// Richardson extrapolation of f(eps) = f0 + a eps + c eps^2 (least squares
/// when more than three spacings are given).
inline ExtrapolatedFreeEnergy free_energy_extrapolated(const ModelParams& p, const Regulator& r,
                                                       const std::vector<double>& eps = {0.02, 0.01, 0.005},
                                                       const FreeEnergyOptions& opt = {}) {
  if (eps.size() < 2) throw DomainError("free_energy_extrapolated: need at least two spacings");
  ExtrapolatedFreeEnergy out;
  out.eps = eps;
  bool extensive = true;
  for (double e : eps) {
    const auto fr = free_energy_density(p, r, e, opt);
    out.f_eps.push_back(fr.f);
    out.E0 = fr.E0;
    extensive = extensive && fr.phase == ChainPhase::kExtensive;
  }
  const int cols = eps.size() >= 3 ? 3 : 2;
  Eigen::MatrixXd X(eps.size(), cols);
  Eigen::VectorXd v(eps.size());
  for (std::size_t i = 0; i < eps.size(); ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = eps[i];
    if (cols == 3) X(i, 2) = eps[i] * eps[i];
    v(i) = out.f_eps[i];
  }
  out.f = numeric::least_squares(X, v)(0);
  out.phase = extensive && out.f < 0.0 ? ChainPhase::kExtensive : ChainPhase::kNonextensive;
  if (out.phase == ChainPhase::kNonextensive) out.f = 0.0;
  return out;
}

/// Fits -f against g - g_- for the square well of width b.
inline CriticalFit chain_exponent(const ModelParams& p, double b, const std::vector<double>& dg,
                                  const std::vector<double>& eps = {0.02, 0.01, 0.005},
                                  FitModel model = FitModel::kPowerLawWithCorrection) {
  require_conformal(p, "chain_exponent");
  const double gm = fixed_points(p).g_minus;
  std::vector<double> f(dg.size());
  parallel_for(dg.size(), [&](std::size_t i) {
    f[i] = -free_energy_extrapolated(p, Regulator::square(b, gm + dg[i]), eps).f;
  });
  auto fit = fit_power_law(dg, f, model);
  fit.g_star = gm;
  fit.dg = dg;
  fit.energy = f;
  for (double& e : fit.energy) e = -e;
  return fit;
}

}  // namespace isq
