#pragma once

// Randomized invariant checks shared by the unit suite and the acceptance runner.
// Each check returns a PropertyResult naming its first violation.

#include <cmath>
#include <complex>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <robust_scatter/robust_scatter.hpp>

namespace rs_test {

using namespace robust_scatter;

struct PropertyResult {
  bool pass = true;
  long checks = 0;
  std::string failure;

  void expect(bool ok, const std::string& what) {
    ++checks;
    if (!ok && pass) {
      pass = false;
      failure = what;
    }
  }
};

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double log_uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::exp(uniform(rng, std::log(lo), std::log(hi)));
}

inline std::string describe(const UFunction& u, double c) {
  std::ostringstream os;
  os << to_string(u.kind()) << "(t=" << u.t() << ", c=" << c << ")";
  return os.str();
}

/// Random symmetric positive definite N x N matrix with spectrum bounded away from 0.
inline MatrixXd random_spd(std::mt19937_64& rng, Index N) {
  std::normal_distribution<double> nd;
  MatrixXd g(N, N);
  for (Index i = 0; i < N; ++i)
    for (Index j = 0; j < N; ++j) g(i, j) = nd(rng);
  MatrixXd s = g * g.transpose() / static_cast<double>(N) + 0.5 * MatrixXd::Identity(N, N);
  return 0.5 * (s + s.transpose());
}

/// Monotonicity, round trips, the ψ_∞ limit and the Huber plateau on `probes` random (u, c, x) draws.
inline PropertyResult weights_properties(int probes = 1000, std::uint64_t seed = 11) {
  std::mt19937_64 rng(seed);
  PropertyResult r;
  for (int k = 0; k < probes; ++k) {
    const UKind kind = k % 2 == 0 ? UKind::Student : UKind::Huber;
    const UFunction u(kind, log_uniform(rng, 0.01, 3.0));
    // 1 - c φ_∞ >= 0.2 keeps ψ(1e6) within 1e-3 of ψ_∞.
    const double c = uniform(rng, 0.01, 0.8 / u.phi_infinity());
    const EquivalentWeight v(u, c);
    const std::string tag = describe(u, c);

    const double x1 = log_uniform(rng, 1e-6, 1e4);
    const double x2 = x1 * (1.0 + uniform(rng, 0.01, 1.0));
    r.expect(u.u(x1) >= u.u(x2), "u not non-increasing for " + tag);
    r.expect(u.phi(x1) < u.phi(x2), "phi not increasing for " + tag);
    r.expect(v.psi(x1) < v.psi(x2), "psi not increasing for " + tag);
    r.expect(v.v(x1) >= v.v(x2) * (1.0 - 1e-12), "v not non-increasing for " + tag);

    const double y_phi = uniform(rng, 0.0, u.phi_infinity() * (1.0 - 1e-6));
    r.expect(std::abs(u.phi(u.phi_inverse(y_phi)) - y_phi) <= 1e-10 * (1.0 + y_phi), "phi round trip for " + tag);
    const double y_g = log_uniform(rng, 1e-8, 1e6);
    r.expect(std::abs(v.g(v.g_inverse(y_g)) - y_g) <= 1e-10 * (1.0 + y_g), "g round trip for " + tag);
    const double y_psi = uniform(rng, 0.0, v.psi_infinity() * (1.0 - 1e-3));
    r.expect(std::abs(v.psi(v.psi_inverse(y_psi)) - y_psi) <= 1e-9 * (1.0 + y_psi), "psi round trip for " + tag);

    r.expect(std::abs(v.psi(1e6) - v.psi_infinity()) <= 1e-3 * v.psi_infinity(), "psi(1e6) far from psi_inf for " + tag);
    if (kind == UKind::Huber) {
      const double y = uniform(rng, 0.0, 1.0 / (1.0 - c));
      r.expect(std::abs(v.v(y) - 1.0) <= 1e-12, "Huber plateau broken for " + tag);
    }
  }
  return r;
}

/// A random admissible population (explicit outliers on even index, random outliers on odd) and u.
struct RandomModel {
  PopulationModel model;
  UFunction u;
};

inline RandomModel random_model(std::mt19937_64& rng, int index) {
  const Index N = 3 + static_cast<Index>(rng() % 6);
  const double c = uniform(rng, 0.05, 0.4);
  const Index n = std::max<Index>(N + 1, static_cast<Index>(std::llround(static_cast<double>(N) / c)));
  const double c_n = static_cast<double>(N) / static_cast<double>(n);
  const UKind kind = index % 4 < 2 ? UKind::Student : UKind::Huber;
  const MatrixXd C = random_spd(rng, N);
  if (index % 2 == 0) {
    const Index K = static_cast<Index>(rng() % 4);
    const double eps = static_cast<double>(K) / static_cast<double>(n);
    const double lo = eps / (1.0 - eps);
    const double hi = 1.0 / c_n - 1.0;
    const UFunction u(kind, uniform(rng, lo + 0.25 * (hi - lo), lo + 0.75 * (hi - lo)));
    std::normal_distribution<double> nd;
    MatrixXd a(N, K);
    for (Index i = 0; i < N; ++i)
      for (Index j = 0; j < K; ++j) a(i, j) = nd(rng) * uniform(rng, 0.2, 3.0);
    return {PopulationModel::deterministic(C, a, n), u};
  }
  const double eps = uniform(rng, 0.0, std::min(0.2, 0.9 * (1.0 - c_n)));
  const double lo = eps / (1.0 - eps);
  const double hi = 1.0 / c_n - 1.0;
  const UFunction u(kind, uniform(rng, lo + 0.25 * (hi - lo), lo + 0.75 * (hi - lo)));
  return {PopulationModel::random(C, random_spd(rng, N), c_n, eps), u};
}

/// Positivity, monotonicity and scalability of h on random probes; monotone descent from the
/// feasible point; agreement of the fixed point reached from a small positive start.
inline PropertyResult interference_properties(int models = 50, std::uint64_t seed = 23) {
  std::mt19937_64 rng(seed);
  PropertyResult r;
  for (int m = 0; m < models; ++m) {
    const auto [model, u] = random_model(rng, m);
    const InterferenceMap h(model, u);
    const std::string tag = "model " + std::to_string(m) + " " + describe(u, model.c_n);
    for (int probe = 0; probe < 5; ++probe) {
      VectorXd q(h.size()), q_hi(h.size());
      for (Index i = 0; i < q.size(); ++i) {
        q(i) = log_uniform(rng, 1e-3, 1e2);
        q_hi(i) = q(i) * (1.0 + uniform(rng, 0.0, 2.0));
      }
      const VectorXd hq = h(q);
      const VectorXd hq_hi = h(q_hi);
      const double delta = uniform(rng, 1.01, 3.0);
      const VectorXd h_scaled = h(delta * q);
      for (Index i = 0; i < q.size(); ++i) {
        r.expect(hq(i) > 0.0, "positivity fails for " + tag);
        r.expect(hq_hi(i) >= hq(i) * (1.0 - 1e-12), "monotonicity fails for " + tag);
        r.expect(delta * hq(i) > h_scaled(i), "scalability fails for " + tag);
      }
    }
    const auto bounds = h.feasible_point();
    VectorXd p(h.size());
    p(0) = bounds.q0;
    p.tail(h.size() - 1) = bounds.w;
    const VectorXd hp = h(p);
    for (Index i = 0; i < p.size(); ++i) r.expect(hp(i) <= p(i) * (1.0 + 1e-12), "feasible point not feasible for " + tag);

    const auto prof = detail::iterate_interference(model, u, {});
    r.expect(prof.monotone, "iteration from the feasible point is not monotone for " + tag);
    WeightSolverConfig small;
    small.start = VectorXd::Constant(h.size(), 1e-3);
    const auto prof2 = detail::iterate_interference(model, u, small);
    r.expect(std::abs(prof.gamma - prof2.gamma) <= 1e-8 * prof.gamma, "start-point dependence (gamma) for " + tag);
    for (Index i = 0; i < prof.alphas.size(); ++i)
      r.expect(std::abs(prof.alphas(i) - prof2.alphas(i)) <= 1e-8 * prof.alphas(i), "start-point dependence (alpha) for " + tag);
  }
  return r;
}

/// Stieltjes transform of the Marchenko–Pastur law with ratio c (unit scale), the root with Im > 0.
inline std::complex<double> marchenko_pastur_stieltjes(std::complex<double> z, double c) {
  // c z m² + (z + c - 1) m + 1 = 0
  const std::complex<double> a = c * z;
  const std::complex<double> b = z + c - 1.0;
  const std::complex<double> disc = std::sqrt(b * b - 4.0 * a);
  const std::complex<double> m1 = (-b + disc) / (2.0 * a);
  const std::complex<double> m2 = (-b - disc) / (2.0 * a);
  return m1.imag() > 0.0 ? m1 : m2;
}

/// Herglotz positivity, density normalization, moment/density duality and the MP oracle.
inline PropertyResult spectral_properties() {
  PropertyResult r;
  const Index N = 24;

  // MP oracle on a 50-point grid.
  {
    const double c = 0.25;
    const auto mp = SpectralModel::oracle(MatrixXd::Identity(N, N), 0.0, c);
    const StieltjesSolver solver(mp);
    for (int k = 0; k < 50; ++k) {
      const std::complex<double> z(0.05 + 3.0 * k / 49.0, k % 2 == 0 ? 1e-2 : 0.3);
      const auto p = solver.solve_cold(z);
      const auto ref = marchenko_pastur_stieltjes(z, c);
      r.expect(std::abs(p.m - ref) <= 1e-6, "MP oracle mismatch at x=" + std::to_string(z.real()));
    }
  }

  // Herglotz, normalization and duality on models with and without a common eigenbasis.
  std::mt19937_64 rng(31);
  const MatrixXd C = build_toeplitz_cov(0.5, N);
  const MatrixXd D = random_spd(rng, N);
  std::normal_distribution<double> nd;
  MatrixXd a(N, 2);
  for (Index i = 0; i < N; ++i)
    for (Index j = 0; j < 2; ++j) a(i, j) = nd(rng);
  const std::vector<std::pair<std::string, SpectralModel>> models{
      {"mp", SpectralModel::oracle(MatrixXd::Identity(N, N), 0.0, 0.25)},
      {"toeplitz-identity", SpectralModel::random(C, MatrixXd::Identity(N, N), 1.0, 0.4, 0.1, 0.2)},
      {"toeplitz-random", SpectralModel::random(C, D, 0.9, 0.5, 0.1, 0.2)},
      {"explicit", SpectralModel::deterministic(C, weighted_outlier_matrix(a, VectorXd::Constant(2, 0.3), 200.0), 1.0,
                                                0.01, 0.2)}};
  for (const auto& [name, model] : models) {
    const double hi = support_upper_bound(model);
    const auto grid = linspace(0.0, hi, 4001);
    const StieltjesSolver solver(model);
    std::vector<std::complex<double>> zs;
    for (double x : linspace(0.0, hi, 501)) zs.emplace_back(x, 1e-4);
    const auto pts = solve_on_path(solver, zs);
    bool herglotz = true;
    for (const auto& p : pts) {
      herglotz = herglotz && p.m.imag() > 0.0;
      for (const auto& e : p.e) herglotz = herglotz && e.imag() > 0.0;
    }
    r.expect(herglotz, "Herglotz positivity fails for " + name);
    const auto d = density_on_grid(model, grid, 1e-4);
    r.expect(std::abs(d.mass - 1.0) <= 1e-2, "density mass " + std::to_string(d.mass) + " for " + name);
    bool nonneg = true;
    for (double v : d.density) nonneg = nonneg && v >= -1e-8;
    r.expect(nonneg, "negative density for " + name);
    const auto t = moments_generic(model, 4);
    for (int p = 1; p <= 4; ++p) {
      const double mp = t.moments[static_cast<std::size_t>(p)];
      r.expect(std::abs(d.moment(p) - mp) <= 1e-2 * mp,
               "moment/density duality p=" + std::to_string(p) + " for " + name + ": " + std::to_string(d.moment(p)) +
                   " vs " + std::to_string(mp));
    }
  }
  return r;
}

}  // namespace rs_test
