#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include "common.hpp"
#include "parallel.hpp"

namespace robust_scatter {

/// One population class of the limiting model: covariance R_k carried by a fraction of the n samples.
struct SpectralClass {
  MatrixXd R;
  double fraction = 1.0;
};

/// Deterministic-equivalent spectral model
///   m(z) = (1/N) tr(Σ_k f_k R_k / (1 + e_k(z)) + A - z I)^{-1},
///   e_k(z) = (1/n) tr R_k (Σ_j f_j R_j / (1 + e_j(z)) + A - z I)^{-1}.
struct SpectralModel {
  std::vector<SpectralClass> classes;
  MatrixXd A;  // N x N nonnegative definite; zero when absent
  double c_n = 0.0;

  Index N() const { return classes.empty() ? 0 : classes.front().R.rows(); }

  void validate() const {
    if (classes.empty()) throw DimensionError("spectral model needs at least one class");
    const Index n = N();
    for (const auto& k : classes) {
      if (k.R.rows() != n || k.R.cols() != n) throw DimensionError("class matrices must all be N x N");
      if (!(k.fraction >= 0.0)) throw DomainError("class fractions must be nonnegative");
    }
    if (A.rows() != n || A.cols() != n) throw DimensionError("A must be N x N");
    if (!(c_n > 0.0)) throw DomainError("c_n must be positive");
    if ((A - A.transpose()).norm() > 1e-10 * (1.0 + A.norm())) throw DomainError("A must be symmetric");
    if (A.norm() > 0.0) {
      Eigen::SelfAdjointEigenSolver<MatrixXd> es(A, Eigen::EigenvaluesOnly);
      if (es.eigenvalues()(0) < -1e-10 * (1.0 + A.norm())) throw DomainError("A must be nonnegative definite");
    }
  }

  /// Robust estimator, explicit outliers: class v(γ) C with fraction (1 - ε), plus A_N.
  static SpectralModel deterministic(const MatrixXd& C, MatrixXd A_N, double v_gamma, double epsilon, double c_n) {
    SpectralModel m{{{v_gamma * C, 1.0 - epsilon}}, std::move(A_N), c_n};
    m.validate();
    return m;
  }

  /// Robust estimator, random outliers: classes v(γ^R) C and v(α^R) D with fractions (1 - ε, ε).
  static SpectralModel random(const MatrixXd& C, const MatrixXd& D, double v_gamma, double v_alpha, double epsilon,
                              double c_n) {
    SpectralModel m{{{v_gamma * C, 1.0 - epsilon}, {v_alpha * D, epsilon}}, MatrixXd::Zero(C.rows(), C.rows()), c_n};
    m.validate();
    return m;
  }

  /// Sample covariance of legitimate and random-outlier data with unit weights.
  static SpectralModel scm(const MatrixXd& C, const MatrixXd& D, double epsilon, double c_n) {
    return random(C, D, 1.0, 1.0, epsilon, c_n);
  }

  /// Normalized SCM: each sample is rescaled by its asymptotic norm (1/N) tr of its class covariance.
  static SpectralModel normalized_scm(const MatrixXd& C, const MatrixXd& D, double epsilon, double c_n) {
    const double N = static_cast<double>(C.rows());
    return random(C, D, N / C.trace(), N / D.trace(), epsilon, c_n);
  }

  /// Oracle estimator (1/n) Σ_{legitimate} y_i y_i^†.
  static SpectralModel oracle(const MatrixXd& C, double epsilon, double c_n) {
    SpectralModel m{{{C, 1.0 - epsilon}}, MatrixXd::Zero(C.rows(), C.rows()), c_n};
    m.validate();
    return m;
  }
};

/// A_N = (1/n) Σ v(α_i) a_i a_i^†.
inline MatrixXd weighted_outlier_matrix(const MatrixXd& a, const VectorXd& v_alphas, double n) {
  if (a.cols() != v_alphas.size()) throw DimensionError("one weight per outlier vector is required");
  MatrixXd m = a * v_alphas.asDiagonal() * a.transpose() / n;
  return 0.5 * (m + m.transpose());
}

struct StieltjesConfig {
  double tol = 1e-12;
  int max_iter = 500000;
  double damping = 0.5;
  double cold_start_imag = 1.0;  // continuation in Im z starts here for cold solves
  bool diagonal_fast_path = true;
};

struct StieltjesPoint {
  Complex z;
  Complex m;
  std::vector<Complex> e;
  int iterations = 0;
  double defect = 0.0;
};

/// Solves the per-class fixed point e_k(z) by damped Picard iteration.
///
/// When all class matrices and A commute the problem is diagonalized once and each
/// iteration costs O(N K); otherwise every iteration factors E - z I.
class StieltjesSolver {
 public:
  explicit StieltjesSolver(SpectralModel model, StieltjesConfig cfg = {}) : model_(std::move(model)), cfg_(cfg) {
    model_.validate();
    if (cfg_.diagonal_fast_path) try_diagonalize();
  }

  const SpectralModel& model() const noexcept { return model_; }
  bool diagonal_fast_path() const noexcept { return diagonal_; }

  /// Fixed point at z warm-started from `start` (one entry per class).
  StieltjesPoint solve(Complex z, std::span<const Complex> start) const {
    if (!(z.imag() > 0.0)) throw DomainError("Stieltjes transform requires Im z > 0");
    const std::size_t K = model_.classes.size();
    if (start.size() != K) throw DimensionError("warm start needs one value per class");
    std::vector<Complex> e(start.begin(), start.end());
    std::vector<Complex> next(K);
    Complex m;
    double defect = INFINITY;
    int it = 0;
    for (; it < cfg_.max_iter; ++it) {
      m = evaluate(z, e, next);
      defect = 0.0;
      for (std::size_t k = 0; k < K; ++k) defect = std::max(defect, std::abs(next[k] - e[k]) / (1.0 + std::abs(e[k])));
      if (defect <= cfg_.tol) break;
      for (std::size_t k = 0; k < K; ++k) e[k] = (1.0 - cfg_.damping) * e[k] + cfg_.damping * next[k];
    }
    if (defect > cfg_.tol) throw SolverError("Stieltjes fixed point did not converge", defect, it);
    return {z, m, std::move(e), it, defect};
  }

  /// Fixed point at z without a warm start: continuation from Im z = cold_start_imag down to Im z.
  StieltjesPoint solve_cold(Complex z) const {
    if (!(z.imag() > 0.0)) throw DomainError("Stieltjes transform requires Im z > 0");
    std::vector<Complex> e(model_.classes.size(), Complex(0.0, 0.0));
    int total = 0;
    for (double y = std::max(cfg_.cold_start_imag, z.imag()); y > z.imag(); y *= 0.5) {
      auto p = solve(Complex(z.real(), y), e);
      e = std::move(p.e);
      total += p.iterations;
    }
    auto p = solve(z, e);
    p.iterations += total;
    return p;
  }

  /// Evaluates m(z) and the right-hand sides F_k(e) of the class equations.
  Complex evaluate(Complex z, std::span<const Complex> e, std::span<Complex> out) const {
    const std::size_t K = model_.classes.size();
    const double N = static_cast<double>(model_.N());
    const double scale = model_.c_n / N;
    std::vector<Complex> coef(K);
    for (std::size_t k = 0; k < K; ++k) coef[k] = model_.classes[k].fraction / (1.0 + e[k]);
    if (diagonal_) {
      Complex m = 0.0;
      for (std::size_t k = 0; k < K; ++k) out[k] = 0.0;
      for (Index i = 0; i < diag_R_.rows(); ++i) {
        Complex den = diag_A_(i) - z;
        for (std::size_t k = 0; k < K; ++k) den += coef[k] * diag_R_(i, static_cast<Index>(k));
        const Complex r = 1.0 / den;
        m += r;
        for (std::size_t k = 0; k < K; ++k) out[k] += diag_R_(i, static_cast<Index>(k)) * r;
      }
      for (std::size_t k = 0; k < K; ++k) out[k] *= scale;
      return m / N;
    }
    MatrixXc E = model_.A.cast<Complex>();
    E.diagonal().array() -= z;
    for (std::size_t k = 0; k < K; ++k) E.real() += coef[k].real() * model_.classes[k].R;
    for (std::size_t k = 0; k < K; ++k) E.imag() += coef[k].imag() * model_.classes[k].R;
    const MatrixXc inv = Eigen::PartialPivLU<MatrixXc>(E).inverse();
    // R_k is symmetric, so tr(R_k E^{-1}) is the sum of the entrywise product.
    for (std::size_t k = 0; k < K; ++k) {
      const auto& R = model_.classes[k].R.array();
      out[k] = scale * Complex((inv.real().array() * R).sum(), (inv.imag().array() * R).sum());
    }
    return inv.trace() / N;
  }

 private:
  void try_diagonalize() {
    std::vector<const MatrixXd*> mats;
    for (const auto& k : model_.classes) mats.push_back(&k.R);
    mats.push_back(&model_.A);
    double scale = 0.0;
    for (auto* m : mats) scale = std::max(scale, m->norm());
    for (std::size_t i = 0; i < mats.size(); ++i)
      for (std::size_t j = i + 1; j < mats.size(); ++j)
        if ((*mats[i] * *mats[j] - *mats[j] * *mats[i]).norm() > 1e-10 * (1.0 + scale * scale)) return;
    // Irrational mixing coefficients keep accidental eigenvalue ties of the combination unlikely.
    MatrixXd mix = MatrixXd::Zero(model_.N(), model_.N());
    for (std::size_t i = 0; i < mats.size(); ++i) mix += std::sqrt(2.0 + static_cast<double>(i)) * *mats[i];
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(mix);
    const MatrixXd& Q = es.eigenvectors();
    diag_R_.resize(model_.N(), static_cast<Index>(model_.classes.size()));
    for (std::size_t k = 0; k < mats.size(); ++k) {
      const MatrixXd t = Q.transpose() * *mats[k] * Q;
      const double off = (t - MatrixXd(t.diagonal().asDiagonal())).norm();
      if (off > 1e-9 * (1.0 + t.norm())) return;
      if (k < model_.classes.size()) {
        diag_R_.col(static_cast<Index>(k)) = t.diagonal();
      } else {
        diag_A_ = t.diagonal();
      }
    }
    diagonal_ = true;
  }

  SpectralModel model_;
  StieltjesConfig cfg_;
  bool diagonal_ = false;
  MatrixXd diag_R_;  // N x K eigenvalues of each class in the common basis
  VectorXd diag_A_;
};

/// Solves the fixed point on a list of z values, warm-starting each point from its predecessor.
/// Points are processed in fixed-size batches (independent of thread count); the first point
/// of each batch is solved cold.
inline std::vector<StieltjesPoint> solve_on_path(const StieltjesSolver& solver, std::span<const Complex> zs,
                                                 std::size_t batch = 512) {
  std::vector<StieltjesPoint> out(zs.size());
  const std::size_t n_batches = (zs.size() + batch - 1) / batch;
  parallel_for(n_batches, [&](std::size_t b) {
    const std::size_t lo = b * batch;
    const std::size_t hi = std::min(zs.size(), lo + batch);
    out[lo] = solver.solve_cold(zs[lo]);
    for (std::size_t i = lo + 1; i < hi; ++i) out[i] = solver.solve(zs[i], out[i - 1].e);
  });
  return out;
}

/// m_N(z), e_N(z) for the explicit-outlier model (single class plus A_N).
inline StieltjesPoint stieltjes_deterministic(Complex z, const SpectralModel& model, StieltjesConfig cfg = {}) {
  if (model.classes.size() != 1) throw DimensionError("deterministic spectral model has exactly one class");
  return StieltjesSolver(model, cfg).solve_cold(z);
}

/// m^R(z), (e_{N,1}, e_{N,2}) for the random-outlier model.
inline StieltjesPoint stieltjes_random(Complex z, const SpectralModel& model, StieltjesConfig cfg = {}) {
  if (model.classes.size() != 2) throw DimensionError("random-outlier spectral model has exactly two classes");
  return StieltjesSolver(model, cfg).solve_cold(z);
}

struct DensityEstimate {
  std::vector<double> x;
  std::vector<double> density;
  double y_imag = 0.0;
  double mass = 0.0;  // trapezoid integral over the grid

  /// Cumulative trapezoid integral of the density at each grid point.
  std::vector<double> cdf() const {
    std::vector<double> F(x.size(), 0.0);
    for (std::size_t i = 1; i < x.size(); ++i)
      F[i] = F[i - 1] + 0.5 * (density[i] + density[i - 1]) * (x[i] - x[i - 1]);
    return F;
  }

  /// Trapezoid estimate of ∫ x^p density dx.
  double moment(int p) const {
    double s = 0.0;
    for (std::size_t i = 1; i < x.size(); ++i)
      s += 0.5 * (std::pow(x[i], p) * density[i] + std::pow(x[i - 1], p) * density[i - 1]) * (x[i] - x[i - 1]);
    return s;
  }
};

/// density(x) = (1/π) Im m(x + i y_imag) on a sorted grid.
inline DensityEstimate density_on_grid(const SpectralModel& model, std::span<const double> x_grid, double y_imag = 1e-4,
                                       StieltjesConfig cfg = {}) {
  if (!(y_imag > 0.0)) throw DomainError("density needs y_imag > 0");
  if (x_grid.size() < 2) throw DomainError("x grid needs at least two points");
  for (std::size_t i = 1; i < x_grid.size(); ++i)
    if (!(x_grid[i] > x_grid[i - 1])) throw DomainError("x grid must be strictly increasing");
  const StieltjesSolver solver(model, cfg);
  std::vector<Complex> zs;
  zs.reserve(x_grid.size());
  for (double x : x_grid) zs.emplace_back(x, y_imag);
  const auto pts = solve_on_path(solver, zs);

  DensityEstimate d;
  d.x.assign(x_grid.begin(), x_grid.end());
  d.y_imag = y_imag;
  d.density.resize(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) d.density[i] = pts[i].m.imag() / std::numbers::pi;
  const auto F = d.cdf();
  d.mass = F.back();
  return d;
}

/// Intervals of grid points where (1/π) Im m(x + i y_imag) exceeds `threshold`.
///
/// Off the support Im m(x + iy) decays only like y, so y_imag here must be far below the
/// threshold; the default 1e-8 resolves edges to about 1e-4 for unit-scale spectra.
inline std::vector<std::pair<double, double>> estimate_support(const SpectralModel& model, std::span<const double> x_grid,
                                                               double y_imag = 1e-8, double threshold = 1e-6,
                                                               StieltjesConfig cfg = {}) {
  const auto d = density_on_grid(model, x_grid, y_imag, cfg);
  std::vector<std::pair<double, double>> support;
  bool inside = false;
  for (std::size_t i = 0; i < d.x.size(); ++i) {
    const bool above = d.density[i] > threshold;
    if (above && !inside) support.emplace_back(d.x[i], d.x[i]);
    if (above) support.back().second = d.x[i];
    inside = above;
  }
  return support;
}

inline std::vector<double> linspace(double lo, double hi, std::size_t count) {
  std::vector<double> v(count);
  for (std::size_t i = 0; i < count; ++i)
    v[i] = count == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
  return v;
}

inline constexpr int kMaxMomentOrder = 12;

/// Moments M_p = ((-1)^p / p!) (1/N) tr T_p with the recursion intermediates.
struct MomentTable {
  int p_max = 0;
  std::vector<double> moments;            // moments[p] = M_p, moments[0] = 1
  std::vector<MatrixXd> T;                // T_0 .. T_{p_max}
  std::vector<MatrixXd> Q;                // Q_1 .. Q_{p_max} stored at index p (index 0 unused)
  std::vector<std::vector<double>> f;     // f[k][p]
  std::vector<std::vector<double>> beta;  // beta[k][p]
};

namespace detail {

inline std::uint64_t binomial(int n, int k) {
  static const auto table = [] {
    std::array<std::array<std::uint64_t, kMaxMomentOrder + 1>, kMaxMomentOrder + 1> t{};
    for (int i = 0; i <= kMaxMomentOrder; ++i) {
      t[i][0] = t[i][i] = 1;
      for (int j = 1; j < i; ++j) t[i][j] = t[i - 1][j - 1] + t[i - 1][j];
    }
    return t;
  }();
  return table[static_cast<std::size_t>(n)][static_cast<std::size_t>(k)];
}

inline double factorial(int p) {
  double r = 1.0;
  for (int i = 2; i <= p; ++i) r *= i;
  return r;
}

}  // namespace detail

/// Moment recursion for the class-mixture model with an additive A:
///   T_{p+1} = -Σ_i T_{p-i} A T_i + Σ_i Σ_j C(p,i) C(i,j) T_{p-i} Q_{i-j+1} T_j
///   Q_{p+1} = (p+1) Σ_k f_k f_{k,p} R_k
///   f_{k,p+1} = Σ_i Σ_j C(p,i) C(i,j) (p-i+1) f_{k,j} f_{k,i-j} β_{k,p-i}
///   β_{k,p+1} = (1/n) tr R_k T_{p+1}
/// with T_0 = I, f_{k,0} = -1, β_{k,0} = (1/n) tr R_k. Class fractions f_k fold repeated
/// per-sample covariances into one class.
inline MomentTable moments_generic(const SpectralModel& model, int p_max) {
  model.validate();
  if (p_max < 1) throw DomainError("p_max must be at least 1");
  if (p_max > kMaxMomentOrder) throw DomainError("moment recursion is limited to p_max <= 12");
  const Index N = model.N();
  const std::size_t K = model.classes.size();
  const double trace_scale = model.c_n / static_cast<double>(N);
  const bool has_A = model.A.norm() > 0.0;

  MomentTable t;
  t.p_max = p_max;
  t.T.push_back(MatrixXd::Identity(N, N));
  t.Q.push_back(MatrixXd());
  t.f.assign(K, {-1.0});
  t.beta.resize(K);
  for (std::size_t k = 0; k < K; ++k) t.beta[k].push_back(trace_scale * model.classes[k].R.trace());
  t.moments.push_back(1.0);

  for (int p = 0; p < p_max; ++p) {
    MatrixXd q = MatrixXd::Zero(N, N);
    for (std::size_t k = 0; k < K; ++k) q += model.classes[k].fraction * t.f[k][static_cast<std::size_t>(p)] * model.classes[k].R;
    t.Q.push_back(static_cast<double>(p + 1) * q);

    MatrixXd next = MatrixXd::Zero(N, N);
    for (int i = 0; i <= p; ++i) {
      if (has_A) next.noalias() -= t.T[static_cast<std::size_t>(p - i)] * model.A * t.T[static_cast<std::size_t>(i)];
      for (int j = 0; j <= i; ++j) {
        const double b = static_cast<double>(detail::binomial(p, i) * detail::binomial(i, j));
        next.noalias() += b * (t.T[static_cast<std::size_t>(p - i)] * t.Q[static_cast<std::size_t>(i - j + 1)] *
                               t.T[static_cast<std::size_t>(j)]);
      }
    }
    next = (0.5 * (next + next.transpose())).eval();

    for (std::size_t k = 0; k < K; ++k) {
      const auto& fk = t.f[k];
      const auto& bk = t.beta[k];
      double s = 0.0;
      for (int i = 0; i <= p; ++i)
        for (int j = 0; j <= i; ++j)
          s += static_cast<double>(detail::binomial(p, i) * detail::binomial(i, j)) * (p - i + 1) *
               fk[static_cast<std::size_t>(j)] * fk[static_cast<std::size_t>(i - j)] * bk[static_cast<std::size_t>(p - i)];
      t.f[k].push_back(s);
      t.beta[k].push_back(trace_scale * (model.classes[k].R * next).trace());
    }
    const int order = p + 1;
    const double sign = order % 2 == 0 ? 1.0 : -1.0;
    t.moments.push_back(sign / detail::factorial(order) * next.trace() / static_cast<double>(N));
    t.T.push_back(std::move(next));
  }
  return t;
}

/// Explicit-outlier moments: one class v(γ) C with fraction (1 - ε), plus A_N.
inline MomentTable moments_deterministic(const SpectralModel& model, int p_max) {
  if (model.classes.size() != 1) throw DimensionError("deterministic spectral model has exactly one class");
  return moments_generic(model, p_max);
}

/// Random-outlier moments: classes v(γ^R) C and v(α^R) D, no A.
inline MomentTable moments_random(const SpectralModel& model, int p_max) {
  if (model.classes.size() != 2) throw DimensionError("random-outlier spectral model has exactly two classes");
  if (model.A.norm() > 0.0) throw DomainError("random-outlier spectral model has no additive term");
  return moments_generic(model, p_max);
}

/// Scale-free normalized moments M̄_p = M_p / M_1^p (index p; M̄_0 = M̄_1 = 1).
inline std::vector<double> normalized_moments(const MomentTable& t) {
  if (t.moments.size() < 2 || !(t.moments[1] > 0.0)) throw DomainError("normalized moments need M_1 > 0");
  std::vector<double> out(t.moments.size());
  for (std::size_t p = 0; p < t.moments.size(); ++p) out[p] = t.moments[p] / std::pow(t.moments[1], static_cast<double>(p));
  return out;
}

}  // namespace robust_scatter
