#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <variant>

#include "common.hpp"
#include "estimators.hpp"
#include "weights.hpp"

namespace robust_scatter {

/// Outliers given as explicit vectors a_1..a_K (columns).
struct DeterministicOutliers {
  MatrixXd vectors;
};

/// Outliers drawn as a_i = D^{1/2} x'_i.
struct RandomOutliers {
  MatrixXd D;
};

/// Deterministic inputs of the large-dimensional regime at finite (N, n).
///
/// The finite-n ratios c_n = N/n and ε_n are used wherever the limit constants c, ε
/// appear in the weight system.
struct PopulationModel {
  MatrixXd C;
  std::variant<DeterministicOutliers, RandomOutliers> outliers;
  double c_n = 0.0;
  double epsilon_n = 0.0;

  static PopulationModel deterministic(MatrixXd C, MatrixXd a, Index n) {
    if (n < 1) throw DimensionError("sample count n must be positive");
    PopulationModel m;
    const auto N = C.rows();
    const auto K = a.cols();
    m.C = std::move(C);
    if (a.rows() != N && K > 0) throw DimensionError("outlier vectors must have N rows");
    m.outliers = DeterministicOutliers{std::move(a)};
    m.c_n = static_cast<double>(N) / static_cast<double>(n);
    m.epsilon_n = static_cast<double>(K) / static_cast<double>(n);
    m.validate();
    return m;
  }

  static PopulationModel random(MatrixXd C, MatrixXd D, double c_n, double epsilon_n) {
    PopulationModel m;
    m.C = std::move(C);
    m.outliers = RandomOutliers{std::move(D)};
    m.c_n = c_n;
    m.epsilon_n = epsilon_n;
    m.validate();
    return m;
  }

  Index N() const noexcept { return C.rows(); }
  double n() const noexcept { return static_cast<double>(N()) / c_n; }
  bool is_random() const noexcept { return std::holds_alternative<RandomOutliers>(outliers); }
  const MatrixXd& D() const { return std::get<RandomOutliers>(outliers).D; }
  const MatrixXd& outlier_vectors() const { return std::get<DeterministicOutliers>(outliers).vectors; }
  Index n_outlier_vectors() const { return is_random() ? 0 : outlier_vectors().cols(); }

  void validate() const {
    if (C.rows() < 1 || C.rows() != C.cols()) throw DimensionError("C must be a non-empty square matrix");
    if (!(c_n > 0.0) || !(epsilon_n >= 0.0) || !(epsilon_n < 1.0)) throw DomainError("need c_n > 0 and 0 <= epsilon_n < 1");
    Eigen::LLT<MatrixXd> llt(C);
    if (llt.info() != Eigen::Success) throw DomainError("C must be positive definite");
    if (is_random()) {
      if (D().rows() != N() || D().cols() != N()) throw DimensionError("D must be N x N");
      Eigen::LLT<MatrixXd> lltd(D());
      if (lltd.info() != Eigen::Success) throw DomainError("D must be positive definite");
    }
  }

  /// (1/n) ‖Σ C^{-1/2} a_i a_i^† C^{-1/2}‖ for explicit outliers; ‖D C^{-1}‖ for random ones.
  double assumption_statistic() const {
    Eigen::LLT<MatrixXd> llt(C);
    if (is_random()) return detail::spectral_norm(MatrixXd(llt.solve(D().transpose()).transpose()));
    const MatrixXd w = llt.matrixL().solve(outlier_vectors());
    if (w.cols() == 0) return 0.0;
    return detail::spectral_norm_hermitian(MatrixXd(w * w.transpose() / n()));
  }

  /// (1/N) a_i^† C^{-1} a_i per outlier vector.
  VectorXd alignments() const {
    Eigen::LLT<MatrixXd> llt(C);
    const MatrixXd w = llt.matrixL().solve(outlier_vectors());
    return w.colwise().squaredNorm().transpose() / static_cast<double>(N());
  }

  /// (1/N) tr(D C^{-1}).
  double trace_alignment() const {
    Eigen::LLT<MatrixXd> llt(C);
    return llt.solve(D()).trace() / static_cast<double>(N());
  }
};

struct WeightBounds {
  double q0 = 0.0;  // ψ^{-1}(1 / (1 - ε - c))
  VectorXd w;       // q0 (1/N) a_i^† C^{-1} a_i, or q0 (1/N) tr(D C^{-1})
};

/// Solution (γ, α_1..α_K) of the weight system, or (γ^R, α^R) in the random case.
struct WeightProfile {
  double gamma = 0.0;
  VectorXd alphas;
  double v_gamma = 0.0;
  VectorXd v_alphas;
  int iterations = 0;
  double residual = 0.0;
  WeightBounds bounds;
  bool monotone = true;  // every iterate <= its predecessor (only meaningful from the feasible start)
  bool random_outliers = false;
};

/// The map h whose fixed point is the weight system; component 0 drives γ, the rest the α's.
///
/// For explicit outliers h has 1 + K components; for random outliers it has 2.
class InterferenceMap {
 public:
  InterferenceMap(const PopulationModel& model, const UFunction& u, bool rank_one_fast_path = false)
      : model_(model), v_(u, model.c_n), fast_(rank_one_fast_path) {
    const auto adm = validate_admissibility(u, RegimeParams{model.c_n, model.epsilon_n});
    if (!adm.pass) throw AdmissibilityError("weight system not admissible: " + adm.reason);
  }

  Index size() const { return model_.is_random() ? 2 : 1 + model_.n_outlier_vectors(); }
  const EquivalentWeight& equivalent_weight() const noexcept { return v_; }

  /// Coefficient v(q) / (1 + c v(q) q) multiplying each class covariance.
  double class_coefficient(double q) const {
    const double vq = v_.v(q);
    return vq / (1.0 + model_.c_n * vq * q);
  }

  VectorXd operator()(const VectorXd& q) const {
    if (q.size() != size()) throw DimensionError("interference map argument has wrong size");
    for (Index i = 0; i < q.size(); ++i)
      if (!(q(i) >= 0.0)) throw DomainError("interference map needs nonnegative arguments");
    const double invN = 1.0 / static_cast<double>(model_.N());
    const double theta0 = (1.0 - model_.epsilon_n) * class_coefficient(q(0));
    VectorXd h(size());
    if (model_.is_random()) {
      const MatrixXd B = theta0 * model_.C + model_.epsilon_n * class_coefficient(q(1)) * model_.D();
      Eigen::LLT<MatrixXd> llt(B);
      h(0) = llt.solve(model_.C).trace() * invN;
      h(1) = llt.solve(model_.D()).trace() * invN;
      return h;
    }
    const MatrixXd& a = model_.outlier_vectors();
    const double inv_n = 1.0 / model_.n();
    VectorXd va(a.cols());
    for (Index j = 0; j < a.cols(); ++j) va(j) = v_.v(q(j + 1));
    MatrixXd B = theta0 * model_.C;
    if (a.cols() > 0) B.noalias() += inv_n * a * va.asDiagonal() * a.transpose();
    Eigen::LLT<MatrixXd> llt(B);
    if (llt.info() != Eigen::Success) throw SolverError("weight-system matrix lost positive definiteness", INFINITY, 0);
    h(0) = llt.solve(model_.C).trace() * invN;
    for (Index i = 0; i < a.cols(); ++i) {
      if (fast_) {
        const double s = a.col(i).dot(llt.solve(a.col(i)));
        h(i + 1) = s / (1.0 - inv_n * va(i) * s) * invN;
      } else {
        MatrixXd Bi = B;
        Bi.noalias() -= inv_n * va(i) * a.col(i) * a.col(i).transpose();
        Eigen::LLT<MatrixXd> lli(Bi);
        h(i + 1) = a.col(i).dot(lli.solve(a.col(i))) * invN;
      }
    }
    return h;
  }

  /// Feasible point (q0, w) with h(q0, w) <= (q0, w) componentwise.
  WeightBounds feasible_point() const {
    WeightBounds b;
    b.q0 = v_.psi_inverse(1.0 / (1.0 - model_.epsilon_n - model_.c_n));
    if (model_.is_random()) {
      b.w = VectorXd::Constant(1, b.q0 * model_.trace_alignment());
    } else {
      b.w = b.q0 * model_.alignments();
    }
    return b;
  }

 private:
  PopulationModel model_;
  EquivalentWeight v_;
  bool fast_;
};

struct WeightSolverConfig {
  double tol = 1e-10;  // max relative component change
  int max_iter = 10000;
  std::optional<VectorXd> start;  // defaults to the feasible point
  bool rank_one_fast_path = false;
};

namespace detail {

inline WeightProfile iterate_interference(const PopulationModel& model, const UFunction& u,
                                          const WeightSolverConfig& cfg) {
  InterferenceMap h(model, u, cfg.rank_one_fast_path);
  WeightProfile prof;
  prof.random_outliers = model.is_random();
  prof.bounds = h.feasible_point();
  VectorXd q(h.size());
  if (cfg.start) {
    if (cfg.start->size() != h.size()) throw DimensionError("start point has wrong size");
    q = *cfg.start;
  } else {
    q(0) = prof.bounds.q0;
    q.tail(h.size() - 1) = prof.bounds.w;
  }
  double change = INFINITY;
  int it = 0;
  for (; it < cfg.max_iter; ++it) {
    VectorXd next = h(q);
    change = 0.0;
    for (Index i = 0; i < q.size(); ++i) {
      if (next(i) > q(i) * (1.0 + 1e-12) + 1e-300) prof.monotone = false;
      change = std::max(change, std::abs(next(i) - q(i)) / std::max(next(i), 1e-300));
    }
    q = std::move(next);
    if (change <= cfg.tol) {
      ++it;
      break;
    }
  }
  if (change > cfg.tol) throw SolverError("weight system did not converge", change, it);

  const VectorXd hq = h(q);
  prof.residual = 0.0;
  for (Index i = 0; i < q.size(); ++i) prof.residual = std::max(prof.residual, std::abs(hq(i) - q(i)) / q(i));
  prof.iterations = it;
  prof.gamma = q(0);
  prof.alphas = q.tail(q.size() - 1);
  const auto& v = h.equivalent_weight();
  prof.v_gamma = v.v(prof.gamma);
  prof.v_alphas.resize(prof.alphas.size());
  for (Index i = 0; i < prof.alphas.size(); ++i) prof.v_alphas(i) = v.v(prof.alphas(i));
  return prof;
}

}  // namespace detail

/// Solves the weight system for explicit outliers by Yates iteration from the feasible point.
inline WeightProfile solve_weight_system(const PopulationModel& model, const UFunction& u,
                                         const WeightSolverConfig& cfg = {}) {
  if (model.is_random()) throw ConfigError("solve_weight_system expects explicit outlier vectors");
  return detail::iterate_interference(model, u, cfg);
}

/// Solves the two-equation (γ^R, α^R) system for random outliers a_i = D^{1/2} x'_i.
inline WeightProfile solve_random_outlier_system(const PopulationModel& model, const UFunction& u,
                                                 const WeightSolverConfig& cfg = {}) {
  if (!model.is_random()) throw ConfigError("solve_random_outlier_system expects a random-outlier model");
  return detail::iterate_interference(model, u, cfg);
}

struct OutlierFreeWeight {
  double gamma = 0.0;
  double v_gamma = 0.0;
};

/// γ = φ^{-1}(1) / (1 - c) and v(γ) = 1 / φ^{-1}(1).
inline OutlierFreeWeight outlier_free_gamma(const UFunction& u, double c) {
  [[maybe_unused]] const EquivalentWeight admissible(u, c);
  const double root = u.phi_inverse(1.0);
  return {root / (1.0 - c), 1.0 / root};
}

/// Common weight argument α' of K identical outliers with alignment τ = (1/N) a^† C^{-1} a:
/// the root of α' / (1 - c_n (K-1) ψ(α')) = γ τ.
inline double identical_outliers_alpha(const UFunction& u, double c_n, int K, double tau) {
  if (K < 1) throw DomainError("need at least one outlier");
  if (!(tau >= 0.0)) throw DomainError("alignment tau must be nonnegative");
  const EquivalentWeight v(u, c_n);
  const double target = outlier_free_gamma(u, c_n).gamma * tau;
  if (K == 1 || tau == 0.0) return target;

  const double k1 = c_n * static_cast<double>(K - 1);
  auto lhs = [&](double a) { return a / (1.0 - k1 * v.psi(a)); };
  if (1.0 / k1 >= v.psi_infinity()) return detail::invert_increasing(lhs, target, target);

  const double cap = v.psi_inverse(1.0 / k1);
  double lo = 0.0;
  double hi = 0.5 * cap;
  for (int k = 0; lhs(hi) < target; ++k) {
    if (k > 60) throw SolverError("could not bracket the identical-outlier equation", target, k);
    lo = hi;
    hi = 0.5 * (hi + cap);
  }
  std::uintmax_t max_iter = 200;
  const auto r = boost::math::tools::toms748_solve([&](double a) { return lhs(a) - target; }, lo, hi,
                                                   boost::math::tools::eps_tolerance<double>(50), max_iter);
  return 0.5 * (r.first + r.second);
}

struct EpsilonZeroLimit {
  double gamma = 0.0;
  double alpha = 0.0;
  double v_gamma = 0.0;
  double v_alpha = 0.0;
};

/// ε -> 0 limit of the random-outlier weights: γ = φ^{-1}(1)/(1-c), α = γ (1/N) tr(D C^{-1}).
inline EpsilonZeroLimit epsilon_zero_limit(const PopulationModel& model, const UFunction& u) {
  if (!model.is_random()) throw ConfigError("epsilon_zero_limit expects a random-outlier model");
  Eigen::LLT<MatrixXd> llt(model.C);
  if (llt.info() != Eigen::Success) throw DomainError("C is singular");
  const EquivalentWeight v(u, model.c_n);
  EpsilonZeroLimit lim;
  lim.gamma = outlier_free_gamma(u, model.c_n).gamma;
  lim.alpha = lim.gamma * model.trace_alignment();
  lim.v_gamma = v.v(lim.gamma);
  lim.v_alpha = v.v(lim.alpha);
  return lim;
}

/// Ŝ = v(γ) (1/n) Σ y_i y_i^† + (1/n) Σ v(α_i) a_i a_i^†.
///
/// A profile carrying a single α (random outliers) applies it to every outlier column.
template <SampleScalar Scalar>
Matrix<Scalar> build_S_hat(const Dataset<Scalar>& d, const WeightProfile& w) {
  const Index K = d.n_outliers;
  VectorXd va;
  if (w.random_outliers && w.v_alphas.size() == 1) {
    va = VectorXd::Constant(K, w.v_alphas(0));
  } else if (w.v_alphas.size() == K) {
    va = w.v_alphas;
  } else {
    throw DimensionError("weight profile does not match the dataset's outlier count");
  }
  const double inv_n = 1.0 / static_cast<double>(d.n());
  const auto y = d.legitimate();
  Matrix<Scalar> s = (w.v_gamma * inv_n) * (y * y.adjoint());
  if (K > 0) {
    const auto a = d.outliers();
    s.noalias() += inv_n * a * va.template cast<Scalar>().asDiagonal() * a.adjoint();
  }
  detail::hermitize(s);
  return s;
}

}  // namespace robust_scatter
