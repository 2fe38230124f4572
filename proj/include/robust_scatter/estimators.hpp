#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "common.hpp"
#include "weights.hpp"

namespace robust_scatter {

enum class SampleLabel : std::uint8_t { Legitimate, Outlier };

/// N x n sample matrix whose first n - n_outliers columns are legitimate and the
/// remaining n_outliers columns are outliers. `labels` is ground truth; when it is
/// absent only label-free estimators can be evaluated.
template <SampleScalar Scalar>
struct Dataset {
  Matrix<Scalar> samples;
  Index n_outliers = 0;
  std::optional<std::vector<SampleLabel>> labels;

  static Dataset labelled(Matrix<Scalar> y, Index n_outliers) {
    Dataset d{std::move(y), n_outliers, std::nullopt};
    std::vector<SampleLabel> lab(static_cast<std::size_t>(d.n()), SampleLabel::Legitimate);
    for (Index j = d.n() - n_outliers; j < d.n(); ++j) lab[static_cast<std::size_t>(j)] = SampleLabel::Outlier;
    d.labels = std::move(lab);
    d.validate();
    return d;
  }

  static Dataset unlabelled(Matrix<Scalar> y) {
    Dataset d{std::move(y), 0, std::nullopt};
    d.validate();
    return d;
  }

  Index N() const noexcept { return samples.rows(); }
  Index n() const noexcept { return samples.cols(); }
  Index n_legitimate() const noexcept { return n() - n_outliers; }
  double c_n() const noexcept { return static_cast<double>(N()) / static_cast<double>(n()); }
  double epsilon_n() const noexcept { return static_cast<double>(n_outliers) / static_cast<double>(n()); }

  auto legitimate() const { return samples.leftCols(n_legitimate()); }
  auto outliers() const { return samples.rightCols(n_outliers); }

  void validate() const {
    if (N() < 1 || n() < 1) throw DimensionError("dataset needs N >= 1 and n >= 1");
    if (n_outliers < 0 || n_outliers >= n()) throw DimensionError("dataset needs 0 <= n_outliers < n");
    if (labels) {
      if (static_cast<Index>(labels->size()) != n()) throw DimensionError("label count differs from column count");
      for (Index j = 0; j < n(); ++j) {
        const bool outlier = j >= n_legitimate();
        if (((*labels)[static_cast<std::size_t>(j)] == SampleLabel::Outlier) != outlier)
          throw DimensionError("labels must list legitimate columns first, then n_outliers outliers");
      }
    }
  }
};

/// (1/n) Y Y^†.
template <SampleScalar Scalar>
Matrix<Scalar> scm(const Dataset<Scalar>& d) {
  Matrix<Scalar> s = d.samples * d.samples.adjoint() / static_cast<double>(d.n());
  detail::hermitize(s);
  return s;
}

/// (1/n) Σ_w w w^† / ((1/N)‖w‖²). Its trace is exactly N.
template <SampleScalar Scalar>
Matrix<Scalar> normalized_scm(const Dataset<Scalar>& d) {
  const double N = static_cast<double>(d.N());
  VectorXd scale(d.n());
  for (Index j = 0; j < d.n(); ++j) {
    const double sq = d.samples.col(j).squaredNorm();
    if (!(sq > 0.0)) throw DomainError("normalized SCM is undefined for a zero column (column " + std::to_string(j) + ")");
    scale(j) = N / sq;
  }
  Matrix<Scalar> s = d.samples * scale.template cast<Scalar>().asDiagonal() * d.samples.adjoint() / static_cast<double>(d.n());
  detail::hermitize(s);
  return s;
}

/// SCM over the legitimate columns only, still normalized by the full n.
template <SampleScalar Scalar>
Matrix<Scalar> oracle_scm(const Dataset<Scalar>& d) {
  if (!d.labels) throw ConfigError("oracle estimator needs ground-truth labels");
  const auto y = d.legitimate();
  Matrix<Scalar> s = y * y.adjoint() / static_cast<double>(d.n());
  detail::hermitize(s);
  return s;
}

enum class ResidualMetric { Spectral, Frobenius };
enum class StartPoint { Identity, Scm };

struct MaronnaConfig {
  double tol = 1e-9;
  int max_iter = 500;
  double damping = 1.0;  // θ in Z <- (1-θ) Z + θ RHS(Z); 1 is plain Picard
  StartPoint start = StartPoint::Identity;
  ResidualMetric metric = ResidualMetric::Spectral;
  double divergence_limit = 1e8;
};

template <SampleScalar Scalar>
struct ScatterEstimate {
  Matrix<Scalar> matrix;
  VectorXd weights;          // u((1/N) w^† Z^{-1} w) per column
  VectorXd quadratic_forms;  // (1/N) w^† Z^{-1} w per column
  int iterations = 0;
  double residual = 0.0;
};

template <SampleScalar Scalar>
struct MaronnaStep {
  Matrix<Scalar> rhs;
  VectorXd weights;
  VectorXd quadratic_forms;
};

/// One evaluation of Z -> (1/n) Σ u((1/N) w^† Z^{-1} w) w w^† using a Cholesky factor of Z.
template <SampleScalar Scalar>
MaronnaStep<Scalar> maronna_rhs(const Matrix<Scalar>& z, const Dataset<Scalar>& d, const UFunction& u) {
  if (z.rows() != d.N() || z.cols() != d.N()) throw DimensionError("scatter matrix does not match dataset dimension");
  Eigen::LLT<Matrix<Scalar>> llt(z);
  if (llt.info() != Eigen::Success) throw SolverError("scatter matrix is not positive definite", INFINITY, 0);
  const Matrix<Scalar> solved = llt.matrixL().solve(d.samples);
  MaronnaStep<Scalar> step;
  step.quadratic_forms = solved.colwise().squaredNorm().transpose() / static_cast<double>(d.N());
  step.weights.resize(d.n());
  for (Index j = 0; j < d.n(); ++j) step.weights(j) = u.u(step.quadratic_forms(j));
  step.rhs = d.samples * step.weights.template cast<Scalar>().asDiagonal() * d.samples.adjoint() / static_cast<double>(d.n());
  detail::hermitize(step.rhs);
  return step;
}

namespace detail {

template <typename Scalar>
double relative_defect(const Matrix<Scalar>& z, const Matrix<Scalar>& rhs, ResidualMetric metric) {
  if (metric == ResidualMetric::Frobenius) return (z - rhs).norm() / z.norm();
  return spectral_norm_hermitian(z - rhs) / spectral_norm_hermitian(z);
}

}  // namespace detail

/// ‖Z - RHS(Z)‖ / ‖Z‖, spectral norm by default.
template <SampleScalar Scalar>
double fixed_point_residual(const Matrix<Scalar>& z, const Dataset<Scalar>& d, const UFunction& u,
                            ResidualMetric metric = ResidualMetric::Spectral) {
  return detail::relative_defect(z, maronna_rhs(z, d, u).rhs, metric);
}

/// Maronna M-estimator of scatter by Picard iteration from I (or the SCM).
///
/// The returned matrix is the last iterate Z_k whose defect ‖Z_k - RHS(Z_k)‖/‖Z_k‖ met
/// `cfg.tol`; `weights` are the u-values at that iterate.
template <SampleScalar Scalar>
ScatterEstimate<Scalar> maronna_fixed_point(const Dataset<Scalar>& d, const UFunction& u,
                                            const MaronnaConfig& cfg = {}) {
  d.validate();
  const auto adm = validate_admissibility(u, RegimeParams{d.c_n(), d.epsilon_n()});
  if (!adm.pass) throw AdmissibilityError("Maronna estimator not admissible for this dataset: " + adm.reason);
  if (!(cfg.damping > 0.0 && cfg.damping <= 1.0)) throw ConfigError("damping must lie in (0, 1]");

  Matrix<Scalar> z = cfg.start == StartPoint::Scm ? scm(d) : Matrix<Scalar>::Identity(d.N(), d.N());
  double residual = INFINITY;
  for (int it = 0; it <= cfg.max_iter; ++it) {
    auto step = maronna_rhs(z, d, u);
    residual = detail::relative_defect(z, step.rhs, cfg.metric);
    if (!std::isfinite(residual) || residual > cfg.divergence_limit)
      throw SolverError("Maronna iteration diverged", residual, it);
    if (residual <= cfg.tol) {
      return ScatterEstimate<Scalar>{std::move(z), std::move(step.weights), std::move(step.quadratic_forms), it,
                                     residual};
    }
    if (it == cfg.max_iter) break;
    if (cfg.damping == 1.0) {
      z = std::move(step.rhs);
    } else {
      z = (1.0 - cfg.damping) * z + cfg.damping * step.rhs;
    }
  }
  throw SolverError("Maronna iteration did not converge within " + std::to_string(cfg.max_iter) + " iterations",
                    residual, cfg.max_iter);
}

}  // namespace robust_scatter
