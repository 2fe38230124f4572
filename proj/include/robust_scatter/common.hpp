#pragma once

#include <complex>
#include <stdexcept>
#include <string>
#include <type_traits>

#include <Eigen/Dense>

namespace robust_scatter {

using Index = Eigen::Index;
using Complex = std::complex<double>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatrixXd = Matrix<double>;
using MatrixXc = Matrix<Complex>;
using VectorXd = Vector<double>;
using VectorXc = Vector<Complex>;

template <typename T>
struct is_complex : std::false_type {};
template <typename T>
struct is_complex<std::complex<T>> : std::true_type {};
template <typename T>
inline constexpr bool is_complex_v = is_complex<T>::value;

template <typename Scalar>
concept SampleScalar = std::is_same_v<Scalar, double> || std::is_same_v<Scalar, Complex>;

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the domain of a function (x < 0, y >= φ_∞, |ρ| >= 1, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// The weight function / regime pair violates (1-ε)^{-1} < φ_∞ < c^{-1} or 0 < c < 1-ε.
class AdmissibilityError : public Error {
 public:
  using Error::Error;
};

/// Shapes or partitions that do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Malformed configuration, scenario or data file.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// An iterative solver stopped without meeting its tolerance.
class SolverError : public Error {
 public:
  SolverError(const std::string& what, double last_residual, long iterations)
      : Error(what), residual_(last_residual), iterations_(iterations) {}

  double residual() const noexcept { return residual_; }
  long iterations() const noexcept { return iterations_; }

 private:
  double residual_;
  long iterations_;
};

namespace detail {

template <typename Derived>
double spectral_norm_hermitian(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(m, Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  return std::max(std::abs(ev(0)), std::abs(ev(ev.size() - 1)));
}

template <typename Derived>
double spectral_norm(const Eigen::MatrixBase<Derived>& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix<typename Derived::Scalar>> svd(m);
  return svd.singularValues()(0);
}

/// Symmetrizes in place, wiping rounding asymmetry from accumulated outer products.
template <typename Scalar>
void hermitize(Matrix<Scalar>& m) {
  m = (0.5 * (m + m.adjoint())).eval();
}

inline double normalized_trace(const MatrixXd& m) { return m.trace() / static_cast<double>(m.rows()); }

}  // namespace detail
}  // namespace robust_scatter
