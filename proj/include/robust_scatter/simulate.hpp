#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "common.hpp"
#include "det_equiv.hpp"
#include "estimators.hpp"
#include "parallel.hpp"
#include "spectrum.hpp"
#include "weights.hpp"

namespace robust_scatter {

enum class Field { Real, Complex };

inline std::string_view to_string(Field f) { return f == Field::Real ? "real" : "complex"; }

inline Field parse_field(std::string_view s) {
  if (s == "real") return Field::Real;
  if (s == "complex") return Field::Complex;
  throw ConfigError("unknown field '" + std::string(s) + "' (expected real|complex)");
}

/// [C]_{ij} = ρ^{|i-j|}.
inline MatrixXd build_toeplitz_cov(double rho, Index N) {
  if (!(std::abs(rho) < 1.0)) throw DomainError("Toeplitz covariance needs |rho| < 1");
  if (N < 1) throw DimensionError("N must be positive");
  MatrixXd C(N, N);
  for (Index i = 0; i < N; ++i)
    for (Index j = 0; j < N; ++j) C(i, j) = std::pow(rho, static_cast<double>(std::abs(i - j)));
  return C;
}

/// End-to-end reproduction run by the `experiment` command.
enum class ExperimentKind { Spikes, Esd, Equivalence, Densities, Moments };

inline std::string_view to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::Spikes:
      return "spikes";
    case ExperimentKind::Esd:
      return "esd";
    case ExperimentKind::Equivalence:
      return "equivalence";
    case ExperimentKind::Densities:
      return "densities";
    case ExperimentKind::Moments:
      return "moments";
  }
  return "?";
}

inline ExperimentKind parse_experiment(std::string_view s) {
  for (auto k : {ExperimentKind::Spikes, ExperimentKind::Esd, ExperimentKind::Equivalence, ExperimentKind::Densities,
                 ExperimentKind::Moments})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown experiment '" + std::string(s) + "' (expected spikes|esd|equivalence|densities|moments)");
}

enum class CovKind { Identity, Toeplitz, DiagBlocks, Fig1 };

struct DiagBlock {
  Index count = 0;
  double value = 1.0;
  friend bool operator==(const DiagBlock&, const DiagBlock&) = default;
};

/// Recipe for a population covariance of any dimension N.
struct CovSpec {
  CovKind kind = CovKind::Identity;
  double rho = 0.0;               // Toeplitz
  std::vector<DiagBlock> blocks;  // DiagBlocks; counts must sum to N
  double scale = 1.0;             // DiagBlocks

  static CovSpec identity() { return {}; }
  static CovSpec toeplitz(double rho) { return {CovKind::Toeplitz, rho, {}, 1.0}; }
  static CovSpec fig1() { return {CovKind::Fig1, 0.0, {}, 1.0}; }

  MatrixXd build(Index N) const {
    switch (kind) {
      case CovKind::Identity:
        return MatrixXd::Identity(N, N);
      case CovKind::Toeplitz:
        return build_toeplitz_cov(rho, N);
      case CovKind::DiagBlocks: {
        VectorXd d(N);
        Index at = 0;
        for (const auto& b : blocks) {
          if (b.count < 0 || at + b.count > N) throw ConfigError("diagonal block counts exceed N");
          if (!(b.value > 0.0)) throw ConfigError("diagonal block values must be positive");
          d.segment(at, b.count).setConstant(scale * b.value);
          at += b.count;
        }
        if (at != N) throw ConfigError("diagonal block counts must sum to N");
        return d.asDiagonal();
      }
      case CovKind::Fig1: {
        if (N % 10 != 0) throw ConfigError("the single-outlier geometry needs N divisible by 10");
        VectorXd d = VectorXd::Ones(N);
        d.head(N / 10).setConstant(1.0 / 16.0);
        return (16.0 / 14.5) * MatrixXd(d.asDiagonal());
      }
    }
    throw ConfigError("unknown covariance kind");
  }

  friend bool operator==(const CovSpec&, const CovSpec&) = default;
};

/// a = (√10, ..., √10, 0, ..., 0) with N/10 nonzero entries, so ‖a‖² = N.
inline VectorXd fig1_outlier_vector(Index N) {
  if (N % 10 != 0) throw ConfigError("the single-outlier geometry needs N divisible by 10");
  VectorXd a = VectorXd::Zero(N);
  a.head(N / 10).setConstant(std::sqrt(10.0));
  return a;
}

enum class OutlierKind { None, Fig1, Gaussian, Custom };

struct OutlierSpec {
  OutlierKind kind = OutlierKind::None;
  CovSpec D;         // Gaussian: a_i = D^{1/2} x'_i
  MatrixXd vectors;  // Custom: N x K fixed columns

  friend bool operator==(const OutlierSpec& a, const OutlierSpec& b) {
    return a.kind == b.kind && a.D == b.D && a.vectors.rows() == b.vectors.rows() &&
           a.vectors.cols() == b.vectors.cols() && a.vectors == b.vectors;
  }
};

struct GridSpec {
  double x_min = 0.0;
  double x_max = 0.0;  // 0 selects an upper bound on the limiting support
  std::size_t points = 4001;
  double y_imag = 1e-4;
  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

/// A reproducible experiment recipe. Sample count n and outlier count round(ε n) are fixed per run.
struct ScenarioSpec {
  std::string name = "custom";
  ExperimentKind experiment = ExperimentKind::Moments;
  Index N = 100;
  Index n = 500;
  UKind u_kind = UKind::Student;
  double t = 0.1;
  CovSpec C;
  OutlierSpec outliers;
  double epsilon = 0.0;
  std::uint64_t seed = 1;
  Field field = Field::Complex;
  int trials = 10;
  std::vector<Index> sweep_N;  // dimensions of a convergence sweep (n scales with N)
  GridSpec grid;
  int p_max = 4;
  double window_lo = 0.15;
  double window_hi = 0.35;
  double gap_factor = 3.0;
  double maronna_tol = 1e-9;
  int maronna_max_iter = 500;

  double c_n() const { return static_cast<double>(N) / static_cast<double>(n); }
  Index n_outliers() const { return static_cast<Index>(std::llround(epsilon * static_cast<double>(n))); }
  double epsilon_n() const { return static_cast<double>(n_outliers()) / static_cast<double>(n); }
  UFunction ufunction() const { return {u_kind, t}; }

  /// Same recipe at dimension N2 with the ratio N/n kept.
  ScenarioSpec at_dimension(Index N2) const {
    ScenarioSpec s = *this;
    s.n = static_cast<Index>(std::llround(static_cast<double>(N2) / c_n()));
    s.N = N2;
    return s;
  }

  void validate() const {
    if (N < 1 || n < 1) throw ConfigError("scenario needs N >= 1 and n >= 1");
    if (!(t > 0.0)) throw ConfigError("u-function parameter t must be positive");
    if (!(epsilon >= 0.0 && epsilon < 1.0)) throw ConfigError("epsilon must lie in [0, 1)");
    if (std::abs(epsilon * static_cast<double>(n) - static_cast<double>(n_outliers())) > 1e-6)
      throw ConfigError("epsilon * n must be an integer outlier count");
    if (n_outliers() >= n) throw ConfigError("need fewer outliers than samples");
    if (outliers.kind == OutlierKind::None && n_outliers() != 0) throw ConfigError("outlier builder 'none' needs epsilon = 0");
    if (outliers.kind == OutlierKind::Fig1 && n_outliers() != 1)
      throw ConfigError("the single-outlier builder needs epsilon * n = 1");
    if (outliers.kind == OutlierKind::Custom &&
        (outliers.vectors.cols() != n_outliers() || outliers.vectors.rows() != N))
      throw ConfigError("custom outlier vectors must be N x (epsilon * n)");
    if (trials < 0) throw ConfigError("trials must be nonnegative");
    if (p_max < 1 || p_max > kMaxMomentOrder) throw ConfigError("p_max must lie in [1, 12]");
    if (grid.points < 2 || !(grid.y_imag > 0.0)) throw ConfigError("grid needs >= 2 points and y_imag > 0");
    if (grid.x_max != 0.0 && !(grid.x_max > grid.x_min)) throw ConfigError("grid needs x_max > x_min");
    if (!(window_hi > window_lo)) throw ConfigError("spike window needs hi > lo");
    if (!(gap_factor > 0.0)) throw ConfigError("gap factor must be positive");
    if (!(maronna_tol > 0.0) || maronna_max_iter < 1) throw ConfigError("Maronna tolerance and iteration cap must be positive");
    for (Index d : sweep_N)
      if (d < 1) throw ConfigError("sweep dimensions must be positive");
  }

  MatrixXd outlier_vectors() const {
    switch (outliers.kind) {
      case OutlierKind::Fig1:
        return fig1_outlier_vector(N);
      case OutlierKind::Custom:
        return outliers.vectors;
      default:
        return MatrixXd(N, 0);
    }
  }

  /// Deterministic inputs: explicit vectors for None/Fig1/Custom, random outliers for Gaussian.
  PopulationModel population() const {
    validate();
    if (outliers.kind == OutlierKind::Gaussian)
      return PopulationModel::random(C.build(N), outliers.D.build(N), c_n(), epsilon_n());
    return PopulationModel::deterministic(C.build(N), outlier_vectors(), n);
  }

  MaronnaConfig maronna_config() const {
    MaronnaConfig cfg;
    cfg.tol = maronna_tol;
    cfg.max_iter = maronna_max_iter;
    return cfg;
  }
};

/// Single-outlier geometry at dimension N with one outlier and ratio c, plus its closed-form checks.
struct Fig1Scenario {
  ScenarioSpec spec;
  PopulationModel model;
  double alignment = 0.0;    // (1/N) a^† C^{-1} a
  double norm_ratio = 0.0;   // ‖a‖² / N
  double trace_ratio = 0.0;  // tr C / N
};

inline Fig1Scenario build_fig1_scenario(Index N = 100, double c = 0.2) {
  if (!(c > 0.0)) throw ConfigError("ratio c must be positive");
  ScenarioSpec s;
  s.name = "fig1";
  s.N = N;
  s.n = static_cast<Index>(std::llround(static_cast<double>(N) / c));
  s.u_kind = UKind::Student;
  s.t = 0.1;
  s.C = CovSpec::fig1();
  s.outliers.kind = OutlierKind::Fig1;
  s.epsilon = 1.0 / static_cast<double>(s.n);
  s.trials = 10;
  Fig1Scenario f{s, s.population()};
  const VectorXd a = f.model.outlier_vectors().col(0);
  f.alignment = f.model.alignments()(0);
  f.norm_ratio = a.squaredNorm() / static_cast<double>(N);
  f.trace_ratio = f.model.C.trace() / static_cast<double>(N);
  if (std::abs(f.alignment - 14.5) > 1e-10 || std::abs(f.norm_ratio - 1.0) > 1e-12 ||
      std::abs(f.trace_ratio - 1.0) > 1e-12)
    throw Error("single-outlier geometry does not satisfy its closed-form constraints");
  return f;
}

/// Symmetric square roots of the population matrices, computed once per scenario.
class ScenarioSampler {
 public:
  explicit ScenarioSampler(ScenarioSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    C_half_ = sqrt_psd(spec_.C.build(spec_.N));
    if (spec_.outliers.kind == OutlierKind::Gaussian) {
      D_half_ = sqrt_psd(spec_.outliers.D.build(spec_.N));
    } else {
      fixed_ = spec_.outlier_vectors();
    }
  }

  const ScenarioSpec& spec() const noexcept { return spec_; }

  /// Trial `trial` draws from an mt19937_64 stream seeded by (seed, trial).
  template <SampleScalar Scalar>
  Dataset<Scalar> draw(std::uint64_t trial) const {
    std::seed_seq seq{static_cast<std::uint32_t>(spec_.seed), static_cast<std::uint32_t>(spec_.seed >> 32),
                      static_cast<std::uint32_t>(trial), static_cast<std::uint32_t>(trial >> 32)};
    std::mt19937_64 rng(seq);
    const Index N = spec_.N;
    const Index K = spec_.n_outliers();
    const Index L = spec_.n - K;
    Matrix<Scalar> y(N, spec_.n);
    y.leftCols(L) = C_half_.cast<Scalar>() * gaussian<Scalar>(N, L, rng);
    if (K > 0) {
      if (spec_.outliers.kind == OutlierKind::Gaussian) {
        y.rightCols(K) = D_half_.cast<Scalar>() * gaussian<Scalar>(N, K, rng);
      } else {
        y.rightCols(K) = fixed_.cast<Scalar>();
      }
    }
    return Dataset<Scalar>::labelled(std::move(y), K);
  }

 private:
  static MatrixXd sqrt_psd(const MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(m);
    if (es.eigenvalues()(0) < 0.0) throw DomainError("population matrix is not nonnegative definite");
    return es.operatorSqrt();
  }

  // Standard Gaussian entries; complex entries are circularly symmetric with unit variance.
  template <SampleScalar Scalar>
  static Matrix<Scalar> gaussian(Index rows, Index cols, std::mt19937_64& rng) {
    std::normal_distribution<double> nd;
    Matrix<Scalar> x(rows, cols);
    for (Index j = 0; j < cols; ++j)
      for (Index i = 0; i < rows; ++i) {
        if constexpr (is_complex_v<Scalar>) {
          const double re = nd(rng);
          const double im = nd(rng);
          x(i, j) = Scalar(re, im) / std::sqrt(2.0);
        } else {
          x(i, j) = nd(rng);
        }
      }
    return x;
  }

  ScenarioSpec spec_;
  MatrixXd C_half_;
  MatrixXd D_half_;
  MatrixXd fixed_;
};

template <SampleScalar Scalar>
Dataset<Scalar> generate_dataset(const ScenarioSpec& s, std::uint64_t trial = 0) {
  return ScenarioSampler(s).draw<Scalar>(trial);
}

/// Calls fn with a value of the scenario's sample scalar type (double or complex).
template <typename Fn>
decltype(auto) with_field(Field f, Fn&& fn) {
  if (f == Field::Real) return fn(double{});
  return fn(Complex{});
}

inline void require_random_outliers(const ScenarioSpec& s) {
  if (s.outliers.kind != OutlierKind::Gaussian) throw ConfigError("experiment needs a random-outlier (gaussian) scenario");
}

/// Weights (γ^R, α^R) for the scenario's random-outlier population.
inline WeightProfile scenario_weights(const ScenarioSpec& s) {
  require_random_outliers(s);
  return solve_random_outlier_system(s.population(), s.ufunction());
}

struct ErrorSummary {
  Index N = 0;
  double mean = 0.0;
  double stddev = 0.0;
  std::vector<double> errors;
};

/// Per trial: ‖Ĉ_N - Ŝ_N^R‖ / ‖Ĉ_N‖ with Ĉ_N the Maronna fixed point and Ŝ_N^R built from (γ^R, α^R).
inline ErrorSummary equivalence_error_experiment(const ScenarioSpec& s, int trials) {
  require_random_outliers(s);
  if (trials < 2) throw ConfigError("equivalence error experiment needs at least 2 trials");
  const WeightProfile w = scenario_weights(s);
  const ScenarioSampler sampler(s);
  const UFunction u = s.ufunction();
  ErrorSummary out;
  out.N = s.N;
  out.errors.assign(static_cast<std::size_t>(trials), 0.0);
  parallel_for(static_cast<std::size_t>(trials), [&](std::size_t i) {
    with_field(s.field, [&](auto tag) {
      using Scalar = decltype(tag);
      const auto d = sampler.draw<Scalar>(i);
      const auto est = maronna_fixed_point(d, u, s.maronna_config());
      const auto S = build_S_hat(d, w);
      out.errors[i] = detail::spectral_norm_hermitian(Matrix<Scalar>(est.matrix - S)) /
                      detail::spectral_norm_hermitian(est.matrix);
    });
  });
  double sum = 0.0;
  for (double e : out.errors) sum += e;
  out.mean = sum / trials;
  double var = 0.0;
  for (double e : out.errors) var += (e - out.mean) * (e - out.mean);
  out.stddev = std::sqrt(var / (trials - 1));
  return out;
}

/// Upper end of a grid covering the limiting support of a class-mixture model.
inline double support_upper_bound(const SpectralModel& m) {
  double b = detail::spectral_norm_hermitian(m.A);
  for (const auto& k : m.classes) {
    if (k.fraction <= 0.0) continue;
    const double r = std::sqrt(m.c_n / k.fraction);
    b += k.fraction * detail::spectral_norm_hermitian(k.R) * (1.0 + r) * (1.0 + r);
  }
  return 1.1 * b;
}

/// Robust-estimator spectral model of a random-outlier scenario.
inline SpectralModel robust_spectral_model(const ScenarioSpec& s, const WeightProfile& w) {
  const auto pop = s.population();
  return SpectralModel::random(pop.C, pop.D(), w.v_gamma, w.v_alphas(0), pop.epsilon_n, pop.c_n);
}

inline std::vector<double> scenario_grid(const ScenarioSpec& s, const SpectralModel& m) {
  const double hi = s.grid.x_max != 0.0 ? s.grid.x_max : support_upper_bound(m);
  return linspace(s.grid.x_min, hi, s.grid.points);
}

/// sup_x |F_emp(x) - F(x)| with F the cumulative trapezoid integral of the density, linearly interpolated.
inline double kolmogorov_distance(std::vector<double> samples, const DensityEstimate& d) {
  if (samples.empty()) throw DomainError("Kolmogorov distance needs samples");
  std::sort(samples.begin(), samples.end());
  const auto F = d.cdf();
  auto cdf_at = [&](double x) {
    if (x <= d.x.front()) return 0.0;
    if (x >= d.x.back()) return F.back();
    const auto it = std::upper_bound(d.x.begin(), d.x.end(), x);
    const auto j = static_cast<std::size_t>(it - d.x.begin());
    const double w = (x - d.x[j - 1]) / (d.x[j] - d.x[j - 1]);
    return (1.0 - w) * F[j - 1] + w * F[j];
  };
  const double M = static_cast<double>(samples.size());
  double dist = 0.0;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const double f = cdf_at(samples[k]);
    dist = std::max({dist, std::abs(f - static_cast<double>(k) / M), std::abs(f - static_cast<double>(k + 1) / M)});
  }
  return dist;
}

struct Histogram {
  std::vector<double> edges;    // bins + 1 edges
  std::vector<double> density;  // normalized so that Σ density * width = fraction of samples inside
};

inline Histogram make_histogram(const std::vector<double>& samples, double lo, double hi, std::size_t bins) {
  if (bins < 1 || !(hi > lo)) throw ConfigError("histogram needs bins >= 1 and hi > lo");
  Histogram h;
  h.edges = linspace(lo, hi, bins + 1);
  h.density.assign(bins, 0.0);
  const double width = (hi - lo) / static_cast<double>(bins);
  for (double x : samples) {
    if (x < lo || x > hi) continue;
    const auto b = std::min(bins - 1, static_cast<std::size_t>((x - lo) / width));
    h.density[b] += 1.0;
  }
  for (double& v : h.density) v /= static_cast<double>(samples.size()) * width;
  return h;
}

struct EsdResult {
  WeightProfile weights;
  std::vector<double> eigenvalues;  // pooled over trials, sorted
  Histogram histogram;
  DensityEstimate density;
  double kolmogorov = 0.0;
};

/// Pooled eigenvalues of the Maronna estimator over trials against the limiting density.
inline EsdResult esd_histogram_experiment(const ScenarioSpec& s, int trials, std::size_t bins = 100) {
  require_random_outliers(s);
  if (trials < 1) throw ConfigError("ESD experiment needs at least one trial");
  EsdResult r;
  r.weights = scenario_weights(s);
  const SpectralModel model = robust_spectral_model(s, r.weights);
  const auto grid = scenario_grid(s, model);
  r.density = density_on_grid(model, grid, s.grid.y_imag);

  const ScenarioSampler sampler(s);
  const UFunction u = s.ufunction();
  std::vector<VectorXd> per_trial(static_cast<std::size_t>(trials));
  parallel_for(static_cast<std::size_t>(trials), [&](std::size_t i) {
    with_field(s.field, [&](auto tag) {
      using Scalar = decltype(tag);
      const auto est = maronna_fixed_point(sampler.draw<Scalar>(i), u, s.maronna_config());
      Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(est.matrix, Eigen::EigenvaluesOnly);
      per_trial[i] = es.eigenvalues();
    });
  });
  for (const auto& ev : per_trial) r.eigenvalues.insert(r.eigenvalues.end(), ev.data(), ev.data() + ev.size());
  std::sort(r.eigenvalues.begin(), r.eigenvalues.end());
  r.histogram = make_histogram(r.eigenvalues, grid.front(), grid.back(), bins);
  r.kolmogorov = kolmogorov_distance(r.eigenvalues, r.density);
  return r;
}

struct SpikeReport {
  std::vector<double> eigenvalues;  // ascending
  double median_spacing = 0.0;
  std::vector<double> spikes;       // isolated eigenvalues inside the window
};

/// Flags eigenvalues inside (lo, hi) whose gaps to both neighbors exceed gap_factor times
/// the median spacing. An extreme eigenvalue needs only its single neighbor gap.
inline SpikeReport spike_detection(const VectorXd& sorted_eigenvalues, double lo, double hi, double gap_factor = 3.0) {
  SpikeReport r;
  r.eigenvalues.assign(sorted_eigenvalues.data(), sorted_eigenvalues.data() + sorted_eigenvalues.size());
  std::sort(r.eigenvalues.begin(), r.eigenvalues.end());
  const std::size_t m = r.eigenvalues.size();
  if (m < 2) return r;
  std::vector<double> gaps(m - 1);
  for (std::size_t i = 0; i + 1 < m; ++i) gaps[i] = r.eigenvalues[i + 1] - r.eigenvalues[i];
  std::vector<double> sorted_gaps = gaps;
  std::nth_element(sorted_gaps.begin(), sorted_gaps.begin() + static_cast<std::ptrdiff_t>(sorted_gaps.size() / 2),
                   sorted_gaps.end());
  r.median_spacing = sorted_gaps[sorted_gaps.size() / 2];
  const double threshold = gap_factor * r.median_spacing;
  for (std::size_t i = 0; i < m; ++i) {
    const double x = r.eigenvalues[i];
    if (!(x > lo && x < hi)) continue;
    const bool below = i == 0 || gaps[i - 1] > threshold;
    const bool above = i + 1 == m || gaps[i] > threshold;
    if (below && above) r.spikes.push_back(x);
  }
  return r;
}

template <typename Derived>
SpikeReport spike_detection_matrix(const Eigen::MatrixBase<Derived>& est, double lo, double hi, double gap_factor = 3.0) {
  using M = Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  Eigen::SelfAdjointEigenSolver<M> es(M(est), Eigen::EigenvaluesOnly);
  return spike_detection(es.eigenvalues(), lo, hi, gap_factor);
}

enum class EstimatorKind { Scm, NormalizedScm, Maronna, Oracle };

inline std::string_view to_string(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::Scm:
      return "scm";
    case EstimatorKind::NormalizedScm:
      return "nscm";
    case EstimatorKind::Maronna:
      return "maronna";
    case EstimatorKind::Oracle:
      return "oracle";
  }
  return "?";
}

inline EstimatorKind parse_estimator(std::string_view s) {
  for (auto k : {EstimatorKind::Scm, EstimatorKind::NormalizedScm, EstimatorKind::Maronna, EstimatorKind::Oracle})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown estimator '" + std::string(s) + "' (expected scm|nscm|maronna|oracle)");
}

inline constexpr std::array<EstimatorKind, 4> kAllEstimators{EstimatorKind::Scm, EstimatorKind::NormalizedScm,
                                                             EstimatorKind::Maronna, EstimatorKind::Oracle};

template <SampleScalar Scalar>
Matrix<Scalar> run_estimator(EstimatorKind k, const Dataset<Scalar>& d, const UFunction& u, const MaronnaConfig& cfg) {
  switch (k) {
    case EstimatorKind::Scm:
      return scm(d);
    case EstimatorKind::NormalizedScm:
      return normalized_scm(d);
    case EstimatorKind::Maronna:
      return maronna_fixed_point(d, u, cfg).matrix;
    case EstimatorKind::Oracle:
      return oracle_scm(d);
  }
  throw ConfigError("unknown estimator");
}

struct SpikeTrial {
  std::array<SpikeReport, 4> reports;  // indexed like kAllEstimators
};

struct SpikeExperiment {
  int trials = 0;
  std::array<int, 4> flagged{};  // trials with at least one spike, per estimator
  std::vector<SpikeTrial> per_trial;
};

/// Spike counts in the scenario's window for SCM, normalized SCM, Maronna and oracle.
inline SpikeExperiment spike_experiment(const ScenarioSpec& s, int trials) {
  if (trials < 1) throw ConfigError("spike experiment needs at least one trial");
  const ScenarioSampler sampler(s);
  const UFunction u = s.ufunction();
  SpikeExperiment out;
  out.trials = trials;
  out.per_trial.resize(static_cast<std::size_t>(trials));
  parallel_for(static_cast<std::size_t>(trials), [&](std::size_t i) {
    with_field(s.field, [&](auto tag) {
      using Scalar = decltype(tag);
      const auto d = sampler.draw<Scalar>(i);
      for (std::size_t k = 0; k < kAllEstimators.size(); ++k) {
        const auto est = run_estimator(kAllEstimators[k], d, u, s.maronna_config());
        out.per_trial[i].reports[k] = spike_detection_matrix(est, s.window_lo, s.window_hi, s.gap_factor);
      }
    });
  });
  for (const auto& t : out.per_trial)
    for (std::size_t k = 0; k < 4; ++k) out.flagged[k] += t.reports[k].spikes.empty() ? 0 : 1;
  return out;
}

struct MomentComparison {
  WeightProfile weights;
  MomentTable robust;
  MomentTable scm;
  MomentTable oracle;
  std::vector<double> robust_normalized;
  std::vector<double> scm_normalized;
  std::vector<double> oracle_normalized;
  std::vector<double> robust_error;  // |M̄ - M̄_oracle| / M̄_oracle, index p
  std::vector<double> scm_error;
};

/// Normalized moments of the robust, SCM and oracle limiting models with errors against the oracle.
inline MomentComparison moment_comparison_experiment(const ScenarioSpec& s) {
  require_random_outliers(s);
  MomentComparison r;
  r.weights = scenario_weights(s);
  const auto pop = s.population();
  r.robust = moments_random(robust_spectral_model(s, r.weights), s.p_max);
  r.scm = moments_random(SpectralModel::scm(pop.C, pop.D(), pop.epsilon_n, pop.c_n), s.p_max);
  r.oracle = moments_generic(SpectralModel::oracle(pop.C, pop.epsilon_n, pop.c_n), s.p_max);
  r.robust_normalized = normalized_moments(r.robust);
  r.scm_normalized = normalized_moments(r.scm);
  r.oracle_normalized = normalized_moments(r.oracle);
  for (std::size_t p = 0; p < r.oracle_normalized.size(); ++p) {
    const double o = r.oracle_normalized[p];
    r.robust_error.push_back(std::abs(r.robust_normalized[p] - o) / o);
    r.scm_error.push_back(std::abs(r.scm_normalized[p] - o) / o);
  }
  return r;
}

/// max_i |(1/N) y_i^† Ĉ_(i)^{-1} y_i - γ| over legitimate columns, where Ĉ_(i) removes column i
/// from the fixed point: (1/N) y^† Ĉ_(i)^{-1} y = d_i / (1 - c_n u(d_i) d_i).
template <SampleScalar Scalar>
double weight_concentration(const Dataset<Scalar>& d, const ScatterEstimate<Scalar>& est, double gamma) {
  double worst = 0.0;
  for (Index i = 0; i < d.n_legitimate(); ++i) {
    const double di = est.quadratic_forms(i);
    const double loo = di / (1.0 - d.c_n() * est.weights(i) * di);
    worst = std::max(worst, std::abs(loo - gamma));
  }
  return worst;
}

}  // namespace robust_scatter
