#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "simulate.hpp"

namespace robust_scatter {

/// Names of the embedded reproduction recipes.
inline const std::vector<std::string>& builtin_scenario_names() {
  static const std::vector<std::string> names{"fig1", "fig2", "fig3", "fig4", "fig5"};
  return names;
}

/// fig1: one aligned outlier against a two-level diagonal covariance, spikes in (0.15, 0.35).
/// fig2: pooled Maronna eigenvalues against the limiting density, N = 50.
/// fig3: ‖Ĉ - Ŝ‖/‖Ĉ‖ over an N sweep with c = 1/4.
/// fig4: limiting densities of robust, SCM and oracle models, Huber weights.
/// fig5: normalized moments of the fig4 models.
inline ScenarioSpec builtin_scenario(std::string_view name) {
  ScenarioSpec s;
  s.name = std::string(name);
  if (name == "fig1") {
    s = build_fig1_scenario(100, 0.2).spec;
    s.experiment = ExperimentKind::Spikes;
    s.seed = 1;
    s.field = Field::Complex;
    s.trials = 10;
    s.window_lo = 0.15;
    s.window_hi = 0.35;
    s.gap_factor = 3.0;
    return s;
  }
  if (name == "fig2") {
    s.experiment = ExperimentKind::Esd;
    s.N = 50;
    s.n = 200;
    s.u_kind = UKind::Student;
    s.t = 0.1;
    s.C = CovSpec::toeplitz(0.9);
    s.outliers.kind = OutlierKind::Gaussian;
    s.outliers.D = CovSpec::identity();
    s.epsilon = 0.05;
    s.seed = 2;
    s.field = Field::Complex;
    s.trials = 100;
    s.grid = {0.0, 30.0, 30001, 1e-4};
    return s;
  }
  if (name == "fig3") {
    s.experiment = ExperimentKind::Equivalence;
    s.N = 100;
    s.n = 400;
    s.u_kind = UKind::Student;
    s.t = 0.1;
    s.C = CovSpec::toeplitz(0.9);
    s.outliers.kind = OutlierKind::Gaussian;
    s.outliers.D = CovSpec::toeplitz(0.2);
    s.epsilon = 0.05;
    s.seed = 3;
    s.field = Field::Complex;
    s.trials = 20;
    s.sweep_N = {20, 40, 60, 80, 100};
    return s;
  }
  if (name == "fig4" || name == "fig5") {
    s.experiment = name == "fig4" ? ExperimentKind::Densities : ExperimentKind::Moments;
    s.N = 100;
    s.n = 500;
    s.u_kind = UKind::Huber;
    s.t = 0.1;
    s.C = CovSpec::toeplitz(0.9);
    s.outliers.kind = OutlierKind::Gaussian;
    s.outliers.D = CovSpec::identity();
    s.epsilon = 0.05;
    s.seed = name == "fig4" ? 4 : 5;
    s.field = Field::Complex;
    s.trials = 0;
    s.grid = {0.0, 0.0, 4001, 1e-4};
    s.p_max = 4;
    return s;
  }
  throw ConfigError("unknown built-in scenario '" + std::string(name) + "' (expected fig1..fig5)");
}

inline bool is_builtin_scenario(std::string_view name) {
  for (const auto& n : builtin_scenario_names())
    if (n == name) return true;
  return false;
}

}  // namespace robust_scatter
