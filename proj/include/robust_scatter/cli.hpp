#pragma once

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "io.hpp"

namespace robust_scatter {

inline constexpr std::string_view kVersion = "0.1.0";

enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitConfig = 2, kExitNonConvergence = 3 };

/// Command-line overrides applied on top of a scenario.
struct CliOverrides {
  std::optional<Index> N;
  std::optional<Index> n;
  std::optional<double> t;
  std::optional<double> eps;
  std::optional<std::string> umode;
  std::optional<std::string> field;
  std::optional<std::uint64_t> seed;
  std::optional<int> trials;
  std::optional<double> tol;
  std::optional<int> max_iter;
  std::optional<std::size_t> grid_points;
  std::optional<double> x_max;
  std::optional<int> p_max;
};

/// Resolves a scenario: a new N keeps N/n unless n is also given; the single-outlier
/// builder keeps exactly one outlier.
inline ScenarioSpec apply_overrides(ScenarioSpec s, const CliOverrides& o) {
  if (o.N) {
    if (!o.n) s.n = static_cast<Index>(std::llround(static_cast<double>(*o.N) / s.c_n()));
    s.N = *o.N;
  }
  if (o.n) s.n = *o.n;
  if (o.t) s.t = *o.t;
  if (o.eps) s.epsilon = *o.eps;
  if (s.outliers.kind == OutlierKind::Fig1 && !o.eps) s.epsilon = 1.0 / static_cast<double>(s.n);
  if (o.umode) s.u_kind = parse_ukind(*o.umode);
  if (o.field) s.field = parse_field(*o.field);
  if (o.seed) s.seed = *o.seed;
  if (o.trials) s.trials = *o.trials;
  if (o.tol) s.maronna_tol = *o.tol;
  if (o.max_iter) s.maronna_max_iter = *o.max_iter;
  if (o.grid_points) s.grid.points = *o.grid_points;
  if (o.x_max) s.grid.x_max = *o.x_max;
  if (o.p_max) s.p_max = *o.p_max;
  s.validate();
  return s;
}

namespace detail {

struct CliContext {
  std::string command;
  std::string scenario;
  std::string out = "out";
  std::string data;
  std::vector<std::string> estimators;
  CliOverrides overrides;
};

inline ScenarioSpec resolve(const CliContext& ctx) {
  if (ctx.scenario.empty()) throw ConfigError("--scenario is required");
  return apply_overrides(load_scenario(ctx.scenario), ctx.overrides);
}

inline Json scenario_source(const CliContext& ctx) {
  Json j;
  if (is_builtin_scenario(ctx.scenario)) {
    j["builtin"] = ctx.scenario;
  } else if (!ctx.scenario.empty()) {
    j["path"] = ctx.scenario;
    j["fnv1a64"] = fnv1a_hex(read_file(ctx.scenario));
  }
  return j;
}

inline void write_summary(const CliContext& ctx, const std::optional<ScenarioSpec>& s, Json results) {
  Json j;
  j["tool"] = "robust-scatter";
  j["version"] = kVersion;
  j["command"] = ctx.command;
  j["source"] = scenario_source(ctx);
  if (!ctx.data.empty()) j["data"] = {{"path", ctx.data}, {"fnv1a64", fnv1a_hex(read_file(ctx.data))}};
  j["scenario"] = s ? scenario_to_json(*s) : Json();
  j["results"] = std::move(results);
  write_file(std::filesystem::path(ctx.out) / "summary.json", j.dump(2) + "\n");
}

/// The robust estimator's limiting model: random outliers, or explicit outliers folded into A_N.
inline SpectralModel scenario_spectral_model(const ScenarioSpec& s, WeightProfile& w) {
  const auto pop = s.population();
  if (pop.is_random()) {
    w = solve_random_outlier_system(pop, s.ufunction());
    return robust_spectral_model(s, w);
  }
  w = solve_weight_system(pop, s.ufunction());
  return SpectralModel::deterministic(pop.C, weighted_outlier_matrix(pop.outlier_vectors(), w.v_alphas, pop.n()),
                                      w.v_gamma, pop.epsilon_n, pop.c_n);
}

inline Json density_summary(const DensityEstimate& d,
                            const std::optional<std::vector<std::pair<double, double>>>& support = std::nullopt) {
  Json j = {{"points", d.x.size()}, {"x_min", d.x.front()}, {"x_max", d.x.back()}, {"y_imag", d.y_imag}, {"mass", d.mass}};
  if (support) {
    Json sup = Json::array();
    for (const auto& [a, b] : *support) sup.push_back({a, b});
    j["support"] = std::move(sup);
  }
  return j;
}

inline int cmd_weights(const CliContext& ctx, std::ostream& out) {
  const auto s = resolve(ctx);
  const auto pop = s.population();
  const auto u = s.ufunction();
  Json results;
  if (pop.is_random()) {
    results["weights"] = weight_profile_to_json(solve_random_outlier_system(pop, u));
    const auto lim = epsilon_zero_limit(pop, u);
    results["epsilon_zero_limit"] = {
        {"gamma", lim.gamma}, {"alpha", lim.alpha}, {"v_gamma", lim.v_gamma}, {"v_alpha", lim.v_alpha}};
  } else {
    results["weights"] = weight_profile_to_json(solve_weight_system(pop, u));
    if (pop.n_outlier_vectors() > 0) results["alignments"] = vector_to_json(pop.alignments());
  }
  results["assumption_statistic"] = pop.assumption_statistic();
  write_file(std::filesystem::path(ctx.out) / "weights.json", results.dump(2) + "\n");
  write_summary(ctx, s, results);
  out << results.dump(2) << '\n';
  return kExitOk;
}

inline int cmd_estimate(const CliContext& ctx, std::ostream& out) {
  std::optional<ScenarioSpec> s;
  if (!ctx.scenario.empty()) s = resolve(ctx);
  if (ctx.data.empty() && !s) throw ConfigError("estimate needs --data or --scenario");
  const UFunction u = s ? s->ufunction() : UFunction(ctx.overrides.umode ? parse_ukind(*ctx.overrides.umode) : UKind::Student,
                                                     ctx.overrides.t.value_or(0.1));
  MaronnaConfig cfg = s ? s->maronna_config() : MaronnaConfig{};
  if (ctx.overrides.tol) cfg.tol = *ctx.overrides.tol;
  if (ctx.overrides.max_iter) cfg.max_iter = *ctx.overrides.max_iter;

  std::vector<EstimatorKind> kinds;
  for (const auto& e : ctx.estimators) kinds.push_back(parse_estimator(e));

  std::ostringstream csv;
  CsvWriter w(csv);
  w.header({"estimator", "index", "eigenvalue"});
  Json results = Json::object();
  auto run = [&](const auto& d) {
    if (kinds.empty()) {
      kinds = {EstimatorKind::Scm, EstimatorKind::NormalizedScm, EstimatorKind::Maronna};
      if (d.labels) kinds.push_back(EstimatorKind::Oracle);
    }
    for (auto k : kinds) {
      const auto m = run_estimator(k, d, u, cfg);
      using M = std::decay_t<decltype(m)>;
      Eigen::SelfAdjointEigenSolver<M> es(m, Eigen::EigenvaluesOnly);
      const VectorXd ev = es.eigenvalues();
      for (Index i = 0; i < ev.size(); ++i) w.row(to_string(k), i, ev(i));
      results[std::string(to_string(k))] = {{"min_eigenvalue", ev(0)}, {"max_eigenvalue", ev(ev.size() - 1)},
                                            {"trace", ev.sum()}};
    }
  };
  if (!ctx.data.empty()) {
    run(parse_dataset_csv(read_file(ctx.data)));
  } else {
    with_field(s->field, [&](auto tag) { run(generate_dataset<decltype(tag)>(*s, 0)); });
  }
  write_file(std::filesystem::path(ctx.out) / "eigenvalues.csv", csv.str());
  write_summary(ctx, s, results);
  out << "wrote " << (std::filesystem::path(ctx.out) / "eigenvalues.csv").string() << '\n';
  return kExitOk;
}

inline int cmd_density(const CliContext& ctx, std::ostream& out) {
  const auto s = resolve(ctx);
  WeightProfile w;
  const auto model = scenario_spectral_model(s, w);
  const auto grid = scenario_grid(s, model);
  const auto d = density_on_grid(model, grid, s.grid.y_imag);
  const auto support = estimate_support(model, grid);
  const std::filesystem::path dir(ctx.out);
  write_file(dir / "density.csv", density_csv(d));
  write_file(dir / "density.svg", svg_line_plot({{"robust", d.x, d.density}}, "limiting eigenvalue density"));
  write_summary(ctx, s, {{"weights", weight_profile_to_json(w)}, {"density", density_summary(d, support)}});
  out << "wrote " << (dir / "density.csv").string() << '\n';
  return kExitOk;
}

inline int cmd_moments(const CliContext& ctx, std::ostream& out) {
  const auto s = resolve(ctx);
  const std::filesystem::path dir(ctx.out);
  Json results;
  std::string csv;
  if (s.outliers.kind == OutlierKind::Gaussian) {
    const auto m = moment_comparison_experiment(s);
    csv = moment_comparison_csv(m);
    results = moment_comparison_to_json(m);
  } else {
    WeightProfile w;
    const auto t = moments_deterministic(scenario_spectral_model(s, w), s.p_max);
    csv = moment_table_csv(t);
    results = {{"weights", weight_profile_to_json(w)}, {"robust", moment_table_to_json(t)}};
  }
  write_file(dir / "moments.csv", csv);
  write_file(dir / "moments.json", results.dump(2) + "\n");
  write_summary(ctx, s, results);
  out << csv;
  return kExitOk;
}

inline Json run_spikes(const ScenarioSpec& s, const std::filesystem::path& dir) {
  const auto r = spike_experiment(s, s.trials);
  std::ostringstream spikes, eig;
  CsvWriter ws(spikes), we(eig);
  ws.header({"trial", "estimator", "n_spikes", "spikes"});
  we.header({"trial", "estimator", "index", "eigenvalue"});
  for (std::size_t t = 0; t < r.per_trial.size(); ++t)
    for (std::size_t k = 0; k < kAllEstimators.size(); ++k) {
      const auto& rep = r.per_trial[t].reports[k];
      std::string list;
      for (double x : rep.spikes) list += (list.empty() ? "" : ";") + format_double(x);
      ws.row(t, to_string(kAllEstimators[k]), rep.spikes.size(), list);
      for (std::size_t i = 0; i < rep.eigenvalues.size(); ++i) we.row(t, to_string(kAllEstimators[k]), i, rep.eigenvalues[i]);
    }
  write_file(dir / "spikes.csv", spikes.str());
  write_file(dir / "eigenvalues.csv", eig.str());
  Json flagged;
  for (std::size_t k = 0; k < kAllEstimators.size(); ++k) flagged[std::string(to_string(kAllEstimators[k]))] = r.flagged[k];
  return {{"trials", r.trials}, {"trials_with_spike", flagged}};
}

inline Json run_esd(const ScenarioSpec& s, const std::filesystem::path& dir) {
  const auto r = esd_histogram_experiment(s, s.trials);
  std::ostringstream hist;
  CsvWriter w(hist);
  w.header({"bin_lo", "bin_hi", "density"});
  SvgSeries steps{"histogram", {}, {}};
  for (std::size_t b = 0; b < r.histogram.density.size(); ++b) {
    w.row(r.histogram.edges[b], r.histogram.edges[b + 1], r.histogram.density[b]);
    steps.x.insert(steps.x.end(), {r.histogram.edges[b], r.histogram.edges[b + 1]});
    steps.y.insert(steps.y.end(), {r.histogram.density[b], r.histogram.density[b]});
  }
  write_file(dir / "histogram.csv", hist.str());
  write_file(dir / "density.csv", density_csv(r.density));
  write_file(dir / "esd.svg", svg_line_plot({{"limiting density", r.density.x, r.density.density}, steps},
                                            "pooled eigenvalues vs limiting density"));
  return {{"weights", weight_profile_to_json(r.weights)},
          {"density", density_summary(r.density)},
          {"eigenvalues", r.eigenvalues.size()},
          {"kolmogorov_distance", r.kolmogorov}};
}

inline Json run_equivalence(const ScenarioSpec& s, const std::filesystem::path& dir) {
  const std::vector<Index> dims = s.sweep_N.empty() ? std::vector<Index>{s.N} : s.sweep_N;
  std::ostringstream sum, trials;
  CsvWriter ws(sum), wt(trials);
  ws.header({"N", "n", "mean", "std"});
  wt.header({"N", "trial", "error"});
  Json rows = Json::array();
  SvgSeries curve{"mean error", {}, {}};
  for (Index N : dims) {
    const auto sN = s.at_dimension(N);
    const auto r = equivalence_error_experiment(sN, s.trials);
    ws.row(N, sN.n, r.mean, r.stddev);
    for (std::size_t t = 0; t < r.errors.size(); ++t) wt.row(N, t, r.errors[t]);
    rows.push_back({{"N", N}, {"n", sN.n}, {"mean", r.mean}, {"std", r.stddev}});
    curve.x.push_back(static_cast<double>(N));
    curve.y.push_back(r.mean);
  }
  write_file(dir / "errors.csv", sum.str());
  write_file(dir / "errors_trials.csv", trials.str());
  write_file(dir / "errors.svg", svg_line_plot({curve}, "relative spectral-norm error vs N"));
  return {{"sweep", rows}};
}

inline Json run_densities(const ScenarioSpec& s, const std::filesystem::path& dir) {
  const auto pop = s.population();
  if (!pop.is_random()) throw ConfigError("densities experiment needs a random-outlier scenario");
  WeightProfile w;
  const std::vector<std::pair<std::string, SpectralModel>> models{
      {"robust", scenario_spectral_model(s, w)},
      {"scm", SpectralModel::scm(pop.C, pop.D(), pop.epsilon_n, pop.c_n)},
      {"nscm", SpectralModel::normalized_scm(pop.C, pop.D(), pop.epsilon_n, pop.c_n)},
      {"oracle", SpectralModel::oracle(pop.C, pop.epsilon_n, pop.c_n)}};
  double hi = s.grid.x_max;
  if (hi == 0.0)
    for (const auto& [_, m] : models) hi = std::max(hi, support_upper_bound(m));
  const auto grid = linspace(s.grid.x_min, hi, s.grid.points);
  std::vector<DensityEstimate> ds;
  std::vector<SvgSeries> series;
  Json res;
  res["weights"] = weight_profile_to_json(w);
  for (const auto& [name, m] : models) {
    ds.push_back(density_on_grid(m, grid, s.grid.y_imag));
    series.push_back({name, ds.back().x, ds.back().density});
    res[name] = density_summary(ds.back());
  }
  std::ostringstream csv;
  CsvWriter wc(csv);
  wc.header({"x", "robust", "scm", "nscm", "oracle"});
  for (std::size_t i = 0; i < grid.size(); ++i)
    wc.row(grid[i], ds[0].density[i], ds[1].density[i], ds[2].density[i], ds[3].density[i]);
  write_file(dir / "densities.csv", csv.str());
  write_file(dir / "densities.svg", svg_line_plot(series, "limiting eigenvalue densities"));
  return res;
}

inline int cmd_experiment(const CliContext& ctx, std::ostream& out) {
  const auto s = resolve(ctx);
  const std::filesystem::path dir(ctx.out);
  Json results;
  switch (s.experiment) {
    case ExperimentKind::Spikes:
      results = run_spikes(s, dir);
      break;
    case ExperimentKind::Esd:
      results = run_esd(s, dir);
      break;
    case ExperimentKind::Equivalence:
      results = run_equivalence(s, dir);
      break;
    case ExperimentKind::Densities:
      results = run_densities(s, dir);
      break;
    case ExperimentKind::Moments: {
      const auto m = moment_comparison_experiment(s);
      write_file(dir / "moments.csv", moment_comparison_csv(m));
      results = moment_comparison_to_json(m);
      break;
    }
  }
  write_summary(ctx, s, results);
  out << results.dump(2) << '\n';
  return kExitOk;
}

}  // namespace detail

/// Parses argv and runs one subcommand. Exit codes: 0 success, 2 configuration error,
/// 3 solver non-convergence, 1 anything else. Diagnostics go to `err` as one line.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Robust scatter estimation: weight systems, limiting spectra and Monte Carlo reproductions",
               "robust-scatter"};
  app.require_subcommand(1);
  detail::CliContext ctx;
  auto& o = ctx.overrides;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--scenario", ctx.scenario, "built-in name (fig1..fig5) or scenario JSON path");
    sub->add_option("--out", ctx.out, "output directory")->capture_default_str();
    sub->add_option("--seed", o.seed, "master seed");
    sub->add_option("--trials", o.trials, "Monte Carlo trials");
    sub->add_option("--N", o.N, "dimension N (n follows at fixed N/n unless --n is given)");
    sub->add_option("--n", o.n, "sample count n");
    sub->add_option("--t", o.t, "u-function parameter t");
    sub->add_option("--eps", o.eps, "outlier fraction");
    sub->add_option("--umode", o.umode, "u-function")->check(CLI::IsMember({"student", "huber"}));
    sub->add_option("--field", o.field, "sample field")->check(CLI::IsMember({"real", "complex"}));
    sub->add_option("--tol", o.tol, "Maronna tolerance");
    sub->add_option("--max-iter", o.max_iter, "Maronna iteration cap");
    sub->add_option("--grid-points", o.grid_points, "density grid points");
    sub->add_option("--x-max", o.x_max, "density grid upper end");
    sub->add_option("--p-max", o.p_max, "highest moment order");
  };

  auto* weights = app.add_subcommand("weights", "solve the weight system and print its profile as JSON");
  auto* estimate = app.add_subcommand("estimate", "run estimators on a data file or generated scenario");
  auto* density = app.add_subcommand("density", "limiting eigenvalue density as CSV and SVG");
  auto* moments = app.add_subcommand("moments", "moment table as CSV and JSON");
  auto* experiment = app.add_subcommand("experiment", "end-to-end reproduction of a scenario");
  for (auto* sub : {weights, estimate, density, moments, experiment}) add_common(sub);
  estimate->add_option("--data", ctx.data, "dataset CSV");
  estimate->add_option("--estimator", ctx.estimators, "scm|nscm|maronna|oracle (repeatable)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }

  try {
    if (weights->parsed()) return ctx.command = "weights", detail::cmd_weights(ctx, out);
    if (estimate->parsed()) return ctx.command = "estimate", detail::cmd_estimate(ctx, out);
    if (density->parsed()) return ctx.command = "density", detail::cmd_density(ctx, out);
    if (moments->parsed()) return ctx.command = "moments", detail::cmd_moments(ctx, out);
    if (experiment->parsed()) return ctx.command = "experiment", detail::cmd_experiment(ctx, out);
  } catch (const SolverError& e) {
    err << "error: " << e.what() << " (residual " << format_double(e.residual()) << " after " << e.iterations()
        << " iterations)\n";
    return kExitNonConvergence;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DimensionError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const AdmissibilityError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitFailure;
}

}  // namespace robust_scatter
