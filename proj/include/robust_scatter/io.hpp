#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "det_equiv.hpp"
#include "estimators.hpp"
#include "scenarios.hpp"
#include "simulate.hpp"
#include "spectrum.hpp"

namespace robust_scatter {

using Json = nlohmann::ordered_json;

inline constexpr std::string_view kScenarioSchema = "robust-scatter/scenario@1";

/// Shortest decimal form that round-trips; independent of the C locale.
inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return {buf, r.ptr};
}

inline double parse_double(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  double x = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), x);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw ConfigError("not a number: '" + std::string(s) + "'");
  return x;
}

/// Minimal CSV writer: comma separators, '\n' line endings, round-trip doubles.
class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& os) : os_(os) {}

  CsvWriter& header(std::initializer_list<std::string_view> cols) {
    bool first = true;
    for (auto c : cols) {
      if (!first) os_ << ',';
      os_ << c;
      first = false;
    }
    os_ << '\n';
    return *this;
  }

  template <typename... Ts>
  CsvWriter& row(const Ts&... values) {
    bool first = true;
    ((write_cell(values, first)), ...);
    os_ << '\n';
    return *this;
  }

 private:
  template <typename T>
  void write_cell(const T& v, bool& first) {
    if (!first) os_ << ',';
    first = false;
    if constexpr (std::is_floating_point_v<T>) {
      os_ << format_double(static_cast<double>(v));
    } else {
      os_ << v;
    }
  }

  std::ostream& os_;
};

inline void write_file(const std::filesystem::path& p, const std::string& content) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary);
  if (!f) throw ConfigError("cannot open '" + p.string() + "' for writing");
  f << content;
  if (!f) throw ConfigError("failed to write '" + p.string() + "'");
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw ConfigError("cannot open '" + p.string() + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// ---- scenario JSON ----------------------------------------------------------

namespace detail {

inline void reject_unknown_keys(const Json& j, std::initializer_list<std::string_view> allowed, std::string_view where) {
  if (!j.is_object()) throw ConfigError(std::string(where) + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError("unknown key '" + key + "' in " + std::string(where));
  }
}

template <typename T>
T get_or(const Json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

inline std::string_view cov_kind_name(CovKind k) {
  switch (k) {
    case CovKind::Identity:
      return "identity";
    case CovKind::Toeplitz:
      return "toeplitz";
    case CovKind::DiagBlocks:
      return "diag_blocks";
    case CovKind::Fig1:
      return "fig1";
  }
  return "?";
}

inline std::string_view outlier_kind_name(OutlierKind k) {
  switch (k) {
    case OutlierKind::None:
      return "none";
    case OutlierKind::Fig1:
      return "fig1";
    case OutlierKind::Gaussian:
      return "gaussian";
    case OutlierKind::Custom:
      return "custom";
  }
  return "?";
}

inline Json cov_to_json(const CovSpec& c) {
  Json j;
  j["kind"] = cov_kind_name(c.kind);
  if (c.kind == CovKind::Toeplitz) j["rho"] = c.rho;
  if (c.kind == CovKind::DiagBlocks) {
    j["scale"] = c.scale;
    j["blocks"] = Json::array();
    for (const auto& b : c.blocks) j["blocks"].push_back({{"count", b.count}, {"value", b.value}});
  }
  return j;
}

inline CovSpec cov_from_json(const Json& j, std::string_view where) {
  reject_unknown_keys(j, {"kind", "rho", "scale", "blocks"}, where);
  const auto kind = get_or<std::string>(j, "kind", "identity");
  CovSpec c;
  if (kind == "identity") {
    c.kind = CovKind::Identity;
  } else if (kind == "toeplitz") {
    c.kind = CovKind::Toeplitz;
    c.rho = get_or<double>(j, "rho", 0.0);
  } else if (kind == "diag_blocks") {
    c.kind = CovKind::DiagBlocks;
    c.scale = get_or<double>(j, "scale", 1.0);
    if (!j.contains("blocks")) throw ConfigError(std::string(where) + ": diag_blocks needs 'blocks'");
    for (const auto& b : j.at("blocks")) {
      reject_unknown_keys(b, {"count", "value"}, "diagonal block");
      c.blocks.push_back({get_or<Index>(b, "count", 0), get_or<double>(b, "value", 1.0)});
    }
  } else if (kind == "fig1") {
    c.kind = CovKind::Fig1;
  } else {
    throw ConfigError(std::string(where) + ": unknown covariance kind '" + kind + "'");
  }
  if (c.kind != CovKind::Toeplitz && j.contains("rho")) throw ConfigError(std::string(where) + ": 'rho' needs kind toeplitz");
  if (c.kind != CovKind::DiagBlocks && (j.contains("blocks") || j.contains("scale")))
    throw ConfigError(std::string(where) + ": 'blocks'/'scale' need kind diag_blocks");
  return c;
}

}  // namespace detail

/// Fully resolved scenario as versioned JSON (every field written, defaults applied).
inline Json scenario_to_json(const ScenarioSpec& s) {
  Json j;
  j["schema"] = kScenarioSchema;
  j["name"] = s.name;
  j["experiment"] = to_string(s.experiment);
  j["N"] = s.N;
  j["n"] = s.n;
  j["u"] = {{"kind", to_string(s.u_kind)}, {"t", s.t}};
  j["C"] = detail::cov_to_json(s.C);
  Json o;
  o["kind"] = detail::outlier_kind_name(s.outliers.kind);
  if (s.outliers.kind == OutlierKind::Gaussian) o["D"] = detail::cov_to_json(s.outliers.D);
  if (s.outliers.kind == OutlierKind::Custom) {
    o["vectors"] = Json::array();
    for (Index k = 0; k < s.outliers.vectors.cols(); ++k) {
      Json col = Json::array();
      for (Index i = 0; i < s.outliers.vectors.rows(); ++i) col.push_back(s.outliers.vectors(i, k));
      o["vectors"].push_back(std::move(col));
    }
  }
  j["outliers"] = std::move(o);
  j["epsilon"] = s.epsilon;
  j["seed"] = s.seed;
  j["field"] = to_string(s.field);
  j["trials"] = s.trials;
  j["sweep_N"] = s.sweep_N;
  j["grid"] = {{"x_min", s.grid.x_min}, {"x_max", s.grid.x_max}, {"points", s.grid.points}, {"y_imag", s.grid.y_imag}};
  j["p_max"] = s.p_max;
  j["spike_window"] = {{"lo", s.window_lo}, {"hi", s.window_hi}, {"gap_factor", s.gap_factor}};
  j["maronna"] = {{"tol", s.maronna_tol}, {"max_iter", s.maronna_max_iter}};
  return j;
}

/// Strict parse: unknown keys anywhere are rejected, missing keys take the defaults of ScenarioSpec.
inline ScenarioSpec scenario_from_json(const Json& j) {
  using detail::get_or;
  detail::reject_unknown_keys(j,
                              {"schema", "name", "experiment", "N", "n", "u", "C", "outliers", "epsilon", "seed", "field",
                               "trials", "sweep_N", "grid", "p_max", "spike_window", "maronna"},
                              "scenario");
  if (!j.contains("schema")) throw ConfigError("scenario is missing its 'schema' field");
  if (j.at("schema") != kScenarioSchema)
    throw ConfigError("unsupported scenario schema '" + j.at("schema").dump() + "' (expected " + std::string(kScenarioSchema) + ")");
  ScenarioSpec s;
  s.name = get_or<std::string>(j, "name", s.name);
  s.experiment = parse_experiment(get_or<std::string>(j, "experiment", std::string(to_string(s.experiment))));
  s.N = get_or<Index>(j, "N", s.N);
  s.n = get_or<Index>(j, "n", s.n);
  if (j.contains("u")) {
    const auto& u = j.at("u");
    detail::reject_unknown_keys(u, {"kind", "t"}, "u");
    s.u_kind = parse_ukind(get_or<std::string>(u, "kind", std::string(to_string(s.u_kind))));
    s.t = get_or<double>(u, "t", s.t);
  }
  if (j.contains("C")) s.C = detail::cov_from_json(j.at("C"), "C");
  if (j.contains("outliers")) {
    const auto& o = j.at("outliers");
    detail::reject_unknown_keys(o, {"kind", "D", "vectors"}, "outliers");
    const auto kind = get_or<std::string>(o, "kind", "none");
    if (kind == "none") {
      s.outliers.kind = OutlierKind::None;
    } else if (kind == "fig1") {
      s.outliers.kind = OutlierKind::Fig1;
    } else if (kind == "gaussian") {
      s.outliers.kind = OutlierKind::Gaussian;
      s.outliers.D = o.contains("D") ? detail::cov_from_json(o.at("D"), "outliers.D") : CovSpec::identity();
    } else if (kind == "custom") {
      s.outliers.kind = OutlierKind::Custom;
      const auto cols = get_or<std::vector<std::vector<double>>>(o, "vectors", {});
      const Index rows = cols.empty() ? 0 : static_cast<Index>(cols.front().size());
      s.outliers.vectors.resize(rows, static_cast<Index>(cols.size()));
      for (std::size_t k = 0; k < cols.size(); ++k) {
        if (static_cast<Index>(cols[k].size()) != rows) throw ConfigError("custom outlier vectors must share one length");
        for (Index i = 0; i < rows; ++i) s.outliers.vectors(i, static_cast<Index>(k)) = cols[k][static_cast<std::size_t>(i)];
      }
    } else {
      throw ConfigError("unknown outlier kind '" + kind + "'");
    }
    if (s.outliers.kind != OutlierKind::Gaussian && o.contains("D")) throw ConfigError("outliers.D needs kind gaussian");
    if (s.outliers.kind != OutlierKind::Custom && o.contains("vectors")) throw ConfigError("outliers.vectors needs kind custom");
  }
  s.epsilon = get_or<double>(j, "epsilon", s.epsilon);
  s.seed = get_or<std::uint64_t>(j, "seed", s.seed);
  s.field = parse_field(get_or<std::string>(j, "field", std::string(to_string(s.field))));
  s.trials = get_or<int>(j, "trials", s.trials);
  s.sweep_N = get_or<std::vector<Index>>(j, "sweep_N", s.sweep_N);
  if (j.contains("grid")) {
    const auto& g = j.at("grid");
    detail::reject_unknown_keys(g, {"x_min", "x_max", "points", "y_imag"}, "grid");
    s.grid.x_min = get_or<double>(g, "x_min", s.grid.x_min);
    s.grid.x_max = get_or<double>(g, "x_max", s.grid.x_max);
    s.grid.points = get_or<std::size_t>(g, "points", s.grid.points);
    s.grid.y_imag = get_or<double>(g, "y_imag", s.grid.y_imag);
  }
  s.p_max = get_or<int>(j, "p_max", s.p_max);
  if (j.contains("spike_window")) {
    const auto& w = j.at("spike_window");
    detail::reject_unknown_keys(w, {"lo", "hi", "gap_factor"}, "spike_window");
    s.window_lo = get_or<double>(w, "lo", s.window_lo);
    s.window_hi = get_or<double>(w, "hi", s.window_hi);
    s.gap_factor = get_or<double>(w, "gap_factor", s.gap_factor);
  }
  if (j.contains("maronna")) {
    const auto& m = j.at("maronna");
    detail::reject_unknown_keys(m, {"tol", "max_iter"}, "maronna");
    s.maronna_tol = get_or<double>(m, "tol", s.maronna_tol);
    s.maronna_max_iter = get_or<int>(m, "max_iter", s.maronna_max_iter);
  }
  s.validate();
  return s;
}

inline ScenarioSpec parse_scenario(std::string_view text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("scenario is not valid JSON: ") + e.what());
  }
  return scenario_from_json(j);
}

/// A built-in name (fig1..fig5) or a path to a scenario JSON file.
inline ScenarioSpec load_scenario(const std::string& name_or_path) {
  if (is_builtin_scenario(name_or_path)) return builtin_scenario(name_or_path);
  return parse_scenario(read_file(name_or_path));
}

// ---- result serialization ---------------------------------------------------

inline Json vector_to_json(const VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline Json weight_profile_to_json(const WeightProfile& w) {
  Json j;
  j["random_outliers"] = w.random_outliers;
  j["gamma"] = w.gamma;
  j["v_gamma"] = w.v_gamma;
  if (w.random_outliers) {
    j["alpha"] = w.alphas(0);
    j["v_alpha"] = w.v_alphas(0);
  } else {
    j["alphas"] = vector_to_json(w.alphas);
    j["v_alphas"] = vector_to_json(w.v_alphas);
  }
  j["iterations"] = w.iterations;
  j["residual"] = w.residual;
  j["monotone"] = w.monotone;
  j["feasible_point"] = {{"q0", w.bounds.q0}, {"w", vector_to_json(w.bounds.w)}};
  return j;
}

inline std::string density_csv(const DensityEstimate& d) {
  std::ostringstream os;
  CsvWriter w(os);
  w.header({"x", "density"});
  for (std::size_t i = 0; i < d.x.size(); ++i) w.row(d.x[i], d.density[i]);
  return os.str();
}

inline Json moment_table_to_json(const MomentTable& t) {
  Json j;
  j["p_max"] = t.p_max;
  j["moments"] = std::vector<double>(t.moments.begin() + 1, t.moments.end());
  const auto norm = normalized_moments(t);
  j["normalized"] = std::vector<double>(norm.begin() + 1, norm.end());
  return j;
}

inline std::string moment_table_csv(const MomentTable& t) {
  std::ostringstream os;
  CsvWriter w(os);
  w.header({"p", "moment", "normalized"});
  const auto norm = normalized_moments(t);
  for (int p = 1; p <= t.p_max; ++p) w.row(p, t.moments[static_cast<std::size_t>(p)], norm[static_cast<std::size_t>(p)]);
  return os.str();
}

inline std::string moment_comparison_csv(const MomentComparison& m) {
  std::ostringstream os;
  CsvWriter w(os);
  w.header({"p", "robust", "scm", "oracle", "robust_error", "scm_error"});
  for (std::size_t p = 1; p < m.oracle_normalized.size(); ++p)
    w.row(static_cast<int>(p), m.robust_normalized[p], m.scm_normalized[p], m.oracle_normalized[p], m.robust_error[p],
          m.scm_error[p]);
  return os.str();
}

inline Json moment_comparison_to_json(const MomentComparison& m) {
  auto tail = [](const std::vector<double>& v) { return std::vector<double>(v.begin() + 1, v.end()); };
  return {{"weights", weight_profile_to_json(m.weights)},
          {"robust", tail(m.robust_normalized)},
          {"scm", tail(m.scm_normalized)},
          {"oracle", tail(m.oracle_normalized)},
          {"robust_error", tail(m.robust_error)},
          {"scm_error", tail(m.scm_error)}};
}

struct SvgSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

/// Line chart with one polyline per series and min/max axis labels.
inline std::string svg_line_plot(const std::vector<SvgSeries>& series, std::string_view title) {
  constexpr double W = 640, H = 400, margin = 50;
  double x0 = INFINITY, x1 = -INFINITY, y0 = 0.0, y1 = -INFINITY;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y1 = std::max(y1, s.y[i]);
    }
  if (!(x1 > x0)) x1 = x0 + 1.0;
  if (!(y1 > y0)) y1 = y0 + 1.0;
  auto px = [&](double x) { return margin + (x - x0) / (x1 - x0) * (W - 2 * margin); };
  auto py = [&](double y) { return H - margin - (y - y0) / (y1 - y0) * (H - 2 * margin); };
  static constexpr std::string_view colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n";
  os << "<path d=\"M" << margin << ' ' << H - margin << " H" << W - margin << " M" << margin << ' ' << H - margin << " V"
     << margin << "\" stroke=\"black\" fill=\"none\"/>\n";
  os << "<text x=\"" << margin << "\" y=\"" << H - margin + 16 << "\" font-size=\"11\">" << format_double(x0) << "</text>\n";
  os << "<text x=\"" << W - margin << "\" y=\"" << H - margin + 16 << "\" font-size=\"11\" text-anchor=\"end\">"
     << format_double(x1) << "</text>\n";
  os << "<text x=\"" << margin - 4 << "\" y=\"" << margin << "\" font-size=\"11\" text-anchor=\"end\">" << format_double(y1)
     << "</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const auto color = colors[k % std::size(colors)];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.2\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) os << (i ? " " : "") << format_double(px(s.x[i])) << ',' << format_double(py(s.y[i]));
    os << "\"/>\n";
    os << "<text x=\"" << W - margin << "\" y=\"" << margin + 14.0 * static_cast<double>(k) << "\" font-size=\"11\" text-anchor=\"end\" fill=\""
       << color << "\">" << s.label << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

// ---- dataset CSV ------------------------------------------------------------
//
// First line "# N n n_outliers" (n_outliers "-" when ground truth is unknown); then N rows of
// n comma-separated real values, one column per sample, outlier columns last.

inline std::string dataset_csv(const Dataset<double>& d) {
  std::ostringstream os;
  os << "# " << d.N() << ' ' << d.n() << ' ';
  if (d.labels) {
    os << d.n_outliers;
  } else {
    os << '-';
  }
  os << '\n';
  for (Index i = 0; i < d.N(); ++i) {
    for (Index j = 0; j < d.n(); ++j) os << (j ? "," : "") << format_double(d.samples(i, j));
    os << '\n';
  }
  return os.str();
}

inline Dataset<double> parse_dataset_csv(std::string_view text) {
  std::vector<std::string_view> lines;
  for (std::size_t at = 0; at < text.size();) {
    auto end = text.find('\n', at);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(at, end - at);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty()) lines.push_back(line);
    at = end + 1;
  }
  if (lines.empty() || lines.front().substr(0, 2) != "# ") throw ConfigError("dataset CSV must start with '# N n n_outliers'");
  std::istringstream head{std::string(lines.front().substr(2))};
  Index N = 0, n = 0;
  std::string k;
  if (!(head >> N >> n >> k)) throw ConfigError("dataset header must read '# N n n_outliers'");
  if (N < 1 || n < 1) throw ConfigError("dataset header needs positive N and n");
  if (static_cast<Index>(lines.size()) != N + 1) throw ConfigError("dataset CSV must have N data rows");
  MatrixXd y(N, n);
  for (Index i = 0; i < N; ++i) {
    auto line = lines[static_cast<std::size_t>(i + 1)];
    Index j = 0;
    for (std::size_t at = 0;; ++j) {
      const auto comma = line.find(',', at);
      if (j >= n) throw ConfigError("dataset row " + std::to_string(i + 1) + " has more than n values");
      y(i, j) = parse_double(line.substr(at, comma == std::string_view::npos ? std::string_view::npos : comma - at));
      if (comma == std::string_view::npos) break;
      at = comma + 1;
    }
    if (j + 1 != n) throw ConfigError("dataset row " + std::to_string(i + 1) + " has fewer than n values");
  }
  if (k == "-") return Dataset<double>::unlabelled(std::move(y));
  return Dataset<double>::labelled(std::move(y), static_cast<Index>(parse_double(k)));
}

/// FNV-1a 64-bit digest, used to fingerprint scenario inputs in summaries.
inline std::string fnv1a_hex(std::string_view data) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  const auto r = std::to_chars(buf, buf + 16, h, 16);
  std::string s(buf, r.ptr);
  return std::string(16 - s.size(), '0') + s;
}

}  // namespace robust_scatter
