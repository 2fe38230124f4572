#include <clocale>
#include <cstdlib>
#include <filesystem>
#include <sstream>

#include <sys/wait.h>

#include <gtest/gtest.h>

#include <robust_scatter/robust_scatter.hpp>

using namespace robust_scatter;
namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code = 0;
  std::string out;
  std::string err;
};

CliRun cli(std::vector<std::string> args) {
  args.insert(args.begin(), "robust-scatter");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("robust_scatter_test_" + name);
  fs::remove_all(p);
  return p;
}

Json read_json(const fs::path& p) { return Json::parse(read_file(p)); }

}  // namespace

TEST(Format, ShortestRoundTrip) {
  for (double x : {0.1, 1.0 / 3.0, 1e-300, 123456789.125, -2.5e17}) EXPECT_EQ(parse_double(format_double(x)), x);
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(2.0), "2");
  EXPECT_EQ(format_double(INFINITY), "inf");
  EXPECT_THROW(parse_double("1,5"), ConfigError);
  EXPECT_THROW(parse_double(""), ConfigError);
  EXPECT_EQ(parse_double(" 2.5\r"), 2.5);
}

TEST(Format, IgnoresLocale) {
  const char* previous = std::setlocale(LC_NUMERIC, nullptr);
  const std::string saved = previous ? previous : "C";
  if (std::setlocale(LC_NUMERIC, "de_DE.UTF-8") == nullptr) GTEST_SKIP() << "de_DE locale not installed";
  EXPECT_EQ(format_double(1.5), "1.5");
  std::ostringstream os;
  CsvWriter(os).row(1.5, 2);
  EXPECT_EQ(os.str(), "1.5,2\n");
  std::setlocale(LC_NUMERIC, saved.c_str());
}

TEST(Csv, RowsAndHeader) {
  std::ostringstream os;
  CsvWriter w(os);
  w.header({"a", "b", "c"}).row(std::string("x"), 0.25, 7);
  EXPECT_EQ(os.str(), "a,b,c\nx,0.25,7\n");
}

TEST(ScenarioJson, BuiltinsRoundTrip) {
  for (const auto& name : builtin_scenario_names()) {
    const auto s = builtin_scenario(name);
    const Json j = scenario_to_json(s);
    EXPECT_EQ(scenario_to_json(parse_scenario(j.dump())), j) << name;
  }
}

TEST(ScenarioJson, CustomOutliersRoundTrip) {
  ScenarioSpec s;
  s.N = 3;
  s.n = 10;
  s.outliers.kind = OutlierKind::Custom;
  s.outliers.vectors = MatrixXd::Identity(3, 2);
  s.epsilon = 0.2;
  s.C = CovSpec{CovKind::DiagBlocks, 0.0, {{1, 2.0}, {2, 1.0}}, 1.5};
  const auto back = parse_scenario(scenario_to_json(s).dump());
  EXPECT_EQ(back.outliers, s.outliers);
  EXPECT_EQ(back.C, s.C);
}

TEST(ScenarioJson, StrictParsing) {
  Json j = scenario_to_json(builtin_scenario("fig4"));
  j["colour"] = "blue";
  EXPECT_THROW(parse_scenario(j.dump()), ConfigError);
  j = scenario_to_json(builtin_scenario("fig4"));
  j["grid"]["step"] = 0.1;
  EXPECT_THROW(parse_scenario(j.dump()), ConfigError);
  j = scenario_to_json(builtin_scenario("fig4"));
  j.erase("schema");
  EXPECT_THROW(parse_scenario(j.dump()), ConfigError);
  j["schema"] = "robust-scatter/scenario@2";
  EXPECT_THROW(parse_scenario(j.dump()), ConfigError);
  EXPECT_THROW(parse_scenario("{not json"), ConfigError);
  j = scenario_to_json(builtin_scenario("fig4"));
  j["outliers"]["kind"] = "none";
  EXPECT_THROW(parse_scenario(j.dump()), ConfigError);  // D without gaussian
}

TEST(ScenarioJson, ShippedFilesMatchBuiltins) {
  for (const auto& name : builtin_scenario_names()) {
    const fs::path p = fs::path(RS_SOURCE_DIR) / "scenarios" / (name + ".json");
    ASSERT_TRUE(fs::exists(p)) << p;
    EXPECT_EQ(scenario_to_json(load_scenario(p.string())), scenario_to_json(builtin_scenario(name))) << name;
  }
}

TEST(DatasetCsv, RoundTrip) {
  MatrixXd y(2, 3);
  y << 0.1, -2.0, 1e-17, 3.0, 4.25, -0.3;
  const auto d = Dataset<double>::labelled(y, 1);
  const auto back = parse_dataset_csv(dataset_csv(d));
  EXPECT_EQ(back.samples, y);
  EXPECT_EQ(back.n_outliers, 1);
  EXPECT_TRUE(back.labels.has_value());
  const auto u = parse_dataset_csv(dataset_csv(Dataset<double>::unlabelled(y)));
  EXPECT_FALSE(u.labels.has_value());
  EXPECT_THROW(parse_dataset_csv("# 2 3 0\n1,2,3\n"), ConfigError);
  EXPECT_THROW(parse_dataset_csv("# 1 3 0\n1,2\n"), ConfigError);
  EXPECT_THROW(parse_dataset_csv("1,2,3\n"), ConfigError);
}

TEST(Cli, ExitCodes) {
  const auto dir = scratch("codes");
  EXPECT_EQ(cli({"--help"}).code, kExitOk);
  EXPECT_EQ(cli({}).code, kExitConfig);
  EXPECT_EQ(cli({"weights", "--scenario", "fig9", "--out", dir.string()}).code, kExitConfig);
  EXPECT_EQ(cli({"weights", "--scenario", "fig4", "--umode", "tyler"}).code, kExitConfig);
  EXPECT_EQ(cli({"weights", "--scenario", "fig4", "--t", "0.01", "--out", dir.string()}).code, kExitConfig);
  const auto r = cli({"estimate", "--scenario", "fig4", "--N", "20", "--estimator", "maronna", "--max-iter", "1", "--out",
                      dir.string()});
  EXPECT_EQ(r.code, kExitNonConvergence) << r.err;
  EXPECT_NE(r.err.find("residual"), std::string::npos);
  fs::remove_all(dir);
}

TEST(Cli, WeightsOnFig4) {
  const auto dir = scratch("weights");
  const auto r = cli({"weights", "--scenario", "fig4", "--out", dir.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const Json w = read_json(dir / "weights.json");
  EXPECT_NEAR(w["weights"]["v_gamma"].get<double>(), 1.00, 0.01);
  EXPECT_NEAR(w["weights"]["v_alpha"].get<double>(), 0.1219, 0.002);
  const Json s = read_json(dir / "summary.json");
  EXPECT_EQ(s["command"], "weights");
  EXPECT_EQ(s["source"]["builtin"], "fig4");
  EXPECT_EQ(s["scenario"], scenario_to_json(builtin_scenario("fig4")));
  fs::remove_all(dir);
}

TEST(Cli, DensityOnFig4) {
  const auto dir = scratch("density");
  const auto r = cli({"density", "--scenario", "fig4", "--grid-points", "4001", "--out", dir.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  for (const char* f : {"density.csv", "density.svg", "summary.json"}) EXPECT_TRUE(fs::exists(dir / f)) << f;
  const std::string csv = read_file(dir / "density.csv");
  EXPECT_EQ(csv.substr(0, 10), "x,density\n");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4002);
  const Json s = read_json(dir / "summary.json");
  EXPECT_NEAR(s["results"]["density"]["mass"].get<double>(), 1.0, 0.02);
  EXPECT_FALSE(s["results"]["density"]["support"].empty());
  EXPECT_EQ(s["scenario"]["grid"]["points"], 4001);
  fs::remove_all(dir);
}

TEST(Cli, MomentsOnFig5MatchLibrary) {
  const auto dir = scratch("moments");
  ASSERT_EQ(cli({"moments", "--scenario", "fig5", "--out", dir.string()}).code, kExitOk);
  const Json j = read_json(dir / "moments.json");
  const auto ref = moment_comparison_experiment(builtin_scenario("fig5"));
  for (int p = 1; p <= 4; ++p) {
    EXPECT_EQ(j["robust"][p - 1].get<double>(), ref.robust_normalized[static_cast<std::size_t>(p)]);
    EXPECT_EQ(j["oracle"][p - 1].get<double>(), ref.oracle_normalized[static_cast<std::size_t>(p)]);
  }
  const std::string csv = read_file(dir / "moments.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "p,robust,scm,oracle,robust_error,scm_error");
  fs::remove_all(dir);
}

TEST(Cli, EstimateFromDataFile) {
  const auto dir = scratch("estimate");
  ScenarioSpec s;
  s.N = 5;
  s.n = 40;
  s.field = Field::Real;
  write_file(dir / "data.csv", dataset_csv(generate_dataset<double>(s, 0)));
  const auto r = cli({"estimate", "--data", (dir / "data.csv").string(), "--umode", "huber", "--t", "0.5", "--out",
                      (dir / "out").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const std::string csv = read_file(dir / "out" / "eigenvalues.csv");
  EXPECT_NE(csv.find("maronna,4,"), std::string::npos);
  EXPECT_NE(csv.find("oracle,0,"), std::string::npos);
  const Json sum = read_json(dir / "out" / "summary.json");
  EXPECT_EQ(sum["data"]["fnv1a64"], fnv1a_hex(read_file(dir / "data.csv")));
  fs::remove_all(dir);
}

TEST(Cli, OverridesKeepRatio) {
  CliOverrides o;
  o.N = 60;
  const auto s = apply_overrides(builtin_scenario("fig4"), o);
  EXPECT_EQ(s.n, 300);
  const auto f = apply_overrides(builtin_scenario("fig1"), o);
  EXPECT_EQ(f.n_outliers(), 1);
}

TEST(Cli, Binary) {
  const std::string bin = RS_CLI_PATH;
  EXPECT_EQ(std::system((bin + " --help > /dev/null").c_str()), 0);
  const int status = std::system((bin + " nonsense > /dev/null 2>&1").c_str());
  EXPECT_EQ(WEXITSTATUS(status), kExitConfig);
}

TEST(Fnv, KnownVectors) {
  EXPECT_EQ(fnv1a_hex(""), "cbf29ce484222325");
  EXPECT_EQ(fnv1a_hex("a"), "af63dc4c8601ec8c");
}
