#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "app.hpp"

namespace qhe::cli {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  int code;
  std::string out, err;
};

Outcome invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "otto");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("qhe_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_config(const fs::path& dir, const json& j) {
  const auto path = dir / "config.json";
  std::ofstream(path) << j.dump(2);
  return path;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::ifstream in(path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

std::string first_line(const fs::path& path) {
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  return line;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  return {std::istreambuf_iterator<char>(in), {}};
}

const std::string kReference = std::string(QHE_FIXTURES) + "/reference_run.json";

TEST(Simulate, OptimizedRunFixture) {
  const auto dir = scratch("reference");
  const auto r = invoke({"simulate", "--config", kReference, "--out", dir.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(first_line(dir / "cycles.csv"), kCyclesHeader);
  EXPECT_EQ(first_line(dir / "timeseries.csv"), kTimeseriesHeader);
  const auto rows = read_csv(dir / "cycles.csv");
  ASSERT_EQ(rows.size(), 71u);

  const json summary = json::parse(slurp(dir / "summary.json"));
  EXPECT_EQ(summary["schema_version"], kSchemaVersion);
  EXPECT_EQ(summary["cycles"], 70);
  EXPECT_NEAR(summary["ratio"].get<double>(), 0.91, 0.01);
  EXPECT_NEAR(summary["ergotropy"].get<double>(), 98.41357, 1e-4);

  // Column sums reproduce the JSON totals.
  const std::vector<std::pair<std::string, int>> cols{{"W1", 1}, {"W2", 2}, {"Q1", 3},
                                                      {"Q2", 4}, {"dU", 5}, {"W_cycle", 6}};
  for (const auto& [name, col] : cols) {
    double sum = 0;
    for (std::size_t k = 1; k < rows.size(); ++k) sum += std::stod(rows[k][static_cast<std::size_t>(col)]);
    EXPECT_NEAR(sum, summary["totals"][name].get<double>(), 1e-9) << name;
  }
  EXPECT_NEAR(summary["totals"]["W_cycle"].get<double>(), summary["total_work"].get<double>(), 1e-9);
  EXPECT_NEAR(std::stod(rows.back()[7]), summary["total_work"].get<double>(), 1e-9);
  EXPECT_LT(summary["max_first_law_residual"].get<double>(), 1e-10);

  // E3 stays flat over the run.
  const auto series = read_csv(dir / "timeseries.csv");
  const double e3 = std::stod(series[1][3]);
  for (std::size_t k = 1; k < series.size(); ++k) EXPECT_NEAR(std::stod(series[k][3]), e3, 1e-6);
}

TEST(Simulate, FlagsOverrideConfig) {
  const auto dir = scratch("flags");
  const auto r = invoke({"simulate", "--config", kReference, "--out", dir.string(), "--cycles", "3", "--ramp", "sudden"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(read_csv(dir / "cycles.csv").size(), 4u);
  const json summary = json::parse(slurp(dir / "summary.json"));
  EXPECT_EQ(summary["params"]["ramp"], "sudden");
}

TEST(Simulate, ZeroCouplingHasNoFlows) {
  const auto dir = scratch("zero");
  const json cfg = {{"schema_version", 1},
                    {"engine", {{"alpha12", 0.0}, {"alpha23", 0.0}, {"stop", "fixed"}, {"cycles", 3},
                                {"samples_per_stroke", 2}}}};
  const auto r = invoke({"simulate", "--config", write_config(dir, cfg).string(), "--out", dir.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto rows = read_csv(dir / "cycles.csv");
  ASSERT_EQ(rows.size(), 4u);
  for (std::size_t k = 1; k < rows.size(); ++k) {
    for (int col : {3, 4, 5}) EXPECT_NEAR(std::stod(rows[k][static_cast<std::size_t>(col)]), 0.0, 1e-15);
    EXPECT_NEAR(std::stod(rows[k][6]), 0.0, 1e-12);
  }
}

TEST(Config, ErrorsExitWithTwo) {
  const auto dir = scratch("bad");
  EXPECT_EQ(invoke({"simulate", "--config", (dir / "missing.json").string()}).code, kExitConfig);
  EXPECT_EQ(invoke({"simulate", "--config", write_config(dir, {{"schema_version", 1}, {"bogus", 1}}).string()}).code,
            kExitConfig);
  EXPECT_EQ(invoke({"simulate", "--config", write_config(dir, {{"schema_version", 2}}).string()}).code, kExitConfig);
  EXPECT_EQ(invoke({"simulate", "--config", write_config(dir, json{{"engine", {{"alpha12", 0.1}}}}).string()}).code,
            kExitConfig);
  const json wrong_order = {{"schema_version", 1}, {"engine", {{"omega3", 1.5}}}};
  EXPECT_EQ(invoke({"simulate", "--config", write_config(dir, wrong_order).string()}).code, kExitConfig);
  const json bad_box = {{"schema_version", 1}, {"optimize", {{"box", {{"alpha12", {0.5, 0.1}}}}}}};
  EXPECT_EQ(invoke({"optimize", "--config", write_config(dir, bad_box).string()}).code, kExitConfig);
  EXPECT_EQ(invoke({"simulate", "--ramp", "linear"}).code, kExitConfig);
  EXPECT_EQ(invoke({"frobnicate"}).code, kExitConfig);
  EXPECT_EQ(invoke({}).code, kExitConfig);
}

TEST(Config, NumericalFailureExitsWithThree) {
  const auto dir = scratch("numerical");
  const json cfg = {{"schema_version", 1},
                    {"engine", {{"stop", "fixed"}, {"cycles", 1}}},
                    {"ergotropy", {{"level_budget", 10}}}};
  const auto r = invoke({"simulate", "--config", write_config(dir, cfg).string(), "--out", dir.string()});
  EXPECT_EQ(r.code, kExitNumerical);
  EXPECT_NE(r.err.find("numerical error"), std::string::npos);
}

TEST(Config, ExplicitModePreparation) {
  const json doc = {{"schema_version", 1},
                    {"preparation", {{"modes", {{{"kind", "squeezed"}, {"r", 0.5}},
                                                {{"kind", "thermal"}, {"mean_occupation", 0.2}},
                                                {{"kind", "thermal"}, {"beta", 2.0}}}}}}};
  const auto cfg = parse_config(doc);
  EXPECT_DOUBLE_EQ(std::get<SqueezedVacuum<double>>(cfg.engine.prep.modes[0]).squeezing, 0.5);
  EXPECT_DOUBLE_EQ(std::get<Thermal<double>>(cfg.engine.prep.modes[1]).mean_occupation, 0.2);
  EXPECT_NEAR(std::get<Thermal<double>>(cfg.engine.prep.modes[2]).mean_occupation, 1 / std::expm1(0.2), 1e-15);
}

TEST(Scan, OutputIndependentOfWorkers) {
  const auto a = scratch("scan1"), b = scratch("scan4");
  const json cfg = {{"schema_version", 1}, {"scan", {{"family", "squeezed"}, {"max_cycles", 200}}}};
  const auto path = write_config(a, cfg);
  ASSERT_EQ(invoke({"scan", "--config", path.string(), "--samples", "8", "--workers", "1", "--out", a.string()}).code,
            kExitOk);
  ASSERT_EQ(invoke({"scan", "--config", path.string(), "--samples", "8", "--workers", "4", "--out", b.string()}).code,
            kExitOk);
  EXPECT_EQ(first_line(a / "scan.csv"), kScanHeader);
  EXPECT_EQ(slurp(a / "scan.csv"), slurp(b / "scan.csv"));
  EXPECT_EQ(read_csv(a / "scan.csv").size(), 9u);
  const auto c = scratch("scan_seed");
  invoke({"scan", "--config", path.string(), "--samples", "8", "--seed", "2", "--out", c.string()});
  EXPECT_NE(slurp(a / "scan.csv"), slurp(c / "scan.csv"));
}

TEST(Optimize, WritesBestAndTrace) {
  const auto dir = scratch("optimize");
  const json cfg = {{"schema_version", 1},
                    {"engine", {{"ramp", "sudden"}, {"tau_comp", 0.0}}},
                    {"optimize", {{"restarts", 2}, {"objective", "total_work"},
                                  {"box", {{"alpha12", {0.2, 0.35}}, {"alpha23", {1e-4, 1e-4}},
                                           {"tau_cold", {0.9996, 0.9996}}, {"tau_comp", {0.0, 0.0}}}}}}};
  const auto r = invoke({"optimize", "--config", write_config(dir, cfg).string(), "--budget", "20", "--out",
                         dir.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const json best = json::parse(slurp(dir / "best.json"));
  EXPECT_EQ(best["evaluations"], 20);
  EXPECT_FALSE(best["converged"].get<bool>());
  EXPECT_LT(best["value"].get<double>(), 0.0);
  EXPECT_EQ(first_line(dir / "trace.csv"), kTraceHeader);
  EXPECT_EQ(read_csv(dir / "trace.csv").size(), 21u);
}

TEST(Optimize, Omega3SweepWritesOneRowPerPoint) {
  const auto dir = scratch("sweep");
  const json cfg = {{"schema_version", 1},
                    {"engine", {{"ramp", "sudden"}, {"tau_comp", 0.0}}},
                    {"optimize", {{"restarts", 1}, {"budget", 6}, {"omega3_sweep", {0.3, 0.5}},
                                  {"box", {{"tau_comp", {0.0, 0.0}}}}}}};
  const auto r = invoke({"optimize", "--config", write_config(dir, cfg).string(), "--out", dir.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto rows = read_csv(dir / "sweep.csv");
  EXPECT_EQ(first_line(dir / "sweep.csv"), kSweepHeader);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_DOUBLE_EQ(std::stod(rows[1][0]), 0.3);
  EXPECT_DOUBLE_EQ(std::stod(rows[2][0]), 0.5);
}

TEST(Validate, PassesAndDetectsPerturbation) {
  const auto ok = invoke({"validate"});
  EXPECT_EQ(ok.code, kExitOk) << ok.out;
  EXPECT_EQ(ok.out.find("FAIL"), std::string::npos);
  const auto bad = invoke({"validate", "--perturb-propagator", "1e-3"});
  EXPECT_EQ(bad.code, kExitNumerical);
  EXPECT_NE(bad.out.find("FAIL symplectic_strokes"), std::string::npos);
}

TEST(Help, ExitsCleanly) {
  const auto r = invoke({"--help"});
  EXPECT_EQ(r.code, kExitOk);
  EXPECT_NE(r.out.find("simulate"), std::string::npos);
}

}  // namespace
}  // namespace qhe::cli
