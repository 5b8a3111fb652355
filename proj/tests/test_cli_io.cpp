#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "afpca/cli.hpp"

using namespace afpca;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("afpca_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string operator/(const std::string& name) const { return (path_ / name).string(); }

 private:
  fs::path path_;
};

int run(std::initializer_list<std::string> args, std::string* err_text = nullptr) {
  std::vector<std::string> owned{"afpca"};
  owned.insert(owned.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : owned) argv.push_back(a.c_str());
  std::ostringstream err;
  const int code = cli_main(static_cast<int>(argv.size()), argv.data(), err);
  if (err_text) *err_text = err.str();
  return code;
}

const char* small_scenario = R"({"schema_version": 1, "N": 40, "m": 30, "sigma0": 0.2, "truth_elements": 3})";
const char* small_config =
    R"({"schema_version": 1, "J": 3, "K0": 5, "fine_grid_size": 51, "h_grid_count": 21, "baseline_h": [0.1, 0.05]})";

}  // namespace

TEST(Curves, RoundTripIsBitExact) {
  MfbmSpec spec;
  spec.sigma0 = 0.3;
  const auto s = simulate(spec, {DesignKind::IndependentUniformPoisson, 20.0, 15}, 4);
  const auto text = io::write_curves(s);
  const auto back = io::read_curves(text);
  ASSERT_EQ(back.size(), s.size());
  EXPECT_EQ(back.design(), Design::Independent);
  for (std::size_t i = 0; i < s.size(); ++i) {
    EXPECT_EQ(back[i].id(), s[i].id());
    EXPECT_TRUE(std::ranges::equal(back[i].times(), s[i].times()));
    EXPECT_TRUE(std::ranges::equal(back[i].values(), s[i].values()));
  }
  EXPECT_EQ(io::write_curves(back), text);
}

TEST(Curves, ParseErrorsCarryLineNumbers) {
  auto line_of = [](const std::string& text) {
    try {
      (void)io::read_curves(text);
    } catch (const ParseError& e) {
      return e.line();
    }
    return -2L;
  };
  const std::string ok1 = R"({"id": 1, "t": [0.1, 0.5], "y": [1, 2]})";
  const std::string ok2 = R"({"id": 2, "t": [0.2, 0.6], "y": [1, 2]})";
  EXPECT_EQ(line_of(ok1 + "\n{not json\n"), 2);
  EXPECT_EQ(line_of(ok1 + "\n" + ok2 + "\n" + R"({"id": 3, "t": [0.5, 0.2], "y": [1, 2]})"), 3);
  EXPECT_EQ(line_of(ok1 + "\n" + R"({"id": 1, "t": [0.3], "y": [1]})"), 2);
  EXPECT_EQ(line_of(ok1 + "\n" + R"({"id": 4, "t": [0.3], "y": [1], "w": 0})"), 2);
  EXPECT_EQ(line_of(ok1 + "\n" + R"({"design": "common"})"), 2);
  EXPECT_EQ(line_of(R"({"design": "sparse"})"), 1);
  EXPECT_EQ(line_of(R"({"id": 1, "t": [0.1, 1.5], "y": [1, 2]})"), 1);
  EXPECT_EQ(line_of(ok1 + "\n"), -1);  // a single curve is not a sample
  EXPECT_EQ(line_of(ok1 + "\n\n" + ok2 + "\n"), -2);
}

TEST(Config, RoundTripAndUnknownKeys) {
  FitConfig c;
  c.J = 4;
  c.K0 = 6;
  c.kernel = Kernel{KernelType::Triangular};
  c.baseline_h = {0.2, 0.05};
  const auto back = io::parse_config(io::config_to_json(c));
  EXPECT_EQ(back.J, 4);
  EXPECT_EQ(back.K0, 6);
  EXPECT_EQ(back.kernel.type, KernelType::Triangular);
  EXPECT_EQ(back.baseline_h, c.baseline_h);
  EXPECT_EQ(io::config_to_json(back), io::config_to_json(c));

  EXPECT_THROW(io::parse_config(io::json{{"schema_version", 1}, {"bandwidth", 0.1}}), ParseError);
  EXPECT_THROW(io::parse_config(io::json{{"J", 3}}), ParseError);
  EXPECT_THROW(io::parse_config(io::json{{"schema_version", 2}}), ParseError);
  EXPECT_THROW(io::parse_config(io::json{{"schema_version", 1}, {"J", "three"}}), ParseError);
  EXPECT_THROW(io::parse_config(io::json{{"schema_version", 1}, {"J", 12}}), ParseError);
  EXPECT_THROW(io::parse_config(io::json{{"schema_version", 1}, {"kernel", "gaussian"}}), ParseError);
}

TEST(Scenario, PresetsAndFunctions) {
  const auto fbm = io::parse_scenario(io::json::parse(R"({"schema_version": 1, "H": 0.3, "N": 10, "m": 7,
      "design": "common", "mu": "sin2pi", "sigma": [[0, 1], [1, 3]]})"));
  EXPECT_DOUBLE_EQ(fbm.spec.H(0.4), 0.3);
  EXPECT_EQ(fbm.design.kind, DesignKind::CommonEquispaced);
  EXPECT_DOUBLE_EQ(fbm.spec.sigma(0.5), 2.0);
  EXPECT_NEAR(fbm.spec.mu(0.25), 1.0, 1e-15);
  EXPECT_FALSE(fbm.spec.m2_target.has_value());

  const auto pl = io::parse_scenario(
      io::json::parse(R"({"schema_version": 1, "preset": "power_like", "H": 0.5, "L": 1, "m2": 1, "mu": "zero"})"));
  EXPECT_DOUBLE_EQ(pl.spec.A0, 1.0);
  EXPECT_NEAR(covariance_CA(pl.spec, 0.6, 0.6), 1.0, 1e-12);

  EXPECT_THROW(io::parse_scenario(io::json::parse(R"({"schema_version": 1, "preset": "power_like", "H": 0.5})")),
               ParseError);
  EXPECT_THROW(io::parse_scenario(io::json::parse(R"({"schema_version": 1, "Hurst": 0.5})")), ParseError);
  EXPECT_THROW(io::parse_scenario(io::json::parse(R"({"schema_version": 1, "mu": "cos"})")), ParseError);
  EXPECT_THROW(io::parse_scenario(io::json::parse(R"({"schema_version": 1, "truth_grid": 100})")), ParseError);
}

TEST(Evaluate, PerfectFitHasZeroErrorsAndNoRatios) {
  MfbmSpec spec;
  const auto truth_e = true_eigen_elements(spec, 3);
  const io::EigenTable truth{truth_e.grid, truth_e.eigenvalues, truth_e.eigenfunctions};
  io::FitSummary fit{truth_e.grid, truth_e.eigenvalues, truth_e.eigenfunctions, {{0.1, truth}}};
  const auto m = io::evaluate(fit, 0.1, truth);
  ASSERT_EQ(m.size(), 3u);
  for (const auto& e : m) {
    EXPECT_EQ(e.lambda_error, 0.0);
    EXPECT_EQ(e.psi_error, 0.0);
    EXPECT_FALSE(e.ratio_lambda.has_value());
    EXPECT_FALSE(e.ratio_psi.has_value());
  }
  const auto j = io::metrics_to_json(m, 0.1);
  EXPECT_EQ(j["elements"][0]["ratio_psi"], "NA");
  EXPECT_THROW((void)io::evaluate(fit, 0.2, truth), InfeasibleError);
}

TEST(Tables, FormatAndQuantiles) {
  EXPECT_EQ(io::format_number(0.1), "0.10000000000000001");
  EXPECT_EQ(std::stod(io::format_number(1.0 / 3.0)), 1.0 / 3.0);
  EXPECT_EQ(io::format_number(std::nan("")), "NA");
  EXPECT_EQ(io::format_number(-INFINITY), "-inf");
  const std::vector<double> v{1, 2, 3, 4};
  EXPECT_DOUBLE_EQ(io::quantile_sorted(v, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(io::quantile_sorted(v, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(io::quantile_sorted(v, 1.0), 4.0);
  EXPECT_DOUBLE_EQ(io::quantile_sorted(v, 0.25), 1.75);
  EXPECT_TRUE(std::isnan(io::quantile_sorted({}, 0.5)));
}

TEST(Cli, SimulateFitEvalEndToEnd) {
  TempDir dir;
  io::write_file(dir / "scenario.json", small_scenario);
  io::write_file(dir / "config.json", small_config);
  ASSERT_EQ(run({"simulate", "--scenario", dir / "scenario.json", "--out", dir / "data.jsonl", "--seed", "3"}), 0);
  ASSERT_TRUE(fs::exists(dir / "data.jsonl.truth.json"));
  ASSERT_EQ(run({"fit", "--data", dir / "data.jsonl", "--config", dir / "config.json", "--out", dir / "fit.json",
                 "--timing-out", dir / "timing.json"}),
            0);
  ASSERT_EQ(run({"eval", "--fit", dir / "fit.json", "--truth", dir / "data.jsonl.truth.json", "--baseline-h", "0.05",
                 "--out", dir / "metrics.json"}),
            0);
  const auto metrics = io::parse_json(io::read_file(dir / "metrics.json"), "metrics");
  EXPECT_EQ(metrics["elements"].size(), 3u);
  EXPECT_EQ(metrics["baseline_h"], 0.05);
  const auto fit = io::parse_json(io::read_file(dir / "fit.json"), "fit");
  EXPECT_EQ(fit["h_lambda"].size(), 3u);
  EXPECT_FALSE(fit.contains("timing"));
  EXPECT_TRUE(io::parse_json(io::read_file(dir / "timing.json"), "timing").contains("total"));

  // same seed, same bytes; a fit is a pure function of its inputs
  ASSERT_EQ(run({"simulate", "--scenario", dir / "scenario.json", "--out", dir / "again.jsonl", "--seed", "3",
                 "--threads", "4", "--truth-out", dir / "t2.json"}),
            0);
  EXPECT_EQ(io::read_file(dir / "again.jsonl"), io::read_file(dir / "data.jsonl"));
  ASSERT_EQ(run({"fit", "--data", dir / "again.jsonl", "--config", dir / "config.json", "--out", dir / "fit2.json"}), 0);
  EXPECT_EQ(io::read_file(dir / "fit2.json"), io::read_file(dir / "fit.json"));
}

TEST(Cli, ExitCodes) {
  TempDir dir;
  std::string err;
  EXPECT_EQ(run({}, &err), 2);
  EXPECT_EQ(run({"fit", "--data", dir / "x.jsonl"}, &err), 2);
  EXPECT_EQ(run({"frobnicate"}, &err), 2);
  EXPECT_EQ(run({"fit", "--data", dir / "missing.jsonl", "--out", dir / "o.json"}, &err), 2);

  io::write_file(dir / "bad.jsonl", "{\"id\": 1, \"t\": [0.1], \"y\": [1]}\n{broken\n");
  EXPECT_EQ(run({"fit", "--data", dir / "bad.jsonl", "--out", dir / "o.json"}, &err), 2);
  EXPECT_NE(err.find("line 2"), std::string::npos) << err;

  io::write_file(dir / "scenario.json", small_scenario);
  io::write_file(dir / "config.json", small_config);
  ASSERT_EQ(run({"simulate", "--scenario", dir / "scenario.json", "--out", dir / "d.jsonl"}), 0);
  ASSERT_EQ(run({"fit", "--data", dir / "d.jsonl", "--config", dir / "config.json", "--out", dir / "f.json"}), 0);
  EXPECT_EQ(run({"eval", "--fit", dir / "f.json", "--truth", dir / "d.jsonl.truth.json", "--baseline-h", "0.3",
                 "--out", dir / "m.json"},
                &err),
            3);
  EXPECT_NE(err.find("baseline"), std::string::npos);

  // every bandwidth is below half the common spacing
  io::write_file(dir / "common.json", R"({"schema_version": 1, "design": "common", "m": 50, "N": 10})");
  io::write_file(dir / "narrow.json", R"({"schema_version": 1, "J": 2, "K0": 3, "h_grid_min": 0.001, "h_grid_max": 0.005})");
  ASSERT_EQ(run({"simulate", "--scenario", dir / "common.json", "--out", dir / "c.jsonl"}), 0);
  EXPECT_EQ(run({"fit", "--data", dir / "c.jsonl", "--config", dir / "narrow.json", "--out", dir / "cf.json"}, &err), 3);
}

TEST(Cli, BinaryRuns) {
  TempDir dir;
  io::write_file(dir / "scenario.json", small_scenario);
  const std::string cmd = std::string(AFPCA_CLI_PATH) + " simulate --scenario " + (dir / "scenario.json") +
                          " --out " + (dir / "d.jsonl") + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  ASSERT_TRUE(WIFEXITED(status));
  EXPECT_EQ(WEXITSTATUS(status), 0);
  const int bad = std::system((std::string(AFPCA_CLI_PATH) + " simulate > /dev/null 2>&1").c_str());
  EXPECT_EQ(WEXITSTATUS(bad), 2);
}

TEST(Bench, ThreadCountDoesNotChangeTables) {
  const auto sc = io::parse_scenario(io::json::parse(small_scenario));
  const auto cfg = io::parse_config(io::json::parse(small_config));
  BenchOptions one{3, 11, 1, 0.1}, many{3, 11, 3, 0.1};
  const auto a = format_bench(run_bench(sc, cfg, one), one);
  const auto b = format_bench(run_bench(sc, cfg, many), many);
  EXPECT_EQ(a.replications, b.replications);
  EXPECT_EQ(a.quantiles, b.quantiles);
  EXPECT_EQ(a.boxplot, b.boxplot);
  EXPECT_EQ(a.summary, b.summary);
  const auto summary = io::json::parse(a.summary);
  EXPECT_EQ(summary["replications"], 3);
  EXPECT_EQ(summary["failed_replications"], 0);
  EXPECT_NE(a.quantiles.find("\n1,lambda_error,3,"), std::string::npos);

  TempDir dir;
  write_bench(a, dir / "bench");
  for (const char* f : {"replications.csv", "quantiles.csv", "boxplot.csv", "summary.json", "timing.csv"})
    EXPECT_TRUE(fs::exists(dir / (std::string("bench/") + f))) << f;
}

TEST(Bench, ReplicationSeedsDiffer) {
  EXPECT_NE(replication_seed(0, 0), replication_seed(0, 1));
  EXPECT_EQ(replication_seed(5, 2), replication_seed(5, 2));
  EXPECT_NE(replication_seed(5, 2), replication_seed(6, 2));
}
