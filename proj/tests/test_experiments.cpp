#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <regex>
#include <sstream>

#include "ddpc/experiments/config.hpp"
#include "ddpc/experiments/plot.hpp"
#include "ddpc/experiments/runner.hpp"

using namespace ddpc;
using namespace ddpc::experiments;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("ddpc_test_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(DDPC_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string expect_config_error(const json& doc) {
  try {
    parse_config(doc);
  } catch (const ConfigError& e) {
    return e.what();
  }
  ADD_FAILURE() << "expected ConfigError for " << doc.dump();
  return {};
}

ExperimentConfig smoke_config() { return load_config(std::string(DDPC_TEST_DATA_DIR) + "/fig1_smoke.json"); }

std::string results_text(const RunOutput& run) {
  std::ostringstream os;
  write_results_csv(os, run);
  return os.str();
}

std::vector<std::pair<double, double>> polyline_points(const std::string& svg) {
  std::vector<std::pair<double, double>> pts;
  const std::regex poly("<polyline[^>]*points=\"([^\"]*)\"");
  for (auto it = std::sregex_iterator(svg.begin(), svg.end(), poly); it != std::sregex_iterator(); ++it) {
    std::istringstream ps((*it)[1].str());
    std::string tok;
    while (ps >> tok) {
      const auto comma = tok.find(',');
      pts.emplace_back(std::stod(tok.substr(0, comma)), std::stod(tok.substr(comma + 1)));
    }
  }
  return pts;
}

}  // namespace

TEST(Presets, BenchmarkConstants) {
  const ExperimentConfig c = parse_config(json{{"preset", "paper-sec5-fig1"}});
  Matrix A(2, 2), B(2, 1), C(1, 2);
  A << 0.7326, -0.0861, 0.1722, 0.9909;
  B << 0.0609, 0.0064;
  C << 0.0, 1.4142;
  EXPECT_TRUE(c.system.A == A);
  EXPECT_TRUE(c.system.B == B);
  EXPECT_TRUE(c.system.C == C);
  EXPECT_EQ(c.system.D.norm(), 0.0);
  EXPECT_DOUBLE_EQ(c.system.sigma_w(0, 0), 5e-3 * 5e-3);
  EXPECT_DOUBLE_EQ(c.system.sigma_w(1, 1), 5e-3 * 5e-3);
  EXPECT_EQ(c.system.sigma_w(0, 1), 0.0);
  EXPECT_DOUBLE_EQ(c.system.sigma_v(0, 0), 2e-3 * 2e-3);
  EXPECT_EQ(c.Lp, 10);
  EXPECT_EQ(c.Lf, 15);
  EXPECT_EQ(c.cost.Q(0, 0), 1.0);
  EXPECT_EQ(c.cost.R(0, 0), 0.01);
  EXPECT_EQ(c.N_train, 200);
  EXPECT_EQ(c.N_test, 100);
  EXPECT_EQ(c.N_MC, 300);
  EXPECT_EQ(c.feedback_gain, 5.0);
  EXPECT_EQ(c.train_signal.kind, SignalKind::SquareWave);
  EXPECT_EQ(c.train_signal.period, 50);
  EXPECT_EQ(c.train_signal.amplitude, 2.0);
  EXPECT_EQ(c.train_signal.noise_variance, 0.01);
  EXPECT_EQ(c.test_reference.kind, SignalKind::Sinusoid);
  EXPECT_EQ(c.test_reference.period, c.N_test);
  EXPECT_EQ(c.test_reference.amplitude, 1.0);
  EXPECT_EQ(c.sweep_variable, "rho");
  EXPECT_EQ(c.grid.front(), 2);
  EXPECT_EQ(c.grid.back(), 30);
  ASSERT_EQ(c.loop_modes.size(), 1u);
  EXPECT_EQ(c.loop_modes[0], LoopMode::Closed);

  const ExperimentConfig f2 = parse_config(json{{"preset", "paper-sec5-fig2"}});
  EXPECT_EQ(f2.grid, (std::vector<Index>{100, 200, 400, 800}));
  EXPECT_EQ(f2.loop_modes.size(), 2u);
  EXPECT_EQ(f2.methods.size(), 3u);
}

TEST(Presets, SmokeProfileOverlay) {
  const ExperimentConfig c = parse_config(json{{"preset", "paper-sec5-fig1"}}, "smoke");
  EXPECT_EQ(c.N_MC, 20);
  EXPECT_EQ(c.Lp, 10);
  EXPECT_EQ(c.effective["profile"], "smoke");
  EXPECT_THROW(parse_config(json{{"preset", "paper-sec5-fig1"}}, "nope"), ConfigError);
  EXPECT_THROW(parse_config(json{{"preset", "other"}}), ConfigError);
}

TEST(ConfigValidation, ErrorsNameTheField) {
  EXPECT_NE(expect_config_error({{"preset", "paper-sec5-fig1"}, {"horizons", {{"Lp", 0}}}}).find("horizons.Lp"),
            std::string::npos);
  EXPECT_NE(expect_config_error({{"preset", "paper-sec5-fig1"}, {"sweep", {{"grid", json::array()}}}}).find("grid"),
            std::string::npos);
  EXPECT_NE(expect_config_error({{"preset", "paper-sec5-fig1"}, {"monte_carlo", {{"N_MC", 0}}}}).find("N_MC"),
            std::string::npos);
  EXPECT_NE(expect_config_error({{"preset", "paper-sec5-fig1"}, {"cost", {{"R", -1.0}}}}).find("cost"),
            std::string::npos);
  EXPECT_NE(expect_config_error({{"preset", "paper-sec5-fig1"}, {"sweep", {{"variable", "N_train"}}}})
                .find("sweep.variable"),
            std::string::npos);
  EXPECT_THROW(parse_config(json::array()), ConfigError);
}

TEST(ConfigValidation, JsonSyntaxErrorReportsLine) {
  try {
    parse_json_text("{\n  \"a\": 1,\n  oops\n}", "cfg.json");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("cfg.json:3"), std::string::npos) << e.what();
  }
}

TEST(Cli, ExitCodes) {
  const fs::path dir = scratch("cli_codes");
  std::ofstream(dir / "bad.json") << R"({"preset": "paper-sec5-fig1", "horizons": {"Lp": 0}})";
  std::ofstream(dir / "broken.json") << "{ not json";
  const std::string smoke = std::string(DDPC_TEST_DATA_DIR) + "/fig1_smoke.json";
  EXPECT_EQ(run_cli("validate " + smoke), 0);
  EXPECT_EQ(run_cli("validate " + (dir / "bad.json").string()), 2);
  EXPECT_EQ(run_cli("validate " + (dir / "broken.json").string()), 2);
  EXPECT_EQ(run_cli("validate " + (dir / "missing.json").string()), 2);
  EXPECT_EQ(run_cli("frobnicate"), 2);
  EXPECT_EQ(run_cli("run " + smoke + " --jobs 0"), 2);
}

TEST(Cli, RunWritesArtifacts) {
  const fs::path dir = scratch("cli_run");
  const std::string smoke = std::string(DDPC_TEST_DATA_DIR) + "/fig1_smoke.json";
  ASSERT_EQ(run_cli("run " + smoke + " --out " + (dir / "out").string() + " --jobs 2"), 0);
  for (const char* f : {"results.csv", "summary.csv", "config.echo", "plot.svg"})
    EXPECT_TRUE(fs::exists(dir / "out" / f)) << f;
  const json echo = json::parse(slurp(dir / "out" / "config.echo"));
  EXPECT_EQ(echo["monte_carlo"]["N_MC"], 3);
  EXPECT_EQ(echo["horizons"]["Lf"], 15);

  std::ofstream(dir / "spec.json") << R"({"metric": "J_total", "title": "replot", "log_y": true})";
  EXPECT_EQ(run_cli("plot " + (dir / "out" / "results.csv").string() + " --spec " + (dir / "spec.json").string() +
                    " --out " + (dir / "re.svg").string()),
            0);
  EXPECT_NE(slurp(dir / "re.svg").find("replot"), std::string::npos);
}

TEST(Runner, DeterministicAcrossJobs) {
  const ExperimentConfig c = smoke_config();
  const std::string a = results_text(run_experiment(c, 1));
  const std::string b = results_text(run_experiment(c, 4));
  const std::string again = results_text(run_experiment(c, 1));
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, again);
}

TEST(Runner, SeedsDependOnTrialPath) {
  EXPECT_EQ(trial_key(1, 3, 0, LoopMode::Open, Stream::TrainNoise),
            trial_key(1, 3, 0, LoopMode::Open, Stream::TrainNoise));
  EXPECT_NE(trial_key(1, 3, 0, LoopMode::Open, Stream::TrainNoise),
            trial_key(1, 4, 0, LoopMode::Open, Stream::TrainNoise));
  EXPECT_NE(trial_key(1, 3, 0, LoopMode::Open, Stream::TrainNoise),
            trial_key(1, 3, 0, LoopMode::Closed, Stream::TrainNoise));
  EXPECT_NE(trial_key(1, 3, 0, LoopMode::Open, Stream::TrainNoise),
            trial_key(1, 3, 0, LoopMode::Open, Stream::TestNoise));
}

TEST(Runner, Fig1RowsAndEquivalences) {
  const ExperimentConfig c = smoke_config();
  const RunOutput run = run_fig1(c, 2);
  EXPECT_EQ(run.rows.size(), c.grid.size() * c.methods.size() * static_cast<std::size_t>(c.N_MC));
  std::map<std::pair<Index, Index>, std::map<std::string, TrialResult>> by;
  for (const TrialResult& r : run.rows) {
    EXPECT_TRUE(r.ok) << r.message;
    by[{r.sweep_value, r.trial}][r.method] = r;
  }
  for (auto& [key, m] : by) {
    ASSERT_TRUE(m["InnoPre"].J_total && m["KFPre"].J_total && m["SSKF"].J_total);
    EXPECT_NEAR(*m["InnoPre"].J_total, *m["KFPre"].J_total, 1e-6 * (1 + *m["KFPre"].J_total));
    // SSKF ignores rho
    const Index trial = key.second;
    EXPECT_EQ(*m["SSKF"].J_total, *by[std::make_pair(c.grid.front(), trial)]["SSKF"].J_total);
    ASSERT_TRUE(m["InnoPre"].angle);
    EXPECT_GE(*m["InnoPre"].angle, 0.0);
    EXPECT_LE(*m["InnoPre"].angle, M_PI / 2 + 1e-12);
  }
  EXPECT_THROW(run_fig2(c), ConfigError);
}

TEST(Runner, SummaryMatchesRecomputationFromRows) {
  const RunOutput run = run_experiment(smoke_config(), 2);
  std::istringstream is(results_text(run));
  const RunOutput back = read_results_csv(is);
  ASSERT_EQ(back.rows.size(), run.rows.size());
  EXPECT_EQ(results_text(back), results_text(run));

  std::map<std::pair<Index, std::string>, std::vector<double>> J;
  for (const TrialResult& r : back.rows)
    if (r.ok && r.J_total) J[{r.sweep_value, r.method}].push_back(*r.J_total);
  ASSERT_EQ(run.summary.size(), J.size());
  for (const SummaryRow& s : run.summary) {
    const auto& v = J[{s.sweep_value, s.method}];
    double m = 0;
    for (double x : v) m += x;
    m /= double(v.size());
    double ss = 0;
    for (double x : v) ss += (x - m) * (x - m);
    const double se = std::sqrt(ss / double(v.size() - 1)) / std::sqrt(double(v.size()));
    ASSERT_TRUE(s.mean_J && s.se_J);
    EXPECT_NEAR(*s.mean_J, m, 1e-9 * (1 + std::abs(m)));
    EXPECT_NEAR(*s.se_J, se, 1e-9 * (1 + se));
    EXPECT_EQ(s.n_ok, static_cast<Index>(v.size()));
  }
}

TEST(Runner, FailedTrialsAreCountedAndExcluded) {
  std::vector<TrialResult> rows(3);
  for (int i = 0; i < 3; ++i) {
    rows[i].sweep_value = 5;
    rows[i].method = "X";
    rows[i].trial = i;
    rows[i].J_total = double(i);
  }
  rows[2].ok = false;
  rows[2].J_total.reset();
  const auto s = summarize(rows);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s[0].n_ok, 2);
  EXPECT_EQ(s[0].n_failed, 1);
  EXPECT_DOUBLE_EQ(*s[0].mean_J, 0.5);
}

TEST(ResultsCsv, RejectsBadHeaderAndFields) {
  std::istringstream bad_header("a,b,c\n");
  EXPECT_THROW(read_results_csv(bad_header), ConfigError);
  std::istringstream bad_row(std::string(results_header()) + "\nrho,2,closed,SSKF\n");
  EXPECT_THROW(read_results_csv(bad_row), ConfigError);
}

TEST(Plot, TwoPointsOnePolyline) {
  const std::string svg = emit_plot({{"a", {1, 2}, {3, 4}, {}}}, PlotSpec{});
  std::size_t n = 0;
  for (std::size_t p = svg.find("<polyline"); p != std::string::npos; p = svg.find("<polyline", p + 1)) ++n;
  EXPECT_EQ(n, 1u);
  EXPECT_EQ(polyline_points(svg).size(), 2u);
  EXPECT_EQ(svg.find("<image"), std::string::npos);
  EXPECT_EQ(svg.find("href"), std::string::npos);
}

TEST(Plot, ValuesClampedToAxis) {
  PlotSpec spec;
  spec.y_min = 0.0;
  spec.y_max = 0.5;
  const std::string svg = emit_plot({{"angle", {1, 2, 3}, {0.1, 1.4, -0.3}, {0.05, 0.05, 0.05}}}, spec);
  // plot area spans y in [40, height - 50]
  for (const auto& [x, y] : polyline_points(svg)) {
    EXPECT_GE(y, 40.0);
    EXPECT_LE(y, spec.height - 50.0);
  }
}

TEST(Plot, EmptyTableIsDomainError) {
  EXPECT_THROW(emit_plot({}, PlotSpec{}), DomainError);
  EXPECT_THROW(emit_plot({{"a", {}, {}, {}}}, PlotSpec{}), DomainError);
  EXPECT_THROW(emit_plot({{"a", {1}, {1, 2}, {}}}, PlotSpec{}), DimensionError);
}

TEST(Plot, GoldenFile) {
  PlotSpec spec;
  spec.title = "tiny";
  spec.x_label = "rho";
  spec.y_label = "angle";
  spec.log_y = true;
  const std::vector<PlotSeries> table = {{"LS", {100, 200, 400}, {0.3, 0.2, 0.1}, {0.02, 0.01, 0.01}},
                                         {"IV", {100, 200, 400}, {0.25, 0.12, 0.05}, {}}};
  const std::string svg = emit_plot(table, spec);
  const fs::path golden = fs::path(DDPC_TEST_DATA_DIR) / "tiny_plot.svg";
  if (std::getenv("DDPC_UPDATE_GOLDEN")) std::ofstream(golden, std::ios::binary) << svg;
  ASSERT_TRUE(fs::exists(golden));
  EXPECT_EQ(svg, slurp(golden));
}
