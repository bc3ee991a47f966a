// ddpc: run the Monte Carlo sweeps, validate configs, re-plot results.
//
//   ddpc run <config.json> [--out DIR] [--jobs N] [--profile smoke|full]
//   ddpc fig1 [--preset paper-sec5] [--out DIR] [--jobs N] [--profile smoke|full]
//   ddpc fig2 [--preset paper-sec5] [--out DIR] [--jobs N] [--profile smoke|full]
//   ddpc validate <config.json> [--profile NAME]
//   ddpc plot <results.csv> --spec <plotspec.json> [--out FILE]
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or config error.
// DDPC_OUT_DIR sets the default output directory (else ./results).

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "ddpc/experiments/config.hpp"
#include "ddpc/experiments/plot.hpp"
#include "ddpc/experiments/runner.hpp"

namespace ex = ddpc::experiments;

namespace {

std::string default_out_dir() {
  const char* env = std::getenv("DDPC_OUT_DIR");
  return env && *env ? env : "results";
}

int run_and_write(const ex::ExperimentConfig& cfg, const std::string& out, int jobs) {
  const ex::RunOutput run = ex::run_experiment(cfg, jobs);
  ex::write_run_artifacts(out, cfg, run);
  ddpc::Index failed = 0;
  for (const auto& r : run.rows) failed += r.ok ? 0 : 1;
  std::cout << "wrote " << run.rows.size() << " rows to " << out << "/results.csv";
  if (failed) std::cout << " (" << failed << " failed trials recorded)";
  std::cout << '\n';
  for (const auto& s : run.summary) {
    std::cout << "  " << run.sweep_variable << '=' << s.sweep_value << ' ' << ddpc::to_string(s.mode) << ' '
              << s.method << ':';
    if (s.mean_J) std::cout << " J=" << *s.mean_J;
    if (s.mean_angle) std::cout << " angle=" << *s.mean_angle;
    if (s.n_failed) std::cout << " failed=" << s.n_failed;
    std::cout << '\n';
  }
  return 0;
}

ex::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ddpc::ConfigError(path + ": cannot open");
  std::stringstream ss;
  ss << in.rdbuf();
  return ex::parse_json_text(ss.str(), path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Innovation null-space DDPC experiments"};
  app.require_subcommand(1);

  std::string config_path, out_dir = default_out_dir(), profile, preset = "paper-sec5";
  std::string results_path, spec_path, plot_out;
  int jobs = 1;

  auto* run = app.add_subcommand("run", "run an experiment config");
  run->add_option("config", config_path, "config JSON")->required();
  run->add_option("--out", out_dir, "output directory");
  run->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
  run->add_option("--profile", profile, "profile overlay (smoke, full)");

  auto* fig1 = app.add_subcommand("fig1", "ARX order sweep with the built-in preset");
  auto* fig2 = app.add_subcommand("fig2", "training length sweep with the built-in preset");
  for (auto* sc : {fig1, fig2}) {
    sc->add_option("--preset", preset, "preset family")->check(CLI::IsMember({"paper-sec5"}));
    sc->add_option("--out", out_dir, "output directory");
    sc->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
    sc->add_option("--profile", profile, "profile overlay (smoke, full)");
  }

  auto* validate = app.add_subcommand("validate", "parse and validate a config");
  validate->add_option("config", config_path, "config JSON")->required();
  validate->add_option("--profile", profile, "profile overlay");

  auto* plot = app.add_subcommand("plot", "plot a results.csv");
  plot->add_option("results", results_path, "results.csv")->required();
  plot->add_option("--spec", spec_path, "plot spec JSON")->required();
  plot->add_option("--out", plot_out, "output SVG (default: next to results)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*run) return run_and_write(ex::load_config(config_path, profile), out_dir, jobs);
    if (*fig1 || *fig2) {
      ex::json doc = {{"preset", preset + (*fig1 ? "-fig1" : "-fig2")}};
      return run_and_write(ex::parse_config(doc, profile), out_dir, jobs);
    }
    if (*validate) {
      const ex::ExperimentConfig cfg = ex::load_config(config_path, profile);
      std::cout << config_path << ": ok (" << ex::to_string(cfg.experiment) << ", " << cfg.grid.size()
                << " grid points, " << cfg.methods.size() << " methods, N_MC=" << cfg.N_MC << ")\n";
      return 0;
    }
    if (*plot) {
      std::ifstream in(results_path);
      if (!in) throw ddpc::ConfigError(results_path + ": cannot open");
      const ex::RunOutput runout = ex::read_results_csv(in);
      const ex::json spec = read_json_file(spec_path);
      if (!spec.is_object()) throw ddpc::ConfigError(spec_path + ": expected an object");
      ex::PlotSpec ps;
      const std::string metric = spec.value("metric", std::string("angle"));
      ps.title = spec.value("title", std::string());
      ps.x_label = spec.value("x_label", runout.sweep_variable);
      ps.y_label = spec.value("y_label", metric);
      ps.log_y = spec.value("log_y", false);
      if (spec.contains("y_min")) ps.y_min = spec["y_min"].get<double>();
      if (spec.contains("y_max")) ps.y_max = spec["y_max"].get<double>();
      const std::string svg = ex::emit_plot(ex::series_from_summary(runout.summary, metric), ps);
      const std::string target =
          plot_out.empty() ? (std::filesystem::path(results_path).parent_path() / "plot.svg").string() : plot_out;
      std::ofstream f(target, std::ios::binary);
      if (!f) throw ddpc::Error("cannot write " + target);
      f << svg;
      std::cout << "wrote " << target << '\n';
      return 0;
    }
  } catch (const ddpc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const ex::json::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
