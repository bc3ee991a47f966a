#pragma once

// Monte Carlo runner for the ρ sweep (control cost and ARX null-space angle)
// and the N_train sweep (LS / IV / ARX null-space angles).

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "ddpc/control.hpp"
#include "ddpc/experiments/config.hpp"
#include "ddpc/experiments/plot.hpp"
#include "ddpc/kalman.hpp"
#include "ddpc/predictors/arx.hpp"
#include "ddpc/predictors/innovation.hpp"
#include "ddpc/predictors/iv.hpp"
#include "ddpc/predictors/spc.hpp"
#include "ddpc/random.hpp"

namespace ddpc::experiments {

struct TrialResult {
  Index sweep_value = 0;
  LoopMode mode = LoopMode::Unknown;
  std::string method;
  Index trial = 0;
  std::optional<double> J_total;
  std::optional<double> angle;
  bool ok = true;
  std::string message;
};

struct SummaryRow {
  Index sweep_value = 0;
  LoopMode mode = LoopMode::Unknown;
  std::string method;
  Index n_ok = 0;
  Index n_failed = 0;
  std::optional<double> mean_J, se_J, mean_angle, se_angle;
};

struct RunOutput {
  std::string sweep_variable;
  std::vector<TrialResult> rows;
  std::vector<SummaryRow> summary;
};

/// Stream purposes inside one trial.
enum class Stream : std::uint64_t { TrainReference = 1, TrainNoise, WarmupReference, WarmupNoise, TestNoise, TestReference };

inline std::uint64_t trial_key(std::uint64_t master, Index trial, Index sweep_value, LoopMode mode, Stream s) {
  return stream_key(master, {static_cast<std::uint64_t>(trial), static_cast<std::uint64_t>(sweep_value),
                             static_cast<std::uint64_t>(mode), static_cast<std::uint64_t>(s)});
}

/// Runs tasks on `jobs` threads; results keep task order.
template <class R>
std::vector<R> run_pool(const std::vector<std::function<R()>>& tasks, int jobs) {
  std::vector<R> out(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) out[i] = tasks[i]();
  };
  const int n = std::max(1, std::min<int>(jobs, static_cast<int>(tasks.size())));
  std::vector<std::thread> threads;
  for (int k = 1; k < n; ++k) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();
  return out;
}

// ---------------------------------------------------------------------------
// Data generation

/// Training trajectory of length T under the configured law (u = r open loop,
/// u = gain (r - y) closed loop), from x0 = 0.
inline Trajectory make_training(const ExperimentConfig& c, LoopMode mode, Index T, std::uint64_t ref_key,
                                std::uint64_t noise_key) {
  SignalSpec spec = c.train_signal;
  spec.length = T;
  const Vector r = generate_signal(spec, ref_key);
  const Vector x0 = Vector::Zero(c.system.n());
  if (mode == LoopMode::Closed) return simulate_closed_loop(c.system, c.feedback_gain, r, x0, noise_key);
  if (c.system.n_u() != 1) throw ConfigError("open-loop training with a scalar reference needs n_u = 1");
  return simulate_open_loop(c.system, Matrix(r.transpose()), x0, noise_key);
}

// ---------------------------------------------------------------------------
// ρ sweep

inline std::vector<TrialResult> fig1_trial(const ExperimentConfig& c, const KalmanModel& km, LoopMode mode, Index trial) {
  const std::uint64_t M = c.master_seed;
  std::vector<TrialResult> rows;
  auto row = [&](Index rho, const std::string& method) {
    TrialResult r;
    r.sweep_value = rho;
    r.mode = mode;
    r.method = method;
    r.trial = trial;
    return r;
  };

  Trajectory train, warmup;
  Matrix r_test;
  try {
    train = make_training(c, mode, c.N_train, trial_key(M, trial, 0, mode, Stream::TrainReference),
                          trial_key(M, trial, 0, mode, Stream::TrainNoise));
    SignalSpec wspec = c.warmup_reference;
    wspec.length = c.warmup_length;
    // warm-up uses its own reference, same feedback law as training
    const Vector wref = generate_signal(wspec, trial_key(M, trial, 0, mode, Stream::WarmupReference));
    const Vector x0 = Vector::Zero(c.system.n());
    warmup = mode == LoopMode::Closed
                 ? simulate_closed_loop(c.system, c.feedback_gain, wref, x0, trial_key(M, trial, 0, mode, Stream::WarmupNoise))
                 : simulate_open_loop(c.system, Matrix(wref.transpose()), x0, trial_key(M, trial, 0, mode, Stream::WarmupNoise));
    SignalSpec tspec = c.test_reference;
    tspec.length = c.N_test;
    r_test = generate_signal(tspec, trial_key(M, trial, 0, mode, Stream::TestReference)).transpose();
  } catch (const Error& e) {
    for (Index rho : c.grid)
      for (const MethodSpec& m : c.methods) {
        TrialResult r = row(rho, m.name);
        r.ok = false;
        r.message = std::string("data generation: ") + e.what();
        rows.push_back(r);
      }
    return rows;
  }
  const std::uint64_t test_seed = trial_key(M, trial, 0, mode, Stream::TestNoise);

  // ρ-independent methods run once and are reported at every grid point
  std::map<std::string, TrialResult> fixed;
  for (const MethodSpec& m : c.methods) {
    if (uses_arx(m.kind)) continue;
    TrialResult r = row(0, m.name);
    try {
      const std::optional<KalmanModel> kmo = m.kind == PredictorKind::SSKF ? std::optional<KalmanModel>(km) : std::nullopt;
      Hyperparameters hp = m.hp;
      if (m.kind == PredictorKind::IVDeePC)
        hp.instrument = (c.instrument == "past" || (c.instrument == "auto" && mode == LoopMode::Closed))
                            ? InstrumentKind::PastData
                            : InstrumentKind::Phi;
      const PredictorModel pred = PredictorModel::fit(m.kind, train, c.Lp, c.Lf, hp, kmo);
      r.J_total = run_receding_horizon(c.system, pred, c.cost, r_test, warmup, test_seed).J_total;
    } catch (const Error& e) {
      r.ok = false;
      r.message = e.what();
    }
    fixed[m.name] = r;
  }

  for (Index rho : c.grid) {
    std::optional<double> angle;
    std::string angle_err;
    try {
      const ArxModel arx = fit_arx(train, rho, c.arx_include_lag0);
      const NullspaceEstimate est = arx_nullspace(arx, train, c.Lp, c.Lf).ns;
      const NullspaceEstimate ref =
          true_innovation_nullspace(km, train, c.Lp, c.Lf, Vector::Zero(c.system.n()), rho);
      angle = largest_angle(est, ref);
    } catch (const Error& e) {
      angle_err = e.what();
    }
    for (const MethodSpec& m : c.methods) {
      if (!uses_arx(m.kind)) {
        TrialResult r = fixed[m.name];
        r.sweep_value = rho;
        rows.push_back(r);
        continue;
      }
      TrialResult r = row(rho, m.name);
      try {
        Hyperparameters hp = m.hp;
        hp.arx_order = rho;
        const PredictorModel pred = PredictorModel::fit(m.kind, train, c.Lp, c.Lf, hp);
        r.J_total = run_receding_horizon(c.system, pred, c.cost, r_test, warmup, test_seed).J_total;
        r.angle = angle;
        if (!angle) r.message = "angle: " + angle_err;
      } catch (const Error& e) {
        r.ok = false;
        r.message = e.what();
      }
      rows.push_back(r);
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------
// N_train sweep

inline std::vector<TrialResult> fig2_trial(const ExperimentConfig& c, const KalmanModel& km, LoopMode mode, Index N,
                                           Index trial) {
  const std::uint64_t M = c.master_seed;
  std::vector<TrialResult> rows;
  for (const MethodSpec& m : c.methods) {
    TrialResult r;
    r.sweep_value = N;
    r.mode = mode;
    r.method = m.name;
    r.trial = trial;
    rows.push_back(r);
  }
  auto fail_all = [&](const std::string& msg) {
    for (TrialResult& r : rows) {
      r.ok = false;
      r.message = msg;
    }
  };
  const Index start = c.arx_order;
  Trajectory train;
  NullspaceEstimate ref;
  HankelSet h;
  try {
    train = make_training(c, mode, N, trial_key(M, trial, N, mode, Stream::TrainReference),
                          trial_key(M, trial, N, mode, Stream::TrainNoise));
    ref = true_innovation_nullspace(km, train, c.Lp, c.Lf, Vector::Zero(c.system.n()), start);
    h = build_hankel_set(train.slice(start, N), c.Lp, c.Lf);
  } catch (const Error& e) {
    fail_all(std::string("data generation: ") + e.what());
    return rows;
  }
  for (std::size_t k = 0; k < c.methods.size(); ++k) {
    const MethodSpec& m = c.methods[k];
    try {
      NullspaceEstimate est;
      switch (m.ns_method) {
        case NullspaceMethod::LS: est = ls_residual_hankel(h).ns; break;
        case NullspaceMethod::IV: {
          const bool past = c.instrument == "past" || (c.instrument == "auto" && mode == LoopMode::Closed);
          est = iv_nullspace(h, make_instrument(h, past ? InstrumentKind::PastData : InstrumentKind::Phi));
          break;
        }
        case NullspaceMethod::ARX:
          est = arx_nullspace(fit_arx(train, c.arx_order, m.hp.include_lag0), train, c.Lp, c.Lf).ns;
          break;
        default: throw ConfigError("fig2: unsupported method " + m.name);
      }
      rows[k].angle = largest_angle(est, ref);
    } catch (const Error& e) {
      rows[k].ok = false;
      rows[k].message = e.what();
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Aggregation

inline std::vector<SummaryRow> summarize(const std::vector<TrialResult>& rows) {
  // keep first-appearance order of (sweep value, mode, method)
  std::vector<std::tuple<Index, LoopMode, std::string>> keys;
  std::map<std::tuple<Index, int, std::string>, std::vector<const TrialResult*>> groups;
  for (const TrialResult& r : rows) {
    const auto k = std::make_tuple(r.sweep_value, static_cast<int>(r.mode), r.method);
    auto it = groups.find(k);
    if (it == groups.end()) {
      keys.emplace_back(r.sweep_value, r.mode, r.method);
      it = groups.emplace(k, std::vector<const TrialResult*>{}).first;
    }
    it->second.push_back(&r);
  }
  auto stats = [](const std::vector<double>& v, std::optional<double>& mean, std::optional<double>& se) {
    if (v.empty()) return;
    double s = 0.0;
    for (double x : v) s += x;
    const double m = s / static_cast<double>(v.size());
    mean = m;
    if (v.size() < 2) return;
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    se = std::sqrt(ss / static_cast<double>(v.size() - 1)) / std::sqrt(static_cast<double>(v.size()));
  };
  std::vector<SummaryRow> out;
  for (const auto& [value, mode, method] : keys) {
    SummaryRow s;
    s.sweep_value = value;
    s.mode = mode;
    s.method = method;
    std::vector<double> J, A;
    for (const TrialResult* r : groups[std::make_tuple(value, static_cast<int>(mode), method)]) {
      if (!r->ok) {
        ++s.n_failed;
        continue;
      }
      ++s.n_ok;
      if (r->J_total) J.push_back(*r->J_total);
      if (r->angle) A.push_back(*r->angle);
    }
    stats(J, s.mean_J, s.se_J);
    stats(A, s.mean_angle, s.se_angle);
    out.push_back(std::move(s));
  }
  return out;
}

/// Runs the configured sweep. Trials are independent tasks; output order is
/// (grid point, loop mode, method, trial) whatever the number of jobs.
inline RunOutput run_experiment(const ExperimentConfig& c, int jobs = 1) {
  const KalmanModel km = solve_dare(c.system);
  RunOutput out;
  out.sweep_variable = c.sweep_variable;
  std::vector<std::function<std::vector<TrialResult>()>> tasks;
  if (c.experiment == ExperimentKind::Fig1) {
    for (LoopMode mode : c.loop_modes)
      for (Index i = 0; i < c.N_MC; ++i) tasks.push_back([&, mode, i] { return fig1_trial(c, km, mode, i); });
  } else {
    for (Index N : c.grid)
      for (LoopMode mode : c.loop_modes)
        for (Index i = 0; i < c.N_MC; ++i) tasks.push_back([&, mode, N, i] { return fig2_trial(c, km, mode, N, i); });
  }
  const auto results = run_pool(tasks, jobs);
  for (const auto& r : results) out.rows.insert(out.rows.end(), r.begin(), r.end());

  auto pos = [](const auto& v, const auto& x) { return std::find(v.begin(), v.end(), x) - v.begin(); };
  std::vector<std::string> names;
  for (const MethodSpec& m : c.methods) names.push_back(m.name);
  std::stable_sort(out.rows.begin(), out.rows.end(), [&](const TrialResult& a, const TrialResult& b) {
    return std::make_tuple(pos(c.grid, a.sweep_value), pos(c.loop_modes, a.mode), pos(names, a.method), a.trial) <
           std::make_tuple(pos(c.grid, b.sweep_value), pos(c.loop_modes, b.mode), pos(names, b.method), b.trial);
  });
  out.summary = summarize(out.rows);
  return out;
}

inline RunOutput run_fig1(const ExperimentConfig& c, int jobs = 1) {
  if (c.experiment != ExperimentKind::Fig1) throw ConfigError("run_fig1: config is not a rho sweep");
  return run_experiment(c, jobs);
}

inline RunOutput run_fig2(const ExperimentConfig& c, int jobs = 1) {
  if (c.experiment != ExperimentKind::Fig2) throw ConfigError("run_fig2: config is not an N_train sweep");
  return run_experiment(c, jobs);
}

// ---------------------------------------------------------------------------
// CSV

namespace detail {

inline std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch == '\n' ? ' ' : ch;
  }
  return out + "\"";
}

inline std::string num(const std::optional<double>& v) {
  if (!v) return "";
  std::ostringstream o;
  o.precision(17);
  o << *v;
  return o.str();
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace detail

inline const char* results_header() { return "sweep_variable,sweep_value,loop_mode,method,trial,J_total,angle,status,message"; }

inline void write_results_csv(std::ostream& os, const RunOutput& run) {
  os << results_header() << '\n';
  for (const TrialResult& r : run.rows)
    os << run.sweep_variable << ',' << r.sweep_value << ',' << to_string(r.mode) << ',' << r.method << ',' << r.trial
       << ',' << detail::num(r.J_total) << ',' << detail::num(r.angle) << ',' << (r.ok ? "ok" : "failed") << ','
       << detail::csv_quote(r.message) << '\n';
}

inline void write_summary_csv(std::ostream& os, const RunOutput& run) {
  os << "sweep_variable,sweep_value,loop_mode,method,n_ok,n_failed,mean_J_total,se_J_total,mean_angle,se_angle\n";
  for (const SummaryRow& s : run.summary)
    os << run.sweep_variable << ',' << s.sweep_value << ',' << to_string(s.mode) << ',' << s.method << ',' << s.n_ok
       << ',' << s.n_failed << ',' << detail::num(s.mean_J) << ',' << detail::num(s.se_J) << ','
       << detail::num(s.mean_angle) << ',' << detail::num(s.se_angle) << '\n';
}

inline RunOutput read_results_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != results_header())
    throw ConfigError("results csv: unexpected header (expected '" + std::string(results_header()) + "')");
  RunOutput run;
  Index lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != 9) throw ConfigError("results csv: line " + std::to_string(lineno) + ": expected 9 fields");
    try {
      run.sweep_variable = f[0];
      TrialResult r;
      r.sweep_value = std::stoll(f[1]);
      r.mode = f[2] == "open" ? LoopMode::Open : f[2] == "closed" ? LoopMode::Closed : LoopMode::Unknown;
      r.method = f[3];
      r.trial = std::stoll(f[4]);
      if (!f[5].empty()) r.J_total = std::stod(f[5]);
      if (!f[6].empty()) r.angle = std::stod(f[6]);
      r.ok = f[7] == "ok";
      r.message = f[8];
      run.rows.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw ConfigError("results csv: line " + std::to_string(lineno) + ": bad number");
    }
  }
  run.summary = summarize(run.rows);
  return run;
}

// ---------------------------------------------------------------------------
// Plot helpers

/// One series per (mode, method) of the chosen metric ("J_total" or "angle").
inline std::vector<PlotSeries> series_from_summary(const std::vector<SummaryRow>& summary, const std::string& metric) {
  if (metric != "J_total" && metric != "angle") throw ConfigError("plot metric must be J_total or angle");
  std::vector<PlotSeries> out;
  bool several_modes = false;
  for (const SummaryRow& s : summary)
    if (s.mode != summary.front().mode) several_modes = true;
  for (const SummaryRow& s : summary) {
    const auto& mean = metric == "J_total" ? s.mean_J : s.mean_angle;
    const auto& se = metric == "J_total" ? s.se_J : s.se_angle;
    if (!mean) continue;
    const std::string name = several_modes ? std::string(to_string(s.mode)) + " " + s.method : s.method;
    auto it = std::find_if(out.begin(), out.end(), [&](const PlotSeries& p) { return p.name == name; });
    if (it == out.end()) {
      out.push_back(PlotSeries{name, {}, {}, {}});
      it = out.end() - 1;
    }
    it->x.push_back(static_cast<double>(s.sweep_value));
    it->y.push_back(*mean);
    it->err.push_back(se ? 2.0 * *se : 0.0);
  }
  return out;
}

/// Writes results.csv, summary.csv, config.echo and the plot(s) into `dir`.
inline void write_run_artifacts(const std::filesystem::path& dir, const ExperimentConfig& c, const RunOutput& run) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream f(dir / name, std::ios::binary);
    if (!f) throw Error(std::string("cannot write ") + (dir / name).string());
    return f;
  };
  {
    auto f = open("results.csv");
    write_results_csv(f, run);
  }
  {
    auto f = open("summary.csv");
    write_summary_csv(f, run);
  }
  {
    auto f = open("config.echo");
    f << c.effective.dump(2) << '\n';
  }
  PlotSpec spec;
  if (c.experiment == ExperimentKind::Fig1) {
    spec.title = "Total control cost vs ARX order";
    spec.x_label = "rho";
    spec.y_label = "mean J_total";
    const auto cost_series = series_from_summary(run.summary, "J_total");
    if (!cost_series.empty()) {
      auto f = open("plot.svg");
      f << emit_plot(cost_series, spec);
    }
    const auto angle_series = series_from_summary(run.summary, "angle");
    if (!angle_series.empty()) {
      PlotSpec a = spec;
      a.title = "Largest principal angle, ARX vs true null(E_f)";
      a.y_label = "angle [rad]";
      auto f = open("plot_angle.svg");
      f << emit_plot(angle_series, a);
    }
  } else {
    spec.title = "Largest principal angle vs training length";
    spec.x_label = "N_train";
    spec.y_label = "angle [rad]";
    spec.log_y = true;
    const auto series = series_from_summary(run.summary, "angle");
    if (!series.empty()) {
      auto f = open("plot.svg");
      f << emit_plot(series, spec);
    }
  }
}

}  // namespace ddpc::experiments
