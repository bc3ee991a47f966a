// Acceptance run: one PASS/FAIL line per criterion, exit 1 if any fails.
//
//   acceptance --cli <path to ddpc> --work <scratch dir> [--only N]

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "ddpc/ddpc.hpp"
#include "ddpc/experiments/config.hpp"
#include "ddpc/experiments/runner.hpp"

using namespace ddpc;
namespace ex = ddpc::experiments;
namespace fs = std::filesystem;

namespace {

constexpr Index kLp = 10;
constexpr Index kLf = 15;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string sci(double v) {
  std::ostringstream os;
  os.precision(3);
  os << std::scientific << v;
  return os.str();
}

Matrix gaussian(Index r, Index c, unsigned seed) {
  std::mt19937 gen(seed);
  std::normal_distribution<double> nd;
  Matrix m(r, c);
  for (Index j = 0; j < c; ++j)
    for (Index i = 0; i < r; ++i) m(i, j) = nd(gen);
  return m;
}

Trajectory open_loop(const SystemModel& s, Index T, unsigned seed, Vector x0 = Vector::Zero(2)) {
  return simulate_open_loop(s, gaussian(1, T, seed), x0, seed + 7919);
}

Trajectory closed_loop(const SystemModel& s, Index T, unsigned seed) {
  const Vector r = generate_signal({SignalKind::SquareWave, 50, 2.0, 0.01, T}, seed);
  return simulate_closed_loop(s, 5.0, r, Vector::Zero(2), seed + 7919);
}

double rel(const Vector& a, const Vector& b) { return (a - b).norm() / (1.0 + b.norm()); }

int jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

// --- 1 ---------------------------------------------------------------------

Outcome kffl_realization() {
  const SystemModel s = paper_sec5_system();
  const KalmanModel km = solve_dare(s);
  const Trajectory train = kalman_filter_pass(km, open_loop(s, 200, 101), Vector::Zero(2));
  const HankelSet h = build_hankel_set(train, kLp, kLf);
  const Index T = 3000;
  const Trajectory test = kalman_filter_pass(km, open_loop(s, T, 102), Vector::Zero(2));
  std::mt19937 gen(103);
  std::uniform_int_distribution<Index> pick(kLp + 50, T - kLf);
  double worst_ef = 0.0, worst_y = 0.0;
  bool ok = true;
  for (int k = 0; k < 100; ++k) {
    const Index t = pick(gen);
    const WindowData w = extract_window(test, t, kLp, kLf);
    const Vector g = kffl_min_norm_decision(h, w);
    const Vector y_kf = kalman_multistep_predict(km, w, Vector(test.xhat->col(t - kLp)));
    const double ef = (*h.Ef * g).norm() / (1 + h.Ef->norm());
    const double ey = (h.Yf * g - y_kf).norm() / (1 + y_kf.norm());
    worst_ef = std::max(worst_ef, ef);
    worst_y = std::max(worst_y, ey);
    ok = ok && ef <= 1e-6 && ey <= 1e-6;
  }
  return {ok, "max ||E_f g||/(1+||E_f||)=" + sci(worst_ef) + ", max ||Y_f g - yhat||/(1+||yhat||)=" + sci(worst_y)};
}

// --- 2 ---------------------------------------------------------------------

Outcome lq_identities() {
  const SystemModel s = paper_sec5_system();
  double worst_l = 0.0, worst_q = 0.0;
  for (unsigned k = 0; k < 20; ++k) {
    const HankelSet h = build_hankel_set(open_loop(s, 200, 200 + k), kLp, kLf);
    const GammaBlocks b = gamma_ddpc_factorize(h);
    const Matrix E = ls_residual_hankel(h).E_hat;
    const Matrix EEt = E * E.transpose();
    worst_l = std::max(worst_l, (b.L33 * b.L33.transpose() - EEt).norm() / EEt.norm());
    const Matrix phi = h.phi();
    const Matrix I_minus_pi = Matrix::Identity(h.n_cols, h.n_cols) - pinv(phi) * phi;
    worst_q = std::max(worst_q, (b.Q3.transpose() * b.Q3 - I_minus_pi).norm() / I_minus_pi.norm());
  }
  return {worst_l <= 1e-8 && worst_q <= 1e-8,
          "max rel L33 L33' vs E E' = " + sci(worst_l) + ", max rel Q3'Q3 vs I-Pi = " + sci(worst_q)};
}

// --- 3 ---------------------------------------------------------------------

Outcome predictor_equivalences() {
  const SystemModel s = paper_sec5_system();
  const CostWeights cost = CostWeights::scalar(1.0, 0.01);
  double ls_family = 0.0, inno_kf = 0.0, reg = 0.0;

  const Trajectory train = open_loop(s, 200, 301);
  const HankelSet h = build_hankel_set(train, kLp, kLf);
  const SpcModel spc = fit_spc(h);
  const IvModel iv = fit_iv(h, h.phi());
  const ProjRegModel pr = fit_projreg(h);
  const SplitModel sp = fit_split(h);
  const GammaBlocks gb = gamma_ddpc_factorize(h);
  const Trajectory test = open_loop(s, 400, 302);
  for (Index t = 30; t + kLf <= 400; t += 25) {
    WindowData w = extract_window(test, t, kLp, kLf);
    const Vector a = spc.predict(w);
    ls_family = std::max({ls_family, rel(deepc_pinv_predict(h, w), a), rel(iv.predict(w), a)});
    const Vector r = Vector::Constant(kLf, std::sin(0.1 * double(t)));
    for (int v = 0; v < 3; ++v) {
      const RegularizedSolution sol = v == 0   ? pr.solve(w, cost, r, 1e8)
                                      : v == 1 ? sp.solve(w, cost, r, 1.0, 1e8)
                                               : gamma_ddpc_solve(gb, w, cost, r, 1.0, 1e8);
      WindowData at = w;
      at.u_future = sol.u;
      reg = std::max(reg, (sol.y - spc.predict(at)).cwiseAbs().maxCoeff());
    }
  }

  const Trajectory ctrain = closed_loop(s, 400, 303);
  const ArxModel arx = fit_arx(ctrain, 10, false);
  const HankelSet ha = build_hankel_set(with_arx_innovations(arx, ctrain), kLp, kLf);
  const InnoPreModel inno = fit_inno_pre(ha, true);
  const KfPreModel kfp = fit_kf_pre(ha);
  const Trajectory ctest = closed_loop(s, 300, 304);
  for (Index t = 30; t + kLf <= 300; t += 10) {
    WindowData w = extract_window(ctest, t, kLp, kLf);
    auto [e, yh] = arx_window_innovations(arx, ctest.u, ctest.y, t, kLp);
    w.e_ini = e;
    w.yhat_ini = yh;
    inno_kf = std::max(inno_kf, (inno.predict(w) - kfp.predict(w)).cwiseAbs().maxCoeff());
  }
  return {ls_family <= 1e-8 && inno_kf <= 1e-6 && reg <= 1e-4,
          "SPC/pinv/IV " + sci(ls_family) + ", InnoPre/KFPre " + sci(inno_kf) + ", regularized vs SPC " + sci(reg)};
}

// --- 4 ---------------------------------------------------------------------

Outcome noise_free_exactness() {
  const SystemModel s = paper_sec5_system();
  const KalmanModel km = solve_dare(s);
  const SystemModel nf = without_noise(s);
  const Trajectory train = open_loop(nf, 200, 401);
  Hyperparameters hp;
  hp.arx_order = 2;
  const Trajectory test = open_loop(nf, 120, 402, Vector::Constant(2, 0.5));
  double worst = 0.0;
  std::string worst_kind;
  for (PredictorKind k : {PredictorKind::SPC, PredictorKind::DeePCPinv, PredictorKind::DeePCProjReg,
                          PredictorKind::DeePCSplit, PredictorKind::GammaDDPC, PredictorKind::IVDeePC,
                          PredictorKind::InnoPre, PredictorKind::KFPre, PredictorKind::SSKF}) {
    const PredictorModel m = PredictorModel::fit(k, train, kLp, kLf, hp, km);
    for (Index t = 20; t + kLf <= 120; t += 20) {
      WindowData w = m.make_window(test.u, test.y, t);
      w.u_future = stack_samples(test.u, t, kLf);
      if (k == PredictorKind::SSKF) w.xhat_start = Vector(test.x->col(t - kLp));
      const double err = (m.predict(w) - stack_samples(test.y, t, kLf)).cwiseAbs().maxCoeff();
      if (err > worst) {
        worst = err;
        worst_kind = to_string(k);
      }
    }
  }
  return {worst <= 1e-6, "max abs error " + sci(worst) + (worst_kind.empty() ? "" : " (" + worst_kind + ")")};
}

// --- 5, 6 ------------------------------------------------------------------

const ex::SummaryRow& find_row(const ex::RunOutput& run, Index v, LoopMode mode, const std::string& method) {
  for (const ex::SummaryRow& s : run.summary)
    if (s.sweep_value == v && s.mode == mode && s.method == method) return s;
  throw Error("summary row missing: " + method + " at " + std::to_string(v));
}

double pooled(std::optional<double> a, std::optional<double> b) {
  return std::sqrt(a.value_or(0.0) * a.value_or(0.0) + b.value_or(0.0) * b.value_or(0.0));
}

Outcome fig2_trends() {
  ex::json doc = {{"preset", "paper-sec5-fig2"}, {"monte_carlo", {{"N_MC", 50}}}};
  const ex::ExperimentConfig c = ex::parse_config(doc);
  const ex::RunOutput run = ex::run_fig2(c, jobs());
  std::ostringstream d;
  bool ok = true;

  std::map<std::pair<Index, Index>, std::map<std::string, double>> open_angles;
  Index failed = 0;
  for (const ex::TrialResult& r : run.rows) {
    if (!r.ok || !r.angle) {
      ++failed;
      continue;
    }
    if (r.mode == LoopMode::Open) open_angles[{r.sweep_value, r.trial}][r.method] = *r.angle;
  }
  if (failed) {
    ok = false;
    d << failed << " failed trials; ";
  }
  double ls_iv = 0.0;
  for (auto& [key, m] : open_angles)
    if (m.count("LS") && m.count("IV")) ls_iv = std::max(ls_iv, std::abs(m["LS"] - m["IV"]));
  ok = ok && ls_iv <= 1e-8;
  d << "open |LS-IV| max " << sci(ls_iv);

  for (const char* method : {"LS", "IV", "ARX"}) {
    d << "; open " << method << " means";
    for (std::size_t i = 0; i < c.grid.size(); ++i) {
      const double m = find_row(run, c.grid[i], LoopMode::Open, method).mean_angle.value_or(NAN);
      d << ' ' << sci(m);
      if (i > 0 && !(m < find_row(run, c.grid[i - 1], LoopMode::Open, method).mean_angle.value_or(NAN))) ok = false;
    }
  }
  const Index last = c.grid.back();
  const ex::SummaryRow& ls = find_row(run, last, LoopMode::Closed, "LS");
  for (const char* method : {"IV", "ARX"}) {
    const ex::SummaryRow& o = find_row(run, last, LoopMode::Closed, method);
    const double gap = ls.mean_angle.value_or(NAN) - o.mean_angle.value_or(NAN);
    const double se = pooled(ls.se_angle, o.se_angle);
    d << "; closed LS-" << method << " gap " << sci(gap) << " vs 2SE " << sci(2 * se);
    if (!(gap > 2 * se)) ok = false;
  }
  return {ok, d.str()};
}

// Interior minimizer strictly below both endpoints by more than 2 pooled SE.
bool interior_minimum(const std::vector<double>& mean, const std::vector<double>& se, std::ostringstream& d) {
  const std::size_t n = mean.size();
  const std::size_t k = std::min_element(mean.begin(), mean.end()) - mean.begin();
  bool ok = k > 0 && k + 1 < n;
  for (std::size_t e : {std::size_t(0), n - 1}) {
    const double margin = mean[e] - mean[k];
    const double tol = 2 * std::hypot(se[e], se[k]);
    d << " endpoint " << e << " margin " << sci(margin) << " vs 2SE " << sci(tol) << ';';
    if (!(margin > tol)) ok = false;
  }
  return ok;
}

Outcome fig1_trends() {
  ex::json doc = {{"preset", "paper-sec5-fig1"}, {"monte_carlo", {{"N_MC", 50}}}};
  const ex::ExperimentConfig c = ex::parse_config(doc);
  const ex::RunOutput run = ex::run_fig1(c, jobs());
  std::ostringstream d;
  bool ok = true;
  Index failed = 0;
  for (const ex::TrialResult& r : run.rows) failed += r.ok ? 0 : 1;
  if (failed) {
    ok = false;
    d << failed << " failed trials; ";
  }

  std::vector<double> sskf;
  for (Index rho : c.grid) sskf.push_back(find_row(run, rho, LoopMode::Closed, "SSKF").mean_J.value_or(NAN));
  const bool flat = std::all_of(sskf.begin(), sskf.end(), [&](double v) { return v == sskf.front(); });
  ok = ok && flat;
  d << "SSKF " << (flat ? "flat" : "not flat") << " at " << sci(sskf.front()) << ';';

  auto curve = [&](const std::string& method, bool angle) {
    std::vector<double> m, s;
    for (Index rho : c.grid) {
      const ex::SummaryRow& r = find_row(run, rho, LoopMode::Closed, method);
      m.push_back((angle ? r.mean_angle : r.mean_J).value_or(NAN));
      s.push_back((angle ? r.se_angle : r.se_J).value_or(0.0));
    }
    return std::make_pair(m, s);
  };
  for (const char* method : {"InnoPre", "KFPre"}) {
    const auto [m, s] = curve(method, false);
    const std::size_t k = std::min_element(m.begin(), m.end()) - m.begin();
    d << ' ' << method << " cost argmin rho=" << c.grid[k] << ':';
    ok = interior_minimum(m, s, d) && ok;
  }
  const auto [m, s] = curve("InnoPre", true);
  const std::size_t k = std::min_element(m.begin(), m.end()) - m.begin();
  d << " ARX angle argmin rho=" << c.grid[k] << ':';
  ok = interior_minimum(m, s, d) && ok;
  return {ok, d.str()};
}

// --- 7 ---------------------------------------------------------------------

Outcome kalman_layer() {
  const SystemModel s = paper_sec5_system();
  const KalmanModel km = solve_dare(s);
  const double resid = dare_residual(s, km.P);
  const double rho = spectral_radius(s.A - km.K * s.C);

  const SpcModel spc = fit_spc(build_hankel_set(open_loop(s, 200, 701), kLp, kLf));
  const Index T = 4000;
  const Trajectory test = open_loop(s, T, 702);
  const Trajectory f = kalman_filter_pass(km, test, Vector::Zero(2));
  double err_kf = 0, err_spc = 0;
  for (Index k = 0; k < 300; ++k) {
    const Index t = 60 + 13 * k;
    const WindowData w = extract_window(test, t, kLp, kLf);
    const Vector truth = stack_samples(test.y, t, kLf);
    err_kf += (kalman_multistep_predict(km, w, Vector(f.xhat->col(t - kLp))) - truth).squaredNorm();
    err_spc += (spc.predict(w) - truth).squaredNorm();
  }
  err_kf /= 300;
  err_spc /= 300;
  return {resid <= 1e-9 && rho < 1.0 && err_kf <= err_spc,
          "DARE residual " + sci(resid) + ", rho(A-KC)=" + sci(rho) + ", mean sq err SSKF " + sci(err_kf) + " vs SPC " +
              sci(err_spc)};
}

// --- 8 ---------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism(const std::string& cli, const fs::path& work) {
  std::ostringstream d;
  bool ok = true;
  for (const char* fig : {"fig1", "fig2"}) {
    std::vector<std::string> texts;
    for (int j : {1, 8}) {
      const fs::path out = work / (std::string(fig) + "_jobs" + std::to_string(j));
      fs::remove_all(out);
      const std::string cmd = "\"" + cli + "\" " + fig + " --profile smoke --jobs " + std::to_string(j) + " --out \"" +
                              out.string() + "\" > /dev/null";
      const int status = std::system(cmd.c_str());
      if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
        ok = false;
        d << fig << " --jobs " << j << " exited abnormally; ";
      }
      texts.push_back(slurp(out / "results.csv"));
    }
    const bool same = !texts[0].empty() && texts[0] == texts[1];
    ok = ok && same;
    d << fig << " results.csv " << (same ? "identical" : "differs") << " (" << texts[0].size() << " bytes); ";
  }
  return {ok, d.str()};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  std::string cli, work = "acceptance_work";
  int only = 0;
  app.add_option("--cli", cli, "path to the ddpc executable")->required();
  app.add_option("--work", work, "scratch directory");
  app.add_option("--only", only, "run a single criterion");
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(work);

  struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "KFFL realization", 10, kffl_realization},
      {2, "LQ identities", 5, lq_identities},
      {3, "predictor equivalences", 30, predictor_equivalences},
      {4, "noise-free exactness", 5, noise_free_exactness},
      {5, "N_train sweep trends", 600, fig2_trends},
      {6, "ARX order sweep trends", 900, fig1_trends},
      {7, "Kalman layer", 60, kalman_layer},
      {8, "determinism across jobs", 600, [&] { return determinism(cli, work); }},
  };

  bool all = true;
  for (const Criterion& c : criteria) {
    if (only && c.id != only) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > c.budget_s) {
      o.pass = false;
      o.detail += " [over time budget " + std::to_string(int(c.budget_s)) + " s]";
    }
    std::ostringstream t;
    t.precision(2);
    t << std::fixed << secs;
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << c.id << "] " << c.name << ": " << o.detail << " (" << t.str()
              << " s)" << std::endl;
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
