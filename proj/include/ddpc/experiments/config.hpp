#pragma once

// Experiment configuration: JSON document, optional preset and profile
// overlays, validation with field paths.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "ddpc/cost.hpp"
#include "ddpc/lti.hpp"
#include "ddpc/predictors/model.hpp"

namespace ddpc::experiments {

using json = nlohmann::json;

enum class ExperimentKind { Fig1, Fig2 };

inline const char* to_string(ExperimentKind k) { return k == ExperimentKind::Fig1 ? "fig1" : "fig2"; }

/// One method column of a sweep: a predictor kind (fig1) or a null-space
/// estimator (fig2).
struct MethodSpec {
  std::string name;
  PredictorKind kind = PredictorKind::SPC;
  NullspaceMethod ns_method = NullspaceMethod::LS;
  Hyperparameters hp;
};

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::Fig1;
  SystemModel system;
  std::vector<LoopMode> loop_modes;
  double feedback_gain = 5.0;
  SignalSpec train_signal;
  Index N_train = 0;
  Index Lp = 0;
  Index Lf = 0;
  CostWeights cost;
  SignalSpec test_reference;
  Index N_test = 0;
  SignalSpec warmup_reference;
  Index warmup_length = 0;
  std::string sweep_variable;
  std::vector<Index> grid;
  std::vector<MethodSpec> methods;
  Index arx_order = 10;
  bool arx_include_lag0 = false;
  std::string instrument = "auto";
  Index N_MC = 1;
  std::uint64_t master_seed = 0;
  json effective;  ///< fully expanded document, written as config.echo
};

// ---------------------------------------------------------------------------
// Presets

inline json preset_json(const std::string& name) {
  json square = {{"kind", "square"}, {"period", 50}, {"amplitude", 2.0}, {"noise_variance", 0.01}};
  json base = {
      {"system", "paper-sec5"},
      {"training", {{"feedback_gain", 5.0}, {"signal", square}, {"N_train", 200}}},
      {"horizons", {{"Lp", 10}, {"Lf", 15}}},
      {"cost", {{"Q", 1.0}, {"R", 0.01}}},
      {"test",
       {{"reference", {{"kind", "sinusoid"}, {"period", 100}, {"amplitude", 1.0}, {"noise_variance", 0.0}}},
        {"N_test", 100},
        {"warmup",
         {{"length", 100},
          {"reference", {{"kind", "constant"}, {"amplitude", 0.0}, {"noise_variance", 0.01}}}}}}},
      {"arx", {{"order", 10}, {"include_lag0", false}}},
      {"instrument", "auto"},
      {"monte_carlo", {{"N_MC", 300}, {"master_seed", 1}}},
      {"profiles", {{"smoke", {{"monte_carlo", {{"N_MC", 20}}}}}, {"full", {{"monte_carlo", {{"N_MC", 300}}}}}}},
  };
  if (name == "paper-sec5-fig1" || name == "paper-sec5") {
    json grid = json::array();
    for (int r = 2; r <= 30; r += 2) grid.push_back(r);
    base["experiment"] = "fig1";
    base["training"]["loop_modes"] = {"closed"};
    base["sweep"] = {{"variable", "rho"}, {"grid", grid}};
    base["methods"] = json::array({{{"kind", "InnoPre"}}, {{"kind", "KFPre"}}, {{"kind", "SSKF"}}});
    return base;
  }
  if (name == "paper-sec5-fig2") {
    base["experiment"] = "fig2";
    base["training"]["loop_modes"] = {"open", "closed"};
    base["sweep"] = {{"variable", "N_train"}, {"grid", {100, 200, 400, 800}}};
    base["methods"] = json::array({{{"kind", "LS"}}, {{"kind", "IV"}}, {{"kind", "ARX"}}});
    return base;
  }
  throw ConfigError("unknown preset '" + name + "' (expected paper-sec5-fig1, paper-sec5-fig2)");
}

// ---------------------------------------------------------------------------
// Field access with paths

namespace detail {

inline const json& field(const json& j, const std::string& key, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path + ": expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw ConfigError(path + "." + key + ": missing");
  return *it;
}

inline double get_number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path + ": expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ConfigError(path + ": must be finite");
  return v;
}

inline Index get_int(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw ConfigError(path + ": expected an integer");
  return j.get<Index>();
}

inline std::string get_string(const json& j, const std::string& path) {
  if (!j.is_string()) throw ConfigError(path + ": expected a string");
  return j.get<std::string>();
}

inline bool get_bool(const json& j, const std::string& path) {
  if (!j.is_boolean()) throw ConfigError(path + ": expected true or false");
  return j.get<bool>();
}

inline Matrix get_matrix(const json& j, const std::string& path) {
  if (j.is_number()) return Matrix::Constant(1, 1, get_number(j, path));
  if (!j.is_array() || j.empty()) throw ConfigError(path + ": expected a number or a nonempty array of rows");
  const Index rows = static_cast<Index>(j.size());
  if (!j[0].is_array()) throw ConfigError(path + ": expected an array of rows");
  const Index cols = static_cast<Index>(j[0].size());
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const json& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Index>(row.size()) != cols)
      throw ConfigError(path + "[" + std::to_string(i) + "]: rows must have equal length");
    for (Index k = 0; k < cols; ++k)
      m(i, k) = get_number(row[static_cast<std::size_t>(k)], path + "[" + std::to_string(i) + "][" + std::to_string(k) + "]");
  }
  return m;
}

inline SignalSpec get_signal(const json& j, const std::string& path) {
  SignalSpec s;
  const std::string kind = get_string(field(j, "kind", path), path + ".kind");
  if (kind == "square") s.kind = SignalKind::SquareWave;
  else if (kind == "sinusoid") s.kind = SignalKind::Sinusoid;
  else if (kind == "white") s.kind = SignalKind::WhiteNoise;
  else if (kind == "constant") s.kind = SignalKind::Constant;
  else throw ConfigError(path + ".kind: unknown signal '" + kind + "' (square, sinusoid, white, constant)");
  if (j.contains("period")) s.period = get_int(j["period"], path + ".period");
  if (j.contains("amplitude")) s.amplitude = get_number(j["amplitude"], path + ".amplitude");
  if (j.contains("noise_variance")) s.noise_variance = get_number(j["noise_variance"], path + ".noise_variance");
  if ((s.kind == SignalKind::SquareWave || s.kind == SignalKind::Sinusoid) && s.period < 1)
    throw ConfigError(path + ".period: must be >= 1");
  if (s.kind == SignalKind::SquareWave && s.period < 2) throw ConfigError(path + ".period: square wave needs >= 2");
  if (s.noise_variance < 0.0) throw ConfigError(path + ".noise_variance: must be >= 0");
  return s;
}

inline LoopMode get_loop_mode(const json& j, const std::string& path) {
  const std::string m = get_string(j, path);
  if (m == "open") return LoopMode::Open;
  if (m == "closed") return LoopMode::Closed;
  throw ConfigError(path + ": expected 'open' or 'closed'");
}

inline void read_hyper(const json& j, const std::string& path, Hyperparameters& hp) {
  if (j.contains("lambda")) hp.lambda = get_number(j["lambda"], path + ".lambda");
  if (j.contains("lambda1")) hp.lambda1 = get_number(j["lambda1"], path + ".lambda1");
  if (j.contains("lambda2")) hp.lambda2 = get_number(j["lambda2"], path + ".lambda2");
  if (j.contains("beta2")) hp.beta2 = get_number(j["beta2"], path + ".beta2");
  if (j.contains("beta3")) hp.beta3 = get_number(j["beta3"], path + ".beta3");
  if (j.contains("include_lag0")) hp.include_lag0 = get_bool(j["include_lag0"], path + ".include_lag0");
  if (j.contains("reduce")) hp.reduce = get_bool(j["reduce"], path + ".reduce");
  for (double v : {hp.lambda, hp.lambda1, hp.lambda2, hp.beta2, hp.beta3})
    if (v < 0.0) throw ConfigError(path + ": regularization weights must be >= 0");
}

inline SystemModel get_system(const json& j, const std::string& path) {
  if (j.is_string()) {
    if (j.get<std::string>() != "paper-sec5")
      throw ConfigError(path + ": unknown system preset '" + j.get<std::string>() + "' (expected paper-sec5)");
    return paper_sec5_system();
  }
  SystemModel s;
  s.A = get_matrix(field(j, "A", path), path + ".A");
  s.B = get_matrix(field(j, "B", path), path + ".B");
  s.C = get_matrix(field(j, "C", path), path + ".C");
  s.D = get_matrix(field(j, "D", path), path + ".D");
  s.sigma_w = get_matrix(field(j, "sigma_w", path), path + ".sigma_w");
  s.sigma_v = get_matrix(field(j, "sigma_v", path), path + ".sigma_v");
  try {
    s.validate();
  } catch (const Error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return s;
}

}  // namespace detail

/// Builds the effective document: preset (if named) overlaid by the user
/// document, then the chosen profile's overlay.
inline json expand_config(const json& user, const std::string& profile = "") {
  if (!user.is_object()) throw ConfigError("config: top level must be an object");
  json doc = user;
  if (user.contains("preset")) {
    doc = preset_json(detail::get_string(user["preset"], "config.preset"));
    doc.merge_patch(user);
  }
  if (!profile.empty()) {
    if (!doc.contains("profiles") || !doc["profiles"].contains(profile))
      throw ConfigError("config.profiles." + profile + ": profile not defined");
    doc.merge_patch(doc["profiles"][profile]);
    doc["profile"] = profile;
  }
  return doc;
}

inline ExperimentConfig parse_config(const json& user, const std::string& profile = "") {
  using namespace detail;
  const json doc = expand_config(user, profile);
  const std::string P = "config";
  ExperimentConfig c;
  c.effective = doc;

  const std::string exp = get_string(field(doc, "experiment", P), P + ".experiment");
  if (exp == "fig1") c.experiment = ExperimentKind::Fig1;
  else if (exp == "fig2") c.experiment = ExperimentKind::Fig2;
  else throw ConfigError(P + ".experiment: expected 'fig1' or 'fig2'");

  c.system = get_system(field(doc, "system", P), P + ".system");

  const json& tr = field(doc, "training", P);
  const json& modes = field(tr, "loop_modes", P + ".training");
  if (!modes.is_array() || modes.empty()) throw ConfigError(P + ".training.loop_modes: expected a nonempty array");
  for (std::size_t i = 0; i < modes.size(); ++i)
    c.loop_modes.push_back(get_loop_mode(modes[i], P + ".training.loop_modes[" + std::to_string(i) + "]"));
  c.feedback_gain = get_number(field(tr, "feedback_gain", P + ".training"), P + ".training.feedback_gain");
  c.train_signal = get_signal(field(tr, "signal", P + ".training"), P + ".training.signal");
  c.N_train = get_int(field(tr, "N_train", P + ".training"), P + ".training.N_train");

  const json& hz = field(doc, "horizons", P);
  c.Lp = get_int(field(hz, "Lp", P + ".horizons"), P + ".horizons.Lp");
  c.Lf = get_int(field(hz, "Lf", P + ".horizons"), P + ".horizons.Lf");
  if (c.Lp < 1) throw ConfigError(P + ".horizons.Lp: must be >= 1");
  if (c.Lf < 1) throw ConfigError(P + ".horizons.Lf: must be >= 1");

  const json& co = field(doc, "cost", P);
  c.cost.Q = get_matrix(field(co, "Q", P + ".cost"), P + ".cost.Q");
  c.cost.R = get_matrix(field(co, "R", P + ".cost"), P + ".cost.R");
  try {
    c.cost.validate();
  } catch (const Error& e) {
    throw ConfigError(P + ".cost: " + e.what());
  }
  if (c.cost.Q.rows() != c.system.n_y() || c.cost.R.rows() != c.system.n_u())
    throw ConfigError(P + ".cost: Q must be n_y x n_y and R n_u x n_u");

  const json& te = field(doc, "test", P);
  c.test_reference = get_signal(field(te, "reference", P + ".test"), P + ".test.reference");
  c.N_test = get_int(field(te, "N_test", P + ".test"), P + ".test.N_test");
  if (c.N_test < 1) throw ConfigError(P + ".test.N_test: must be >= 1");
  const json& wu = field(te, "warmup", P + ".test");
  c.warmup_length = get_int(field(wu, "length", P + ".test.warmup"), P + ".test.warmup.length");
  c.warmup_reference = get_signal(field(wu, "reference", P + ".test.warmup"), P + ".test.warmup.reference");

  const json& sw = field(doc, "sweep", P);
  c.sweep_variable = get_string(field(sw, "variable", P + ".sweep"), P + ".sweep.variable");
  const std::string want = c.experiment == ExperimentKind::Fig1 ? "rho" : "N_train";
  if (c.sweep_variable != want) throw ConfigError(P + ".sweep.variable: " + exp + " sweeps '" + want + "'");
  const json& grid = field(sw, "grid", P + ".sweep");
  if (!grid.is_array() || grid.empty()) throw ConfigError(P + ".sweep.grid: expected a nonempty array");
  for (std::size_t i = 0; i < grid.size(); ++i)
    c.grid.push_back(get_int(grid[i], P + ".sweep.grid[" + std::to_string(i) + "]"));

  const json& ax = field(doc, "arx", P);
  c.arx_order = get_int(field(ax, "order", P + ".arx"), P + ".arx.order");
  c.arx_include_lag0 = get_bool(field(ax, "include_lag0", P + ".arx"), P + ".arx.include_lag0");
  if (c.arx_order < 1) throw ConfigError(P + ".arx.order: must be >= 1");
  if (doc.contains("instrument")) c.instrument = get_string(doc["instrument"], P + ".instrument");
  if (c.instrument != "auto" && c.instrument != "phi" && c.instrument != "past")
    throw ConfigError(P + ".instrument: expected auto, phi or past");

  const json& ms = field(doc, "methods", P);
  if (!ms.is_array() || ms.empty()) throw ConfigError(P + ".methods: expected a nonempty array");
  for (std::size_t i = 0; i < ms.size(); ++i) {
    const std::string path = P + ".methods[" + std::to_string(i) + "]";
    MethodSpec m;
    m.name = get_string(field(ms[i], "kind", path), path + ".kind");
    m.hp.include_lag0 = c.arx_include_lag0;
    read_hyper(ms[i], path, m.hp);
    if (c.experiment == ExperimentKind::Fig1) {
      try {
        m.kind = parse_predictor_kind(m.name);
      } catch (const ConfigError& e) {
        throw ConfigError(path + ".kind: " + e.what());
      }
    } else if (m.name == "LS") {
      m.ns_method = NullspaceMethod::LS;
    } else if (m.name == "IV") {
      m.ns_method = NullspaceMethod::IV;
    } else if (m.name == "ARX") {
      m.ns_method = NullspaceMethod::ARX;
    } else {
      throw ConfigError(path + ".kind: fig2 methods are LS, IV, ARX");
    }
    c.methods.push_back(std::move(m));
  }

  const json& mc = field(doc, "monte_carlo", P);
  c.N_MC = get_int(field(mc, "N_MC", P + ".monte_carlo"), P + ".monte_carlo.N_MC");
  if (c.N_MC < 1) throw ConfigError(P + ".monte_carlo.N_MC: must be >= 1");
  const json& seed = field(mc, "master_seed", P + ".monte_carlo");
  if (!seed.is_number_unsigned() && !(seed.is_number_integer() && seed.get<long long>() >= 0))
    throw ConfigError(P + ".monte_carlo.master_seed: expected a nonnegative integer");
  c.master_seed = seed.get<std::uint64_t>();

  // cross-field checks
  Index max_rho = c.arx_order;
  for (Index g : c.grid) {
    if (c.experiment == ExperimentKind::Fig1 && g < 1) throw ConfigError(P + ".sweep.grid: rho must be >= 1");
    if (c.experiment == ExperimentKind::Fig2 && g < 1) throw ConfigError(P + ".sweep.grid: N_train must be >= 1");
    if (c.experiment == ExperimentKind::Fig1) max_rho = std::max(max_rho, g);
  }
  const Index min_T = (c.experiment == ExperimentKind::Fig1 ? c.N_train : *std::min_element(c.grid.begin(), c.grid.end()));
  const Index ncols = min_T - max_rho - c.Lp - c.Lf + 1;
  const Index phi_rows = (c.system.n_u() + c.system.n_y()) * c.Lp + c.system.n_u() * c.Lf;
  if (ncols <= phi_rows)
    throw ConfigError(std::string(P) + (c.experiment == ExperimentKind::Fig1 ? ".training.N_train" : ".sweep.grid") +
                      ": training length " + std::to_string(min_T) + " leaves " + std::to_string(ncols) +
                      " Hankel columns, need more than " + std::to_string(phi_rows));
  if (c.experiment == ExperimentKind::Fig1 && c.warmup_length < c.Lp + max_rho)
    throw ConfigError(P + ".test.warmup.length: must be >= Lp + max rho = " + std::to_string(c.Lp + max_rho));
  if (c.feedback_gain != 0.0 && (c.system.n_u() != 1 || c.system.n_y() != 1))
    for (LoopMode m : c.loop_modes)
      if (m == LoopMode::Closed) throw ConfigError(P + ".training.feedback_gain: closed loop needs a SISO system");
  return c;
}

/// Parses JSON text; syntax errors report line and column.
inline json parse_json_text(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    const std::size_t upto = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size());
    for (std::size_t i = 0; i < upto; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ConfigError(source + ":" + std::to_string(line) + ":" + std::to_string(col) + ": JSON syntax error: " +
                      e.what());
  }
}

inline ExperimentConfig load_config(const std::string& path, const std::string& profile = "") {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open config file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(parse_json_text(ss.str(), path), profile);
}

}  // namespace ddpc::experiments
