#pragma once

// PredictorModel: one handle over every predictor kind, with window
// construction from a running history and a labeled-matrix text format.

#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>

#include "ddpc/cost.hpp"
#include "ddpc/kalman.hpp"
#include "ddpc/predictors/arx.hpp"
#include "ddpc/predictors/innovation.hpp"
#include "ddpc/predictors/iv.hpp"
#include "ddpc/predictors/regularized.hpp"
#include "ddpc/predictors/spc.hpp"

namespace ddpc {

enum class PredictorKind { SPC, DeePCPinv, DeePCProjReg, DeePCSplit, GammaDDPC, IVDeePC, InnoPre, KFPre, SSKF };

inline const char* to_string(PredictorKind k) {
  switch (k) {
    case PredictorKind::SPC: return "SPC";
    case PredictorKind::DeePCPinv: return "DeePC-pinv";
    case PredictorKind::DeePCProjReg: return "DeePC-projreg";
    case PredictorKind::DeePCSplit: return "DeePC-split";
    case PredictorKind::GammaDDPC: return "GammaDDPC";
    case PredictorKind::IVDeePC: return "IV-DeePC";
    case PredictorKind::InnoPre: return "InnoPre";
    case PredictorKind::KFPre: return "KFPre";
    case PredictorKind::SSKF: return "SSKF";
  }
  return "?";
}

inline PredictorKind parse_predictor_kind(const std::string& s) {
  for (PredictorKind k : {PredictorKind::SPC, PredictorKind::DeePCPinv, PredictorKind::DeePCProjReg,
                          PredictorKind::DeePCSplit, PredictorKind::GammaDDPC, PredictorKind::IVDeePC,
                          PredictorKind::InnoPre, PredictorKind::KFPre, PredictorKind::SSKF})
    if (s == to_string(k)) return k;
  throw ConfigError("unknown predictor kind '" + s +
                    "' (expected SPC, DeePC-pinv, DeePC-projreg, DeePC-split, GammaDDPC, IV-DeePC, InnoPre, KFPre, SSKF)");
}

inline bool uses_arx(PredictorKind k) { return k == PredictorKind::InnoPre || k == PredictorKind::KFPre; }

inline bool is_regularized(PredictorKind k) {
  return k == PredictorKind::DeePCProjReg || k == PredictorKind::DeePCSplit || k == PredictorKind::GammaDDPC;
}

struct Hyperparameters {
  double lambda = 1.0;
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  double beta2 = 1.0;
  double beta3 = 1.0;
  Index arx_order = 10;
  bool include_lag0 = true;
  bool reduce = true;
  InstrumentKind instrument = InstrumentKind::Phi;

  void validate() const {
    for (double v : {lambda, lambda1, lambda2, beta2, beta3})
      if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("regularization weights must be finite and >= 0");
    if (arx_order < 1) throw ConfigError("arx_order must be >= 1");
  }
};

/// DeePC with the minimum-norm decision g = Φ† b, ŷ = Yf g.
struct DeepcPinvModel {
  HankelSet hankels;
  Matrix phi_pinv;

  AffineMap affine_map(const WindowData& w) const {
    require_window(w, hankels, false, "DeePC-pinv");
    const Vector ini = vcat({&w.u_ini, &w.y_ini});
    const Vector g0 = phi_pinv.leftCols(ini.size()) * ini;
    return {hankels.Yf * g0, hankels.Yf * phi_pinv.rightCols(hankels.n_u * hankels.Lf)};
  }
  Vector predict(const WindowData& w) const {
    require_window(w, hankels, true, "DeePC-pinv");
    return hankels.Yf * (phi_pinv * vcat({&w.u_ini, &w.y_ini, &w.u_future}));
  }
};

struct GammaModel {
  HankelSet hankels;
  GammaBlocks blocks;
};

struct InnoPreArx {
  ArxModel arx;
  InnoPreModel model;
};

struct KfPreArx {
  ArxModel arx;
  KfPreModel model;
};

class PredictorModel {
 public:
  /// Fits `kind` on the training trajectory. SSKF ignores the data and needs
  /// the Kalman model.
  static PredictorModel fit(PredictorKind kind, const Trajectory& train, Index Lp, Index Lf,
                            const Hyperparameters& hp = {}, const std::optional<KalmanModel>& km = std::nullopt) {
    hp.validate();
    PredictorModel m;
    m.kind_ = kind;
    m.Lp_ = Lp;
    m.Lf_ = Lf;
    m.hp_ = hp;
    m.train_ = train;
    if (kind == PredictorKind::SSKF) {
      if (!km) throw ConfigError("SSKF predictor needs a Kalman model");
      m.impl_ = *km;
      return m;
    }
    if (uses_arx(kind)) {
      const ArxModel arx = fit_arx(train, hp.arx_order, hp.include_lag0);
      const HankelSet h = build_hankel_set(with_arx_innovations(arx, train), Lp, Lf);
      if (kind == PredictorKind::InnoPre)
        m.impl_ = InnoPreArx{arx, fit_inno_pre(h, hp.reduce)};
      else
        m.impl_ = KfPreArx{arx, fit_kf_pre(h)};
      return m;
    }
    const HankelSet h = build_hankel_set(train, Lp, Lf);
    switch (kind) {
      case PredictorKind::SPC: m.impl_ = fit_spc(h); break;
      case PredictorKind::DeePCPinv:
        require_input_excitation(h, "DeePC-pinv");
        m.impl_ = DeepcPinvModel{h, pinv(h.phi())};
        break;
      case PredictorKind::DeePCProjReg: m.impl_ = fit_projreg(h); break;
      case PredictorKind::DeePCSplit: m.impl_ = fit_split(h); break;
      case PredictorKind::GammaDDPC: m.impl_ = GammaModel{h, gamma_ddpc_factorize(h)}; break;
      case PredictorKind::IVDeePC: m.impl_ = fit_iv(h, make_instrument(h, hp.instrument)); break;
      default: break;
    }
    return m;
  }

  PredictorKind kind() const { return kind_; }
  Index Lp() const { return Lp_; }
  Index Lf() const { return Lf_; }
  const Hyperparameters& hyper() const { return hp_; }
  const Trajectory& training() const { return train_; }

  /// Number of past samples make_window needs before t.
  Index history_needed() const { return Lp_ + (uses_arx(kind_) ? hp_.arx_order : 0); }

  /// Window at time t from histories (channels x time) holding at least the
  /// samples before t. ARX kinds attach ê_ini and ŷ_ini from the fitted model;
  /// SSKF attaches the running filter state over the whole history.
  WindowData make_window(const Matrix& u_hist, const Matrix& y_hist, Index t) const {
    if (t < history_needed() || u_hist.cols() < t || y_hist.cols() < t)
      throw IndexError("make_window: t=" + std::to_string(t) + " needs " + std::to_string(history_needed()) +
                       " past samples");
    WindowData w;
    w.u_ini = stack_samples(u_hist, t - Lp_, Lp_);
    w.y_ini = stack_samples(y_hist, t - Lp_, Lp_);
    if (const ArxModel* arx = arx_model()) {
      auto [e, yh] = arx_window_innovations(*arx, u_hist, y_hist, t, Lp_);
      w.e_ini = std::move(e);
      w.yhat_ini = std::move(yh);
    } else if (kind_ == PredictorKind::SSKF) {
      const KalmanModel& km = std::get<KalmanModel>(impl_);
      const Index start = t - Lp_;
      w.xhat_start = kalman_state_after(km, stack_samples(u_hist, 0, start), stack_samples(y_hist, 0, start));
    }
    return w;
  }

  AffineMap affine_map(const WindowData& w) const {
    return std::visit(
        [&](const auto& impl) -> AffineMap {
          using T = std::decay_t<decltype(impl)>;
          if constexpr (std::is_same_v<T, KalmanModel>) {
            const Vector x = kalman_state_after(impl, w.u_ini, w.y_ini, w.xhat_start);
            const KalmanPredictionMap pm = kalman_prediction_map(impl.sys, Lf_);
            return {pm.O * x, pm.G};
          } else if constexpr (std::is_same_v<T, GammaModel>) {
            return impl.blocks.affine_map(w);
          } else if constexpr (std::is_same_v<T, InnoPreArx> || std::is_same_v<T, KfPreArx>) {
            return impl.model.affine_map(w);
          } else {
            return impl.affine_map(w);
          }
        },
        impl_);
  }

  Vector predict(const WindowData& w) const {
    if (w.u_future.size() != affine_input_size())
      throw DimensionError("predict: u_future has size " + std::to_string(w.u_future.size()) + ", expected " +
                           std::to_string(affine_input_size()));
    if (kind_ == PredictorKind::SPC) return std::get<SpcModel>(impl_).predict(w);
    if (kind_ == PredictorKind::DeePCPinv) return std::get<DeepcPinvModel>(impl_).predict(w);
    if (kind_ == PredictorKind::IVDeePC) return std::get<IvModel>(impl_).predict(w);
    if (kind_ == PredictorKind::SSKF) return kalman_multistep_predict(std::get<KalmanModel>(impl_), w, w.xhat_start);
    return affine_map(w).apply(w.u_future);
  }

  /// Joint optimum of the regularized schemes.
  RegularizedSolution solve_regularized(const WindowData& w, const CostWeights& cost, const Vector& r) const {
    switch (kind_) {
      case PredictorKind::DeePCProjReg: return std::get<ProjRegModel>(impl_).solve(w, cost, r, hp_.lambda);
      case PredictorKind::DeePCSplit:
        return std::get<SplitModel>(impl_).solve(w, cost, r, hp_.lambda1, hp_.lambda2);
      case PredictorKind::GammaDDPC:
        return gamma_ddpc_solve(std::get<GammaModel>(impl_).blocks, w, cost, r, hp_.beta2, hp_.beta3);
      default: throw DomainError(std::string("solve_regularized: ") + to_string(kind_) + " is not a regularized scheme");
    }
  }

  /// The innovation null-space estimate the kind is built on.
  NullspaceEstimate nullspace() const {
    switch (kind_) {
      case PredictorKind::SSKF: throw DomainError("nullspace: SSKF has no data Hankels");
      case PredictorKind::IVDeePC: {
        const IvModel& iv = std::get<IvModel>(impl_);
        return iv_nullspace(iv.hankels, iv.Z);
      }
      case PredictorKind::InnoPre: return std::get<InnoPreArx>(impl_).model.ns;
      case PredictorKind::KFPre: {
        const HankelSet& h = hankels();
        return nullspace_estimate_of(NullspaceMethod::ARX, h.Yf - *h.Yhat_f);
      }
      default: return ls_residual_hankel(hankels()).ns;
    }
  }

  const HankelSet& hankels() const {
    return std::visit(
        [](const auto& impl) -> const HankelSet& {
          using T = std::decay_t<decltype(impl)>;
          if constexpr (std::is_same_v<T, KalmanModel>)
            throw DomainError("hankels: SSKF has no data Hankels");
          else if constexpr (std::is_same_v<T, InnoPreArx> || std::is_same_v<T, KfPreArx>)
            return impl.model.hankels;
          else
            return impl.hankels;
        },
        impl_);
  }

  const ArxModel* arx_model() const {
    if (const auto* p = std::get_if<InnoPreArx>(&impl_)) return &p->arx;
    if (const auto* p = std::get_if<KfPreArx>(&impl_)) return &p->arx;
    return nullptr;
  }

  const KalmanModel* kalman_model() const { return std::get_if<KalmanModel>(&impl_); }

  Index affine_input_size() const {
    const Index nu = kind_ == PredictorKind::SSKF ? std::get<KalmanModel>(impl_).sys.n_u() : train_.n_u();
    return nu * Lf_;
  }

  void save(std::ostream& os) const;
  static PredictorModel load(std::istream& is);

 private:
  PredictorKind kind_ = PredictorKind::SPC;
  Index Lp_ = 0;
  Index Lf_ = 0;
  Hyperparameters hp_;
  Trajectory train_;
  std::variant<SpcModel, DeepcPinvModel, ProjRegModel, SplitModel, GammaModel, IvModel, InnoPreArx, KfPreArx,
               KalmanModel>
      impl_;
};

// ---------------------------------------------------------------------------
// Text format
//
//   ddpc-predictor 1
//   kind <name>
//   Lp <int>  Lf <int>
//   <hyperparameter> <value>     (one per line)
//   matrix <label> <rows> <cols>
//   <row-major values, one row per line>
//   ...
//   end
//
// The training trajectory (and the system for SSKF) is stored; load() refits
// and checks the result against the stored fitted matrix.

namespace detail {

inline void write_matrix(std::ostream& os, const std::string& label, const Matrix& m) {
  os << "matrix " << label << ' ' << m.rows() << ' ' << m.cols() << '\n';
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) os << (j ? " " : "") << m(i, j);
    os << '\n';
  }
}

inline Matrix read_matrix(std::istream& is, const std::string& label) {
  std::string tag, got;
  Index r = 0, c = 0;
  if (!(is >> tag >> got >> r >> c) || tag != "matrix" || got != label || r < 0 || c < 0)
    throw ConfigError("predictor file: expected 'matrix " + label + " <rows> <cols>'");
  Matrix m(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j)
      if (!(is >> m(i, j))) throw ConfigError("predictor file: truncated matrix '" + label + "'");
  return m;
}

template <class T>
T read_field(std::istream& is, const std::string& key) {
  std::string k;
  T v{};
  if (!(is >> k >> v) || k != key) throw ConfigError("predictor file: expected field '" + key + "'");
  return v;
}

/// Fitted matrix written for inspection and used as the load-time check.
inline Matrix fitted_artifact(const PredictorModel& m) {
  if (m.kind() == PredictorKind::SSKF) return m.kalman_model()->K;
  const Index nu = m.training().n_u();
  const Index ny = m.training().n_y();
  WindowData w;
  w.u_ini = Vector::Zero(nu * m.Lp());
  w.y_ini = Vector::Zero(ny * m.Lp());
  if (uses_arx(m.kind())) {
    w.e_ini = Vector::Zero(ny * m.Lp());
    w.yhat_ini = Vector::Zero(ny * m.Lp());
  }
  return m.affine_map(w).gain;
}

}  // namespace detail

inline void PredictorModel::save(std::ostream& os) const {
  const auto old_prec = os.precision(17);
  os << "ddpc-predictor 1\n";
  os << "kind " << to_string(kind_) << '\n';
  os << "Lp " << Lp_ << '\n' << "Lf " << Lf_ << '\n';
  os << "lambda " << hp_.lambda << '\n' << "lambda1 " << hp_.lambda1 << '\n' << "lambda2 " << hp_.lambda2 << '\n';
  os << "beta2 " << hp_.beta2 << '\n' << "beta3 " << hp_.beta3 << '\n';
  os << "arx_order " << hp_.arx_order << '\n';
  os << "include_lag0 " << int(hp_.include_lag0) << '\n' << "reduce " << int(hp_.reduce) << '\n';
  os << "instrument " << to_string(hp_.instrument) << '\n';
  if (const KalmanModel* km = kalman_model()) {
    const SystemModel& s = km->sys;
    detail::write_matrix(os, "A", s.A);
    detail::write_matrix(os, "B", s.B);
    detail::write_matrix(os, "C", s.C);
    detail::write_matrix(os, "D", s.D);
    detail::write_matrix(os, "sigma_w", s.sigma_w);
    detail::write_matrix(os, "sigma_v", s.sigma_v);
  } else {
    detail::write_matrix(os, "train_u", train_.u);
    detail::write_matrix(os, "train_y", train_.y);
  }
  detail::write_matrix(os, "fitted", detail::fitted_artifact(*this));
  os << "end\n";
  os.precision(old_prec);
}

inline PredictorModel PredictorModel::load(std::istream& is) {
  std::string magic;
  int version = 0;
  if (!(is >> magic >> version) || magic != "ddpc-predictor" || version != 1)
    throw ConfigError("predictor file: bad header (expected 'ddpc-predictor 1')");
  const PredictorKind kind = parse_predictor_kind(detail::read_field<std::string>(is, "kind"));
  const Index Lp = detail::read_field<Index>(is, "Lp");
  const Index Lf = detail::read_field<Index>(is, "Lf");
  Hyperparameters hp;
  hp.lambda = detail::read_field<double>(is, "lambda");
  hp.lambda1 = detail::read_field<double>(is, "lambda1");
  hp.lambda2 = detail::read_field<double>(is, "lambda2");
  hp.beta2 = detail::read_field<double>(is, "beta2");
  hp.beta3 = detail::read_field<double>(is, "beta3");
  hp.arx_order = detail::read_field<Index>(is, "arx_order");
  hp.include_lag0 = detail::read_field<int>(is, "include_lag0") != 0;
  hp.reduce = detail::read_field<int>(is, "reduce") != 0;
  const std::string inst = detail::read_field<std::string>(is, "instrument");
  if (inst != "phi" && inst != "past") throw ConfigError("predictor file: unknown instrument '" + inst + "'");
  hp.instrument = inst == "phi" ? InstrumentKind::Phi : InstrumentKind::PastData;

  PredictorModel m;
  if (kind == PredictorKind::SSKF) {
    SystemModel s;
    s.A = detail::read_matrix(is, "A");
    s.B = detail::read_matrix(is, "B");
    s.C = detail::read_matrix(is, "C");
    s.D = detail::read_matrix(is, "D");
    s.sigma_w = detail::read_matrix(is, "sigma_w");
    s.sigma_v = detail::read_matrix(is, "sigma_v");
    Trajectory empty;
    empty.u = Matrix(s.n_u(), 0);
    empty.y = Matrix(s.n_y(), 0);
    m = fit(kind, empty, Lp, Lf, hp, solve_dare(s));
  } else {
    Trajectory train;
    train.u = detail::read_matrix(is, "train_u");
    train.y = detail::read_matrix(is, "train_y");
    m = fit(kind, train, Lp, Lf, hp);
  }
  const Matrix stored = detail::read_matrix(is, "fitted");
  const Matrix refit = detail::fitted_artifact(m);
  if (stored.rows() != refit.rows() || stored.cols() != refit.cols() ||
      (stored - refit).norm() > 1e-9 * (1.0 + refit.norm()))
    throw ConfigError("predictor file: refitted model does not match the stored fitted matrix");
  std::string tail;
  if (!(is >> tail) || tail != "end") throw ConfigError("predictor file: missing 'end'");
  return m;
}

}  // namespace ddpc
