#pragma once

// Innovation-based predictors: hard constraint E_f g = 0 with innovations
// (or one-step predictions) taken from a Kalman filter or an ARX model.

#include <string>

#include "ddpc/kalman.hpp"
#include "ddpc/predictors/common.hpp"

namespace ddpc {

/// Reference null space null(E_f) from the true steady-state filter started at
/// the true initial state. Hankels are built over samples [start, T).
inline NullspaceEstimate true_innovation_nullspace(const KalmanModel& km, const Trajectory& traj, Index Lp, Index Lf,
                                                   const Vector& x0, Index start = 0) {
  const Trajectory filtered = kalman_filter_pass(km, traj, x0);
  const HankelSet h = build_hankel_set(filtered.slice(start, filtered.length()), Lp, Lf);
  return nullspace_estimate_of(NullspaceMethod::TRUE, *h.Ef);
}

namespace detail {

inline void require_blocks(const HankelSet& h, bool need_e, bool need_yhat, const std::string& who) {
  if (need_e && (!h.Ep || !h.Ef)) throw DimensionError(who + ": Hankel set carries no innovation blocks");
  if (need_yhat && (!h.Yhat_p || !h.Yhat_f)) throw DimensionError(who + ": Hankel set carries no one-step prediction blocks");
}

}  // namespace detail

/// Inno-Pre. With reduce, g = Ê⊥ h where Ê⊥ spans null(Ê_f) and
///   col(Up, Yp, Êp, Uf) Ê⊥ h = col(u_ini, y_ini, ê_ini, u)
/// is solved by pseudo-inverse; without it the full stacked system with
/// Ê_f g = 0 appended is solved by pseudo-inverse.
struct InnoPreModel {
  HankelSet hankels;
  bool reduce = true;
  Matrix W;  ///< maps col(u_ini, y_ini, ê_ini, u) to ŷ
  NullspaceEstimate ns;

  AffineMap affine_map(const WindowData& w) const {
    require_window(w, hankels, false, "Inno-Pre");
    if (!w.e_ini || w.e_ini->size() != hankels.n_y * hankels.Lp)
      throw DimensionError("Inno-Pre: window needs e_ini of size n_y*Lp");
    return affine_from_linear(W, vcat({&w.u_ini, &w.y_ini, &*w.e_ini}), hankels.n_u * hankels.Lf);
  }
  Vector predict(const WindowData& w) const {
    require_window(w, hankels, true, "Inno-Pre");
    return affine_map(w).apply(w.u_future);
  }
};

inline InnoPreModel fit_inno_pre(const HankelSet& h, bool reduce = true) {
  detail::require_blocks(h, true, false, "fit_inno_pre");
  require_input_excitation(h, "fit_inno_pre");
  InnoPreModel m;
  m.hankels = h;
  m.reduce = reduce;
  m.ns = nullspace_estimate_of(NullspaceMethod::ARX, *h.Ef);
  if (m.ns.dim() == 0)
    throw RankError("fit_inno_pre: estimated innovation null space is empty; use a smaller ARX order or more data");
  const Matrix stack = vstack({&h.Up, &h.Yp, &*h.Ep, &h.Uf});
  if (reduce) {
    const Matrix& N = m.ns.basis.basis();
    m.W = h.Yf * N * pinv(stack * N);
  } else {
    const Matrix full = vstack({&stack, &*h.Ef});
    m.W = (h.Yf * pinv(full)).leftCols(stack.rows());
  }
  return m;
}

inline Vector inno_pre_predict(const HankelSet& h, const WindowData& w, bool reduce = true) {
  return fit_inno_pre(h, reduce).predict(w);
}

/// KF-Pre: col(Up, Yp, Ŷp, Uf, Yf - Ŷf) g = col(u_ini, y_ini, ŷ_ini, u, 0),
/// ŷ = Yf g with the minimum-norm g.
struct KfPreModel {
  HankelSet hankels;
  Matrix W;  ///< maps col(u_ini, y_ini, ŷ_ini, u) to ŷ

  AffineMap affine_map(const WindowData& w) const {
    require_window(w, hankels, false, "KF-Pre");
    if (!w.yhat_ini || w.yhat_ini->size() != hankels.n_y * hankels.Lp)
      throw DimensionError("KF-Pre: window needs yhat_ini of size n_y*Lp");
    return affine_from_linear(W, vcat({&w.u_ini, &w.y_ini, &*w.yhat_ini}), hankels.n_u * hankels.Lf);
  }
  Vector predict(const WindowData& w) const {
    require_window(w, hankels, true, "KF-Pre");
    return affine_map(w).apply(w.u_future);
  }
};

inline KfPreModel fit_kf_pre(const HankelSet& h) {
  detail::require_blocks(h, false, true, "fit_kf_pre");
  require_input_excitation(h, "fit_kf_pre");
  const Matrix resid = h.Yf - *h.Yhat_f;
  if (nullspace_basis(resid).dim() == 0)
    throw RankError("fit_kf_pre: estimated innovation null space is empty; use a smaller ARX order or more data");
  const Matrix stack = vstack({&h.Up, &h.Yp, &*h.Yhat_p, &h.Uf, &resid});
  KfPreModel m;
  m.hankels = h;
  m.W = (h.Yf * pinv(stack)).leftCols(stack.rows() - resid.rows());
  return m;
}

inline Vector kf_pre_predict(const HankelSet& h, const WindowData& w) { return fit_kf_pre(h).predict(w); }

/// Minimum-norm g* with col(Up, Yp, Uf) g = col(u_ini, y_ini, u), Ŷp g = ŷ_ini
/// and E_f g = 0.
inline Vector kffl_min_norm_decision(const HankelSet& h, const WindowData& w) {
  detail::require_blocks(h, true, true, "kffl_min_norm_decision");
  require_window(w, h, true, "kffl_min_norm_decision");
  if (!w.yhat_ini) throw DimensionError("kffl_min_norm_decision: window needs yhat_ini");
  const Matrix stack = vstack({&h.Up, &h.Yp, &h.Uf, &*h.Yhat_p, &*h.Ef});
  const Vector zero = Vector::Zero(h.Ef->rows());
  return pinv(stack) * vcat({&w.u_ini, &w.y_ini, &w.u_future, &*w.yhat_ini, &zero});
}

}  // namespace ddpc
